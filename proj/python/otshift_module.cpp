#include "otshift/errors.hpp"
#include "otshift/experiment.hpp"
#include "otshift/labelshift.hpp"
#include "otshift/ot.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace otshift;

namespace {

GroundMetricSpec metric(const std::string& name, double p)
{
    if (name == "lp")
        return GroundMetricSpec::lp(p);
    if (name == "kl")
        return GroundMetricSpec::kl();
    if (name == "cosine")
        return GroundMetricSpec::cosine();
    throw ConfigError("unknown metric '" + name + "' (lp, kl, cosine)");
}

PushforwardSample sample_of(const Matrix& f)
{
    PushforwardSample s;
    s.f_values = f;
    s.validate();
    return s;
}

}  // namespace

PYBIND11_MODULE(_otshift, m)
{
    m.doc() = "Label shift via optimal transport on the label simplex";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<MassMismatch>(m, "MassMismatch", base.ptr());
    py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
    py::register_exception<NumericalFailure>(m, "NumericalFailure", base.ptr());

    m.def(
        "exact_ot",
        [](const Vector& a, const Vector& b, const Matrix& c) {
            const OtResult r = exact_ot(a, b, c);
            return py::make_tuple(r.cost, r.plan.matrix);
        },
        py::arg("a"), py::arg("b"), py::arg("cost"), "Exact OT cost and plan.");

    m.def(
        "sinkhorn",
        [](const Vector& a, const Vector& b, const Matrix& c, double epsilon, int max_iters) {
            SinkhornConfig cfg;
            cfg.epsilon = epsilon;
            cfg.max_iters = max_iters;
            const SinkhornResult r = sinkhorn(a, b, c, cfg);
            py::dict out;
            out["entropic_cost"] = r.entropic_cost;
            out["transport_cost"] = r.transport_cost;
            out["plan"] = r.plan.matrix;
            out["iterations"] = r.iterations;
            out["converged"] = r.converged;
            return out;
        },
        py::arg("a"), py::arg("b"), py::arg("cost"), py::arg("epsilon") = 0.1, py::arg("max_iters") = 10000);

    m.def(
        "ls_exact",
        [](const Matrix& fs, const Matrix& ft, const std::string& d, double p) {
            return ls_exact(sample_of(fs), sample_of(ft), metric(d, p));
        },
        py::arg("source"), py::arg("target"), py::arg("metric") = "lp", py::arg("p") = 1.0,
        "Exact label shift between two samples of label-simplex points (one row each).");

    m.def(
        "marginal_lower_bound",
        [](const Vector& ps, const Vector& pt, double p) {
            return marginal_lower_bound(ProbVector(ps), ProbVector(pt), p);
        },
        py::arg("ps"), py::arg("pt"), py::arg("p") = 1.0);

    m.def(
        "vertex_label_shift",
        [](const Vector& ps, const Vector& pt, double p) {
            return vertex_label_shift(ProbVector(ps), ProbVector(pt), p);
        },
        py::arg("ps"), py::arg("pt"), py::arg("p") = 1.0);

    m.def(
        "validate_config",
        [](const std::string& text) {
            const ExperimentConfig cfg = parse_config(nlohmann::json::parse(text));
            return to_string(cfg.experiment);
        },
        py::arg("config_json"), "Parses and validates a config; returns the experiment name.");

    m.def(
        "run_experiment",
        [](const std::string& text) {
            ExperimentConfig cfg = parse_config(nlohmann::json::parse(text));
            RunReport r;
            {
                py::gil_scoped_release release;
                r = run_experiment(cfg);
            }
            std::vector<std::string> paths;
            for (const auto& p : r.artifacts)
                paths.push_back(p.string());
            return py::make_tuple(paths, r.summary.dump());
        },
        py::arg("config_json"), "Runs an experiment; returns (artifact paths, summary JSON text).");
}
