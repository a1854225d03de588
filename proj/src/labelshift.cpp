#include "otshift/labelshift.hpp"

#include "otshift/errors.hpp"
#include "otshift/seed.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

namespace otshift {

void PushforwardSample::validate() const
{
    if (f_values.rows() == 0 || f_values.cols() == 0)
        throw DomainError("pushforward sample is empty");
    for (Eigen::Index i = 0; i < f_values.rows(); ++i) {
        if ((f_values.row(i).array() < 0.0).any() || !f_values.row(i).allFinite())
            throw DomainError("pushforward row " + std::to_string(i) + " has a negative entry");
        if (std::abs(f_values.row(i).sum() - 1.0) > kSimplexTolerance)
            throw DomainError("pushforward row " + std::to_string(i) + " does not sum to one");
    }
}

PushforwardSample pushforward(const MixtureDomain& domain, const Matrix& points)
{
    PushforwardSample out;
    out.f_values = Matrix(points.rows(), domain.global_classes);
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        out.f_values.row(i) = bayes_posterior(domain, Vector(points.row(i).transpose())).values().transpose();
    return out;
}

PushforwardSample one_hot_pushforward(const std::vector<int>& labels, int classes)
{
    PushforwardSample out;
    out.f_values = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= classes)
            throw DomainError("label outside [0, classes)");
        out.f_values(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
    }
    return out;
}

ProbVector empirical_marginal(const std::vector<int>& labels, int classes)
{
    if (labels.empty())
        throw DomainError("empirical marginal of an empty sample");
    Vector counts = Vector::Zero(classes);
    for (const int y : labels) {
        if (y < 0 || y >= classes)
            throw DomainError("label outside [0, classes)");
        counts[y] += 1.0;
    }
    return ProbVector(counts / static_cast<double>(labels.size()));
}

Matrix label_cost_matrix(const PushforwardSample& source, const PushforwardSample& target,
                         const GroundMetricSpec& d_y)
{
    if (source.classes() != target.classes())
        throw DimensionError("pushforwards live on simplices of different size");
    Matrix c(source.size(), target.size());
    for (Eigen::Index i = 0; i < source.size(); ++i) {
        const Vector a = source.f_values.row(i).transpose();
        for (Eigen::Index j = 0; j < target.size(); ++j)
            c(i, j) = ground_cost(d_y, a, target.f_values.row(j).transpose());
    }
    return c;
}

namespace {

Vector uniform_weights(Eigen::Index n)
{
    return Vector::Constant(n, 1.0 / static_cast<double>(n));
}

void check_p(double p)
{
    if (!(p >= 1.0) || !std::isfinite(p))
        throw DomainError("p must be a finite real >= 1");
}

}  // namespace

double ls_exact(const PushforwardSample& source, const PushforwardSample& target, const GroundMetricSpec& d_y)
{
    source.validate();
    target.validate();
    d_y.validate();
    const Matrix c = label_cost_matrix(source, target, d_y);
    return exact_ot(uniform_weights(source.size()), uniform_weights(target.size()), c).cost;
}

void StreamConfig::validate() const
{
    if (!(epsilon > 0.0))
        throw DomainError("stream epsilon must be positive");
    if (steps_per_batch < 1)
        throw DomainError("steps_per_batch must be at least 1");
    if (!(learning_rate > 0.0))
        throw DomainError("stream learning rate must be positive");
}

std::vector<StreamPoint> ls_entropic_stream(const std::vector<PushforwardSample>& source_batches,
                                            const std::vector<PushforwardSample>& target_batches,
                                            const GroundMetricSpec& d_y, const StreamConfig& cfg)
{
    cfg.validate();
    if (source_batches.size() != target_batches.size())
        throw DimensionError("source and target streams have different lengths");
    std::vector<StreamPoint> series;
    if (source_batches.empty())
        return series;

    const auto& first = source_batches.front();
    Potential potential =
        make_potential(cfg.potential, first.size(), static_cast<int>(first.classes()), cfg.seed);
    const Eigen::Index params =
        cfg.potential.kind == PotentialKind::table ? first.size() : potential.net.parameter_count();
    AdamState adam(params, AdamOptions{cfg.learning_rate, 0.5, 0.999, 1e-8});

    SemiDualConfig sd;
    sd.epsilon = cfg.epsilon;
    sd.learning_rate = cfg.learning_rate;
    sd.ascent_steps = cfg.steps_per_batch;
    sd.potential = cfg.potential;
    sd.seed = cfg.seed;

    for (std::size_t k = 0; k < source_batches.size(); ++k) {
        const auto& src = source_batches[k];
        const auto& tgt = target_batches[k];
        src.validate();
        tgt.validate();
        if (cfg.potential.kind == PotentialKind::table && src.size() != first.size())
            throw DimensionError("a table potential needs equally sized source batches");
        const Matrix c = label_cost_matrix(src, tgt, d_y);
        SemiDualResult r;
        try {
            r = semidual_ascent(std::move(potential), adam, src.f_values, uniform_weights(src.size()),
                                uniform_weights(tgt.size()), c, sd);
        } catch (const NumericalFailure& e) {
            throw NumericalFailure(std::string(e.what()) + " (batch " + std::to_string(k) + ")",
                                   k * static_cast<std::size_t>(cfg.steps_per_batch) + e.step());
        }
        potential = std::move(r.potential);

        StreamPoint point;
        point.batch = static_cast<int>(k);
        point.objective = r.estimate;
        point.transport_cost = r.transport_cost;
        series.push_back(point);

        const std::size_t from = k / 2;
        double sum = 0.0;
        for (std::size_t t = from; t <= k; ++t)
            sum += series[t].transport_cost;
        series.back().estimate = sum / static_cast<double>(k - from + 1);
    }
    return series;
}

double marginal_lower_bound(const ProbVector& ps, const ProbVector& pt, double p)
{
    check_p(p);
    if (ps.size() != pt.size())
        throw DimensionError("class marginals have different sizes");
    return (ps.values() - pt.values()).cwiseAbs().array().pow(p).sum();
}

double vertex_label_shift(const ProbVector& ps, const ProbVector& pt, double p)
{
    check_p(p);
    if (ps.size() != pt.size())
        throw DimensionError("class marginals have different sizes");
    const Eigen::Index m = ps.size();
    Matrix c(m, m);
    for (Eigen::Index y = 0; y < m; ++y)
        for (Eigen::Index z = 0; z < m; ++z)
            c(y, z) = lp_pow_distance(ProbVector::one_hot(m, y).values(), ProbVector::one_hot(m, z).values(), p);
    return exact_ot(ps.values(), pt.values(), c).cost;
}

double setting_lower_bound(const PushforwardSample& source, const PushforwardSample& target,
                           const std::vector<int>& source_labels, const std::vector<int>& target_labels,
                           double p)
{
    check_p(p);
    source.validate();
    target.validate();
    if (source.classes() != target.classes())
        throw DimensionError("pushforwards live on simplices of different size");

    std::vector<int> ys(source_labels), yt(target_labels);
    std::sort(ys.begin(), ys.end());
    std::sort(yt.begin(), yt.end());
    for (const auto* set : {&ys, &yt})
        for (const int y : *set)
            if (y < 0 || y >= source.classes())
                throw DomainError("label outside the global label set");
    std::vector<int> common, s_only, t_only;
    std::set_intersection(ys.begin(), ys.end(), yt.begin(), yt.end(), std::back_inserter(common));
    std::set_difference(ys.begin(), ys.end(), yt.begin(), yt.end(), std::back_inserter(s_only));
    std::set_difference(yt.begin(), yt.end(), ys.begin(), ys.end(), std::back_inserter(t_only));
    if (common.empty())
        throw DomainError("source and target share no label");

    double bound = 0.0;
    const auto kept = static_cast<Eigen::Index>(common.size()) - 1;
    if (kept > 0) {
        Matrix qs(source.size(), kept), qt(target.size(), kept);
        for (Eigen::Index k = 0; k < kept; ++k) {
            qs.col(k) = source.f_values.col(common[static_cast<std::size_t>(k)]);
            qt.col(k) = target.f_values.col(common[static_cast<std::size_t>(k)]);
        }
        Matrix c(source.size(), target.size());
        for (Eigen::Index i = 0; i < source.size(); ++i)
            for (Eigen::Index j = 0; j < target.size(); ++j)
                c(i, j) = lp_pow_distance(qs.row(i).transpose(), qt.row(j).transpose(), p);
        bound += exact_ot(uniform_weights(source.size()), uniform_weights(target.size()), c).cost;
    }

    auto missing_mass = [p](const PushforwardSample& s, const std::vector<int>& labels) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < s.size(); ++i)
            for (const int y : labels)
                total += std::pow(s.f_values(i, y), p);
        return total / static_cast<double>(s.size());
    };
    if (!s_only.empty())
        bound += missing_mass(source, s_only);
    if (!t_only.empty())
        bound += missing_mass(target, t_only);
    return bound;
}

namespace {

McEstimate posterior_gap(const MixtureDomain& sample_from, const MixtureDomain& source,
                         const MixtureDomain& target, int n, double p, std::uint64_t seed)
{
    const LabeledSample s = sample_labeled(sample_from, n, seed);
    std::vector<double> values(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const Vector x = s.points.row(i).transpose();
        values[static_cast<std::size_t>(i)] =
            lp_pow_distance(bayes_posterior(source, x).values(), bayes_posterior(target, x).values(), p);
    }
    McEstimate est;
    if (n == 0)
        return est;
    double sum = 0.0;
    for (const double v : values)
        sum += v;
    est.value = sum / n;
    if (n > 1) {
        double sq = 0.0;
        for (const double v : values)
            sq += (v - est.value) * (v - est.value);
        est.std_error = std::sqrt(sq / (n - 1) / n);
    }
    return est;
}

}  // namespace

AnticausalBound anticausal_upper_bound(const MixtureDomain& source, const MixtureDomain& target, int n_mc,
                                       double p, std::uint64_t seed)
{
    check_p(p);
    if (n_mc < 1)
        throw DomainError("n_mc must be positive");
    source.validate();
    target.validate();
    if (source.global_classes != target.global_classes)
        throw DimensionError("domains disagree on the global label set");
    bool shares = false;
    for (std::size_t a = 0; a < source.label_set.size(); ++a)
        for (std::size_t b = 0; b < target.label_set.size(); ++b)
            if (source.label_set[a] == target.label_set[b]) {
                if (source.components[a] != target.components[b])
                    throw PreconditionError("class " + std::to_string(source.label_set[a]) +
                                            " has different conditionals; build the pair with the anti-causal flag");
                shares = true;
            }
    if (!shares)
        throw PreconditionError("anti-causal bound needs at least one shared class");

    AnticausalBound out;
    const double m = source.global_classes;
    out.marginal_term =
        std::pow(m, p) * (source.global_marginal().values() - target.global_marginal().values()).cwiseAbs().sum();
    out.source_term = posterior_gap(source, source, target, n_mc, p, derive_seed(seed, 0));
    out.target_term = posterior_gap(target, source, target, n_mc, p, derive_seed(seed, 1));
    out.value = out.marginal_term + std::min(out.source_term.value, out.target_term.value);
    return out;
}

BoundsReport compute_bounds(const DaPairSpec& spec, const BoundsOptions& opts)
{
    check_p(opts.p);
    if (opts.samples_per_side < 1)
        throw DomainError("samples_per_side must be positive");
    const DaPair pair = make_da_pair(spec);
    const LabeledSample s = sample_labeled(pair.source, opts.samples_per_side, derive_seed(spec.seed, 10));
    const LabeledSample t = sample_labeled(pair.target, opts.samples_per_side, derive_seed(spec.seed, 11));
    const PushforwardSample fs = pushforward(pair.source, s.points);
    const PushforwardSample ft = pushforward(pair.target, t.points);

    BoundsReport r;
    r.setting = to_string(spec.setting);
    r.separation = spec.separation;
    r.seed = spec.seed;
    r.p_order = opts.p;
    r.ls_exact = ls_exact(fs, ft, GroundMetricSpec::lp(opts.p));
    const ProbVector ps = empirical_marginal(s.labels, spec.classes);
    const ProbVector pt = empirical_marginal(t.labels, spec.classes);
    r.marginal_lb = marginal_lower_bound(ps, pt, opts.p);
    r.vertex_ls = vertex_label_shift(ps, pt, opts.p);
    if (pair.source.label_set != pair.target.label_set)
        r.setting_lb = setting_lower_bound(fs, ft, pair.source.label_set, pair.target.label_set, opts.p);
    if (opts.with_anticausal && spec.anticausal)
        r.anticausal_ub =
            anticausal_upper_bound(pair.source, pair.target, opts.n_mc, opts.p, derive_seed(spec.seed, 12)).value;
    return r;
}

nlohmann::json to_json(const BoundsReport& report)
{
    nlohmann::json j = {
        {"setting", report.setting},     {"separation", report.separation},
        {"seed", report.seed},           {"p_order", report.p_order},
        {"ls_exact", report.ls_exact},   {"marginal_lb", report.marginal_lb},
        {"vertex_ls", report.vertex_ls},
    };
    j["setting_lb"] = report.setting_lb ? nlohmann::json(*report.setting_lb) : nlohmann::json(nullptr);
    j["anticausal_ub"] = report.anticausal_ub ? nlohmann::json(*report.anticausal_ub) : nlohmann::json(nullptr);
    return j;
}

std::string bounds_csv_header()
{
    return "setting,separation,seed,p_order,ls_exact,marginal_lb,vertex_ls,setting_lb,anticausal_ub";
}

std::string to_csv_row(const BoundsReport& r)
{
    std::ostringstream out;
    out << std::setprecision(17);
    out << r.setting << ',' << r.separation << ',' << r.seed << ',' << r.p_order << ',' << r.ls_exact << ','
        << r.marginal_lb << ',' << r.vertex_ls << ',';
    if (r.setting_lb)
        out << *r.setting_lb;
    out << ',';
    if (r.anticausal_ub)
        out << *r.anticausal_ub;
    return out.str();
}

}  // namespace otshift
