#include "otshift/experiment.hpp"

#include "otshift/errors.hpp"
#include "otshift/seed.hpp"
#include "otshift/svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace otshift {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::labelshift: return "labelshift";
    case ExperimentKind::invariance: return "invariance";
    case ExperimentKind::ldrot: return "ldrot";
    case ExperimentKind::bounds_sweep: return "bounds-sweep";
    }
    return "labelshift";
}

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j_.is_object())
            fail(where_, "expected an object");
    }

    [[noreturn]] static void fail(const std::string& where, const std::string& what)
    {
        throw ConfigError((where.empty() ? std::string("/") : where) + ": " + what);
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& at(const std::string& key)
    {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string path(const std::string& key) const { return where_ + "/" + key; }

    void number(const std::string& key, double& out)
    {
        if (!has(key))
            return;
        const json& v = at(key);
        if (!v.is_number())
            fail(path(key), "expected a number");
        out = v.get<double>();
        if (!std::isfinite(out))
            fail(path(key), "expected a finite number");
    }

    void integer(const std::string& key, int& out, int min_value)
    {
        if (!has(key))
            return;
        const json& v = at(key);
        if (!v.is_number_integer())
            fail(path(key), "expected an integer");
        const auto value = v.get<long long>();
        if (value < min_value || value > 100000000)
            fail(path(key), "must be an integer >= " + std::to_string(min_value));
        out = static_cast<int>(value);
    }

    void unsigned_integer(const std::string& key, std::uint64_t& out)
    {
        if (!has(key))
            return;
        const json& v = at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            fail(path(key), "expected a non-negative integer");
        out = v.get<std::uint64_t>();
    }

    void boolean(const std::string& key, bool& out)
    {
        if (!has(key))
            return;
        const json& v = at(key);
        if (!v.is_boolean())
            fail(path(key), "expected true or false");
        out = v.get<bool>();
    }

    void string(const std::string& key, std::string& out)
    {
        if (!has(key))
            return;
        const json& v = at(key);
        if (!v.is_string())
            fail(path(key), "expected a string");
        out = v.get<std::string>();
    }

    void numbers(const std::string& key, std::vector<double>& out)
    {
        if (!has(key))
            return;
        const json& v = at(key);
        if (!v.is_array())
            fail(path(key), "expected an array of numbers");
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number())
                fail(path(key), "expected an array of numbers");
            out.push_back(e.get<double>());
        }
    }

    void integers(const std::string& key, std::vector<int>& out)
    {
        if (!has(key))
            return;
        const json& v = at(key);
        if (!v.is_array())
            fail(path(key), "expected an array of integers");
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number_integer())
                fail(path(key), "expected an array of integers");
            out.push_back(e.get<int>());
        }
    }

    void settings(const std::string& key, std::vector<DaSetting>& out)
    {
        if (!has(key))
            return;
        const json& v = at(key);
        if (!v.is_array() || v.empty())
            fail(path(key), "expected a non-empty array of setting names");
        out.clear();
        for (const auto& e : v) {
            if (!e.is_string())
                fail(path(key), "expected setting names");
            try {
                out.push_back(da_setting_from_string(e.get<std::string>()));
            } catch (const DomainError& err) {
                fail(path(key), err.what());
            }
        }
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                fail(path(it.key()), "unknown key");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& where, const std::string& what)
{
    if (!ok)
        ObjectReader::fail(where, what);
}

void parse_da_pair(ObjectReader& top, DaPairSpec& spec)
{
    if (!top.has("da_pair"))
        return;
    ObjectReader r(top.at("da_pair"), "/da_pair");
    std::string setting = to_string(spec.setting);
    r.string("setting", setting);
    try {
        spec.setting = da_setting_from_string(setting);
    } catch (const DomainError& e) {
        ObjectReader::fail("/da_pair/setting", e.what());
    }
    r.integer("classes", spec.classes, 1);
    r.integer("dims", spec.dims, 1);
    r.number("separation", spec.separation);
    r.number("sigma", spec.sigma);
    r.numbers("source_marginal", spec.source_marginal);
    r.numbers("target_marginal", spec.target_marginal);
    r.integers("source_labels", spec.source_labels);
    r.integers("target_labels", spec.target_labels);
    r.boolean("anticausal", spec.anticausal);
    r.number("target_rotation", spec.target_rotation);
    r.numbers("target_translation", spec.target_translation);
    r.finish();
    require(spec.separation > 0.0, "/da_pair/separation", "must be positive");
    require(spec.sigma > 0.0, "/da_pair/sigma", "must be positive");
    require(spec.target_translation.empty() || static_cast<int>(spec.target_translation.size()) == spec.dims,
            "/da_pair/target_translation", "needs one entry per dimension");
}

void parse_estimator(ObjectReader& top, EstimatorConfig& e)
{
    if (!top.has("estimator"))
        return;
    ObjectReader r(top.at("estimator"), "/estimator");
    r.number("epsilon", e.epsilon);
    r.integer("samples", e.samples, 1);
    r.integer("batch_size", e.batch_size, 1);
    r.integer("batches", e.batches, 0);
    r.integer("steps_per_batch", e.steps_per_batch, 1);
    r.number("learning_rate", e.learning_rate);
    r.settings("settings", e.settings);
    r.finish();
    require(e.epsilon > 0.0, "/estimator/epsilon", "must be positive");
    require(e.learning_rate > 0.0, "/estimator/learning_rate", "must be positive");
    require(e.batch_size <= e.samples, "/estimator/batch_size", "cannot exceed samples");
}

void parse_trainer(ObjectReader& top, TrainerConfig& t)
{
    if (!top.has("trainer"))
        return;
    ObjectReader r(top.at("trainer"), "/trainer");
    LdrotConfig& c = t.ldrot;
    r.number("alpha", c.alpha);
    r.number("beta", c.beta);
    r.number("epsilon", c.epsilon);
    r.number("tau", c.tau);
    if (r.has("theta")) {
        double theta = 0.0;
        r.number("theta", theta);
        c.theta = theta;
    }
    std::string mode = to_string(c.weight_mode);
    r.string("weight_mode", mode);
    try {
        c.weight_mode = weight_mode_from_string(mode);
    } catch (const ConfigError& e) {
        ObjectReader::fail("/trainer/weight_mode", e.what());
    }
    r.number("lambda", c.lambda);
    r.integer("k_phi", c.k_phi, 1);
    r.integer("per_class_batch", c.per_class_batch, 1);
    r.integer("target_batch", c.target_batch, 1);
    r.number("lr_classifier", c.lr_classifier);
    r.number("lr_phi", c.lr_phi);
    r.integer("total_steps", c.total_steps, 0);
    r.integer("pretrain_steps", c.pretrain_steps, 0);
    r.integers("hidden", c.hidden);
    r.integer("eval_subset", c.eval_subset, 1);
    r.integer("samples", t.samples, 1);
    r.number("invariance_weight", t.invariance_weight);
    r.boolean("baseline", t.baseline);
    r.finish();
    require(t.invariance_weight >= 0.0, "/trainer/invariance_weight", "must be non-negative");
    try {
        LdrotConfig probe = c;
        probe.classes = std::max(1, probe.classes);
        probe.validate();
    } catch (const ConfigError& e) {
        ObjectReader::fail("/trainer", e.what());
    }
}

void parse_sweep(ObjectReader& top, SweepConfig& s)
{
    if (!top.has("sweep"))
        return;
    ObjectReader r(top.at("sweep"), "/sweep");
    r.numbers("separations", s.separations);
    r.settings("settings", s.settings);
    r.integer("seeds", s.seeds, 1);
    r.integer("samples", s.samples, 1);
    r.number("p", s.p);
    r.integer("n_mc", s.n_mc, 1);
    r.finish();
    require(!s.separations.empty(), "/sweep/separations", "needs at least one value");
    for (const double d : s.separations)
        require(d > 0.0 && std::isfinite(d), "/sweep/separations", "values must be positive");
    require(s.p >= 1.0, "/sweep/p", "must be >= 1");
}

std::string fmt(double v)
{
    std::ostringstream o;
    o << std::setprecision(17) << v;
    return o.str();
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << text;
}

DaPairSpec with_setting(const DaPairSpec& base, DaSetting setting)
{
    DaPairSpec spec = base;
    spec.setting = setting;
    if (setting != base.setting) {
        // Label sets follow the new setting; marginals are kept only when their sizes still fit.
        spec.source_labels.clear();
        spec.target_labels.clear();
        const auto [ys, yt] = default_label_sets(setting, spec.classes);
        if (spec.source_marginal.size() != ys.size())
            spec.source_marginal.clear();
        if (spec.target_marginal.size() != yt.size())
            spec.target_marginal.clear();
    }
    return spec;
}

Matrix rows_of(const Matrix& m, const std::vector<int>& idx)
{
    Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
    return out;
}

std::vector<int> draw(int n, int k, std::mt19937_64& rng)
{
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> out;
    std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
    return out;
}

double quartile_mean(const std::vector<TrainRecord>& r, bool last, double TrainRecord::*field)
{
    const std::size_t q = std::max<std::size_t>(1, r.size() / 4);
    double sum = 0.0;
    for (std::size_t i = 0; i < q && i < r.size(); ++i)
        sum += r[last ? r.size() - 1 - i : i].*field;
    return r.empty() ? 0.0 : sum / static_cast<double>(std::min(q, r.size()));
}

std::vector<Panel> history_panels(const TrainHistory& h)
{
    auto series = [&](const std::string& name, double TrainRecord::*field) {
        Series s{name, {}, {}};
        for (const auto& r : h.records) {
            s.x.push_back(r.step);
            s.y.push_back(r.*field);
        }
        return s;
    };
    return {
        {"losses", {series("loss_s", &TrainRecord::loss_s), series("loss_shift", &TrainRecord::loss_shift),
                    series("loss_clus", &TrainRecord::loss_clus)}},
        {"accuracy", {series("src_acc", &TrainRecord::src_acc), series("tgt_acc", &TrainRecord::tgt_acc)}},
        {"latent W_L1", {series("ws_latent", &TrainRecord::ws_latent)}},
    };
}

json history_summary(const TrainHistory& h)
{
    json j;
    if (h.records.empty())
        return j;
    double peak = 0.0;
    for (const auto& r : h.records)
        peak = std::max(peak, r.tgt_acc);
    const auto& last = h.records.back();
    j["steps"] = h.records.size();
    j["final_src_acc"] = last.src_acc;
    j["final_tgt_acc"] = last.tgt_acc;
    j["peak_tgt_acc"] = peak;
    j["tgt_drop_from_peak"] = peak - last.tgt_acc;
    j["ws_latent_first_quartile"] = quartile_mean(h.records, false, &TrainRecord::ws_latent);
    j["ws_latent_last_quartile"] = quartile_mean(h.records, true, &TrainRecord::ws_latent);
    j["loss_shift_first_quartile"] = quartile_mean(h.records, false, &TrainRecord::loss_shift);
    j["loss_shift_last_quartile"] = quartile_mean(h.records, true, &TrainRecord::loss_shift);
    return j;
}

// Writes a training history (also on failure, with the partial history).
template <class Fn>
TrainResult run_training(const fs::path& csv, Fn&& train, RunReport& report)
{
    auto write = [&](const TrainHistory& h) {
        std::ostringstream out;
        h.write_csv(out);
        write_text(csv, out.str());
        report.artifacts.push_back(csv);
    };
    try {
        TrainResult r = train();
        write(r.history);
        return r;
    } catch (const TrainingFailure& e) {
        write(e.history());
        throw;
    }
}

struct Samples {
    DaPair pair;
    LabeledSample source;
    LabeledSample target;
};

Samples draw_samples(const DaPairSpec& spec, int n)
{
    Samples s{make_da_pair(spec), {}, {}};
    s.source = sample_labeled(s.pair.source, n, derive_seed(spec.seed, 10));
    s.target = sample_labeled(s.pair.target, n, derive_seed(spec.seed, 11));
    return s;
}

void run_labelshift(const ExperimentConfig& cfg, RunReport& report)
{
    const EstimatorConfig& e = cfg.estimator;
    std::vector<DaSetting> settings = e.settings;
    if (settings.empty())
        settings.push_back(cfg.da_pair.setting);

    const fs::path csv = cfg.output_dir / "labelshift.csv";
    std::string text = "batch,dual_estimate,exact_lp,setting\n";
    std::vector<Panel> panels;
    json per_setting = json::array();
    auto flush = [&] { write_text(csv, text); };
    report.artifacts.push_back(csv);

    for (std::size_t k = 0; k < settings.size(); ++k) {
        DaPairSpec spec = with_setting(cfg.da_pair, settings[k]);
        spec.seed = cfg.seed;
        const Samples s = draw_samples(spec, e.samples);
        const PushforwardSample fs_all = pushforward(s.pair.source, s.source.points);
        const PushforwardSample ft_all = pushforward(s.pair.target, s.target.points);
        const double exact = ls_exact(fs_all, ft_all, GroundMetricSpec::lp(1.0));

        std::mt19937_64 rng(derive_seed(cfg.seed, 20 + k));
        std::vector<PushforwardSample> src_batches, tgt_batches;
        for (int b = 0; b < e.batches; ++b) {
            PushforwardSample sb, tb;
            sb.f_values = rows_of(fs_all.f_values, draw(e.samples, e.batch_size, rng));
            tb.f_values = rows_of(ft_all.f_values, draw(e.samples, e.batch_size, rng));
            src_batches.push_back(std::move(sb));
            tgt_batches.push_back(std::move(tb));
        }
        StreamConfig sc;
        sc.epsilon = e.epsilon;
        sc.steps_per_batch = e.steps_per_batch;
        sc.learning_rate = e.learning_rate;
        sc.seed = derive_seed(cfg.seed, 30 + k);
        std::vector<StreamPoint> series;
        try {
            series = ls_entropic_stream(src_batches, tgt_batches, GroundMetricSpec::lp(1.0), sc);
        } catch (const NumericalFailure&) {
            flush();
            throw;
        }

        const std::string name = to_string(settings[k]);
        Series est{"dual_estimate", {}, {}}, lp{"exact_lp", {}, {}};
        for (const auto& p : series) {
            text += std::to_string(p.batch) + "," + fmt(p.estimate) + "," + fmt(exact) + "," + name + "\n";
            est.x.push_back(p.batch);
            est.y.push_back(p.estimate);
            lp.x.push_back(p.batch);
            lp.y.push_back(exact);
        }
        flush();
        panels.push_back({name, {est, lp}});
        json row = {{"setting", name}, {"exact_lp", exact}};
        if (!series.empty()) {
            row["final_estimate"] = series.back().estimate;
            row["relative_error"] = exact > 0.0 ? std::abs(series.back().estimate - exact) / exact : 0.0;
        }
        per_setting.push_back(row);
    }
    report.summary["settings"] = per_setting;
    if (cfg.emit_svg) {
        const fs::path svg = cfg.output_dir / "labelshift.svg";
        write_line_charts(svg, "Streaming label-shift estimate vs exact LP", panels);
        report.artifacts.push_back(svg);
    }
}

LdrotConfig trainer_config(const ExperimentConfig& cfg, int classes)
{
    LdrotConfig c = cfg.trainer.ldrot;
    c.classes = classes;
    c.seed = cfg.seed;
    return c;
}

void run_invariance(const ExperimentConfig& cfg, RunReport& report)
{
    DaPairSpec spec = cfg.da_pair;
    spec.seed = cfg.seed;
    const Samples s = draw_samples(spec, cfg.trainer.samples);
    const LdrotConfig c = trainer_config(cfg, spec.classes);
    const TrainResult r = run_training(
        cfg.output_dir / "invariance.csv",
        [&] { return invariance_demo(c, s.source, s.target, cfg.trainer.invariance_weight); }, report);
    report.summary["history"] = history_summary(r.history);
    if (cfg.emit_svg) {
        const fs::path svg = cfg.output_dir / "invariance.svg";
        write_line_charts(svg, "Invariant representation training", history_panels(r.history));
        report.artifacts.push_back(svg);
    }
}

void run_ldrot(const ExperimentConfig& cfg, RunReport& report)
{
    DaPairSpec spec = cfg.da_pair;
    spec.seed = cfg.seed;
    const Samples s = draw_samples(spec, cfg.trainer.samples);
    const LdrotConfig c = trainer_config(cfg, spec.classes);
    const TrainResult r =
        run_training(cfg.output_dir / "ldrot.csv", [&] { return ldrot_train(c, s.source, s.target); }, report);
    report.summary["ldrot"] = history_summary(r.history);
    report.summary["theta"] = r.theta;

    json model = {{"g", r.model.g.to_json()},
                  {"head_s", r.model.head_s.to_json()},
                  {"head_t", r.model.head_t.to_json()},
                  {"phi", r.model.phi.to_json()}};
    const fs::path ckpt = cfg.output_dir / "model.json";
    write_text(ckpt, model.dump(1) + "\n");
    report.artifacts.push_back(ckpt);
    if (cfg.emit_svg) {
        const fs::path svg = cfg.output_dir / "ldrot.svg";
        write_line_charts(svg, "LDROT training", history_panels(r.history));
        report.artifacts.push_back(svg);
    }

    if (cfg.trainer.baseline) {
        LdrotConfig b = c;
        b.alpha = 0.0;
        b.beta = 0.0;
        const TrainResult rb =
            run_training(cfg.output_dir / "baseline.csv", [&] { return ldrot_train(b, s.source, s.target); }, report);
        report.summary["baseline"] = history_summary(rb.history);
        if (!r.history.records.empty() && !rb.history.records.empty())
            report.summary["target_gain"] = r.history.records.back().tgt_acc - rb.history.records.back().tgt_acc;
        if (cfg.emit_svg) {
            const fs::path svg = cfg.output_dir / "baseline.svg";
            write_line_charts(svg, "Source-only baseline", history_panels(rb.history));
            report.artifacts.push_back(svg);
        }
    }
}

void run_bounds_sweep(const ExperimentConfig& cfg, RunReport& report)
{
    const SweepConfig& sw = cfg.sweep;
    const fs::path csv = cfg.output_dir / "bounds.csv";
    std::string text = bounds_csv_header() + "\n";
    json rows = json::array();
    std::vector<Panel> panels;
    json means = json::object();
    report.artifacts.push_back(csv);

    for (const DaSetting setting : sw.settings) {
        Series ls{"ls_exact", {}, {}}, lb{"marginal_lb", {}, {}}, vx{"vertex_ls", {}, {}};
        double setting_sum = 0.0;
        int setting_count = 0;
        for (const double d : sw.separations) {
            double sum_ls = 0.0, sum_lb = 0.0, sum_vx = 0.0;
            for (int k = 0; k < sw.seeds; ++k) {
                DaPairSpec spec = with_setting(cfg.da_pair, setting);
                spec.separation = d;
                spec.seed = cfg.seed + static_cast<std::uint64_t>(k);
                BoundsOptions opts;
                opts.samples_per_side = sw.samples;
                opts.p = sw.p;
                opts.n_mc = sw.n_mc;
                opts.with_anticausal = spec.anticausal;
                const BoundsReport r = compute_bounds(spec, opts);
                text += to_csv_row(r) + "\n";
                rows.push_back(to_json(r));
                sum_ls += r.ls_exact;
                sum_lb += r.marginal_lb;
                sum_vx += r.vertex_ls;
            }
            write_text(csv, text);
            ls.x.push_back(d);
            ls.y.push_back(sum_ls / sw.seeds);
            lb.x.push_back(d);
            lb.y.push_back(sum_lb / sw.seeds);
            vx.x.push_back(d);
            vx.y.push_back(sum_vx / sw.seeds);
            setting_sum += sum_ls;
            setting_count += sw.seeds;
        }
        means[to_string(setting)] = setting_sum / setting_count;
        panels.push_back({to_string(setting), {ls, lb, vx}});
    }
    write_text(csv, text);
    const fs::path js = cfg.output_dir / "bounds.json";
    write_text(js, rows.dump(1) + "\n");
    report.artifacts.push_back(js);
    report.summary["mean_ls_exact"] = means;
    if (cfg.emit_svg) {
        const fs::path svg = cfg.output_dir / "bounds.svg";
        write_line_charts(svg, "Label shift and bounds over separation D", panels);
        report.artifacts.push_back(svg);
    }
}

}  // namespace

ExperimentConfig parse_config(const json& doc)
{
    ExperimentConfig cfg;
    ObjectReader top(doc, "");
    if (!top.has("experiment"))
        ObjectReader::fail("/experiment", "missing required key");
    std::string kind;
    top.string("experiment", kind);
    if (kind == "labelshift") cfg.experiment = ExperimentKind::labelshift;
    else if (kind == "invariance") cfg.experiment = ExperimentKind::invariance;
    else if (kind == "ldrot") cfg.experiment = ExperimentKind::ldrot;
    else if (kind == "bounds-sweep") cfg.experiment = ExperimentKind::bounds_sweep;
    else ObjectReader::fail("/experiment", "unknown experiment '" + kind + "'");

    top.unsigned_integer("seed", cfg.seed);
    std::string out = cfg.output_dir.string();
    top.string("output_dir", out);
    if (out.empty())
        ObjectReader::fail("/output_dir", "must not be empty");
    cfg.output_dir = out;
    top.boolean("emit_svg", cfg.emit_svg);
    parse_da_pair(top, cfg.da_pair);
    parse_estimator(top, cfg.estimator);
    parse_trainer(top, cfg.trainer);
    parse_sweep(top, cfg.sweep);
    top.finish();

    // Catch label-set and marginal mistakes before anything runs.
    try {
        DaPairSpec probe = cfg.da_pair;
        probe.seed = cfg.seed;
        make_da_pair(probe);
        if (cfg.experiment == ExperimentKind::labelshift)
            for (const DaSetting s : cfg.estimator.settings)
                make_da_pair(with_setting(probe, s));
        if (cfg.experiment == ExperimentKind::bounds_sweep)
            for (const DaSetting s : cfg.sweep.settings)
                make_da_pair(with_setting(probe, s));
    } catch (const PlacementFailure&) {
        throw;
    } catch (const Error& e) {
        ObjectReader::fail("/da_pair", e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

void apply_seed_override(ExperimentConfig& cfg)
{
    const char* env = std::getenv("OTSHIFT_SEED");
    if (!env || !*env)
        return;
    std::uint64_t seed = 0;
    const std::string text(env);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ConfigError("OTSHIFT_SEED must be an unsigned integer, got '" + text + "'");
    cfg.seed = seed;
}

RunReport run_experiment(const ExperimentConfig& cfg)
{
    ensure_dir(cfg.output_dir);
    RunReport report;
    report.summary["experiment"] = to_string(cfg.experiment);
    report.summary["seed"] = cfg.seed;
    switch (cfg.experiment) {
    case ExperimentKind::labelshift: run_labelshift(cfg, report); break;
    case ExperimentKind::invariance: run_invariance(cfg, report); break;
    case ExperimentKind::ldrot: run_ldrot(cfg, report); break;
    case ExperimentKind::bounds_sweep: run_bounds_sweep(cfg, report); break;
    }
    const fs::path summary = cfg.output_dir / "summary.json";
    write_text(summary, report.summary.dump(1) + "\n");
    report.artifacts.push_back(summary);
    return report;
}

json summarize_features(const LabeledSample& source, const LabeledSample* target)
{
    auto describe = [](const LabeledSample& s) {
        std::map<int, int> counts;
        for (const int y : s.labels)
            ++counts[y];
        json c = json::object();
        for (const auto& [y, n] : counts)
            c[std::to_string(y)] = n;
        const Vector mean = s.points.colwise().mean();
        const Vector sd = ((s.points.rowwise() - mean.transpose()).array().square().colwise().sum() /
                           std::max<double>(1.0, static_cast<double>(s.size() - 1)))
                              .sqrt();
        return json{{"rows", s.size()},
                    {"features", s.points.cols()},
                    {"label_set", label_set_of(s)},
                    {"class_counts", c},
                    {"feature_mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
                    {"feature_std", std::vector<double>(sd.data(), sd.data() + sd.size())}};
    };
    json out = {{"source", describe(source)}};
    if (target) {
        out["target"] = describe(*target);
        int classes = 0;
        for (const auto* s : {&source, target})
            for (const int y : s->labels)
                classes = std::max(classes, y + 1);
        const PushforwardSample fs_ = one_hot_pushforward(source.labels, classes);
        const PushforwardSample ft_ = one_hot_pushforward(target->labels, classes);
        const ProbVector ps = empirical_marginal(source.labels, classes);
        const ProbVector pt = empirical_marginal(target->labels, classes);
        out["label_shift"] = {{"classes", classes},
                              {"ls_exact_l1", ls_exact(fs_, ft_, GroundMetricSpec::lp(1.0))},
                              {"marginal_lb_l1", marginal_lower_bound(ps, pt, 1.0)}};
    }
    return out;
}

}  // namespace otshift
