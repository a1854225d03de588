#include "otshift/errors.hpp"
#include "otshift/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

constexpr int kConfigExit = 2;
constexpr int kNumericalExit = 3;

int cmd_run(const std::string& path)
{
    otshift::ExperimentConfig cfg;
    try {
        cfg = otshift::load_config(path);
        otshift::apply_seed_override(cfg);
    } catch (const otshift::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    } catch (const otshift::PlacementFailure& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    }
    try {
        const auto report = otshift::run_experiment(cfg);
        for (const auto& a : report.artifacts)
            std::cout << a.string() << "\n";
        std::cerr << report.summary.dump(1) << "\n";
    } catch (const otshift::NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericalExit;
    } catch (const otshift::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    }
    return 0;
}

int cmd_validate(const std::string& path)
{
    try {
        auto cfg = otshift::load_config(path);
        otshift::apply_seed_override(cfg);
        std::cout << "ok: " << otshift::to_string(cfg.experiment) << " seed=" << cfg.seed
                  << " output_dir=" << cfg.output_dir.string() << "\n";
    } catch (const otshift::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    } catch (const otshift::PlacementFailure& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    }
    return 0;
}

int cmd_ingest(const std::string& features, const std::string& target, const std::string& out)
{
    otshift::LabeledSample src, tgt;
    try {
        src = otshift::load_feature_csv(features);
        if (!target.empty())
            tgt = otshift::load_feature_csv(target);
    } catch (const otshift::Error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kConfigExit;
    }
    if (!target.empty() && tgt.points.cols() != src.points.cols()) {
        std::cerr << "input error: source has " << src.points.cols() << " features, target has "
                  << tgt.points.cols() << "\n";
        return kConfigExit;
    }
    const auto summary = otshift::summarize_features(src, target.empty() ? nullptr : &tgt);
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    const auto path = std::filesystem::path(out) / "features_summary.json";
    std::ofstream f(path);
    if (ec || !f) {
        std::cerr << "cannot write " << path.string() << "\n";
        return 1;
    }
    f << summary.dump(1) << "\n";
    std::cout << path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"otshift: label shift via optimal transport on the label simplex"};
    app.require_subcommand(1);

    std::string run_config, validate_config, features, target, out;
    auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
    run->add_option("--config", run_config, "Experiment config (JSON)")->required();
    auto* validate = app.add_subcommand("validate", "Check a config without running it");
    validate->add_option("--config", validate_config, "Experiment config (JSON)")->required();
    auto* ingest = app.add_subcommand("ingest", "Summarize a labeled feature CSV");
    ingest->add_option("--features", features, "CSV with header label,f0,f1,...")->required();
    ingest->add_option("--target", target, "Optional target CSV; adds the label shift between the two");
    ingest->add_option("--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigExit;
    }

    try {
        if (*run)
            return cmd_run(run_config);
        if (*validate)
            return cmd_validate(validate_config);
        return cmd_ingest(features, target, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
