#pragma once

#include "otshift/labelshift.hpp"
#include "otshift/ldrot.hpp"
#include "otshift/mixture.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace otshift {

struct EstimatorConfig {
    double epsilon = 0.1;
    int samples = 500;          // points per side for the exact LP
    int batch_size = 250;
    int batches = 80;
    int steps_per_batch = 20;
    double learning_rate = 0.05;
    std::vector<DaSetting> settings;  // empty = the da_pair setting only
};

struct TrainerConfig {
    LdrotConfig ldrot;
    int samples = 600;              // points per side
    double invariance_weight = 0.1;
    bool baseline = true;           // also run alpha = beta = 0 for the ldrot experiment
};

struct SweepConfig {
    std::vector<double> separations = {5.0, 10.0, 20.0, 40.0};
    std::vector<DaSetting> settings = {DaSetting::closed, DaSetting::partial, DaSetting::open, DaSetting::universal};
    int seeds = 10;
    int samples = 500;
    double p = 1.0;
    int n_mc = 20000;
};

enum class ExperimentKind { labelshift, invariance, ldrot, bounds_sweep };

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::labelshift;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    bool emit_svg = false;
    DaPairSpec da_pair;
    EstimatorConfig estimator;
    TrainerConfig trainer;
    SweepConfig sweep;
};

std::string to_string(ExperimentKind k);

// Validates the whole document (unknown keys, types, ranges) before returning.
// Throws ConfigError with a JSON-pointer style location.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

// Applies OTSHIFT_SEED when it is set to an unsigned integer.
void apply_seed_override(ExperimentConfig& cfg);

struct RunReport {
    std::vector<std::filesystem::path> artifacts;
    nlohmann::json summary;
};

// Runs the experiment and writes its artifacts into cfg.output_dir. On a
// NumericalFailure the artifacts produced so far are kept and the exception
// propagates.
RunReport run_experiment(const ExperimentConfig& cfg);

// Summary of a labeled feature table; with a second table, also the exact
// label shift between the one-hot label pushforwards.
nlohmann::json summarize_features(const LabeledSample& source, const LabeledSample* target);

}  // namespace otshift
