#pragma once

#include "otshift/simplex.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace otshift {

// Multivariate normal component; the covariance is validated and factored once.
class GaussianComponent {
public:
    // Throws DomainError unless the covariance is symmetric (1e-12) and positive definite.
    GaussianComponent(Vector mean, Matrix covariance);

    static GaussianComponent isotropic(Vector mean, double sigma);

    const Vector& mean() const noexcept { return mean_; }
    const Matrix& covariance() const noexcept { return covariance_; }
    const Matrix& cholesky() const noexcept { return chol_; }
    int dims() const noexcept { return static_cast<int>(mean_.size()); }

    double log_density(const Vector& x) const;

    // Largest eigenvalue of the covariance (power iteration, tol 1e-10).
    double operator_norm() const noexcept { return op_norm_; }

private:
    Vector mean_;
    Matrix covariance_;
    Matrix chol_;
    double log_norm_ = 0.0;
    double op_norm_ = 0.0;
};

double power_iteration_max_eigenvalue(const Matrix& sym, double tol = 1e-10, int max_iters = 10000);

// One domain of a class-conditional Gaussian mixture. Labels are global class
// ids; components are shared by pointer between domains in the anti-causal case.
struct MixtureDomain {
    std::vector<std::shared_ptr<const GaussianComponent>> components;
    ProbVector class_marginal;  // over label_set, in the same order
    std::vector<int> label_set;
    int global_classes = 0;

    int dims() const { return components.empty() ? 0 : components.front()->dims(); }
    void validate() const;

    // Class marginal on the global label set, zero for labels this domain lacks.
    ProbVector global_marginal() const;
};

enum class DaSetting { closed, partial, open, universal };

std::string to_string(DaSetting s);
DaSetting da_setting_from_string(const std::string& name);

struct DaPairSpec {
    DaSetting setting = DaSetting::closed;
    int classes = 3;            // global label count M
    int dims = 2;
    double separation = 10.0;   // D
    double sigma = 1.0;         // isotropic component scale
    std::vector<double> source_marginal;  // over the source label set; empty = uniform
    std::vector<double> target_marginal;  // over the target label set; empty = uniform
    std::vector<int> source_labels;       // empty = derived from the setting
    std::vector<int> target_labels;
    bool anticausal = false;       // shared classes reuse the source component
    double target_rotation = 0.0;  // radians, plane of the first two axes
    std::vector<double> target_translation;  // empty or one entry per dimension
    std::uint64_t seed = 0;
};

// Label sets implied by a setting over M global classes:
//   closed    both [0, M)
//   partial   source [0, M), target the first ceil(2M/3)
//   open      source the first ceil(2M/3), target [0, M)
//   universal shared prefix, then source-only, then target-only blocks of
//             max(1, (M-1)/3) labels each
std::pair<std::vector<int>, std::vector<int>> default_label_sets(DaSetting setting, int classes);

struct DaPair {
    MixtureDomain source;
    MixtureDomain target;
};

// Places class means so that every pair satisfies
//   |mu_y - mu_y'| >= D * max(|Sigma_y|_op^{1/2}, |Sigma_y'|_op^{1/2})
// in both domains: a scaled regular simplex when dims >= M - 1, random
// placement with rejection otherwise. Throws PlacementFailure after 100 retries.
DaPair make_da_pair(const DaPairSpec& spec);

// Minimum over class pairs of |mu_y - mu_y'| / max(op^{1/2}); +inf for one class.
double separation_ratio(const MixtureDomain& domain);

struct LabeledSample {
    Matrix points;           // n x d
    std::vector<int> labels; // global class ids
    Eigen::Index size() const noexcept { return points.rows(); }
};

LabeledSample sample_labeled(const MixtureDomain& domain, Eigen::Index n, std::uint64_t seed);

// p(y | x) on the global simplex, computed in log space.
ProbVector bayes_posterior(const MixtureDomain& domain, const Vector& x);

// Same with unnormalized class weights over the domain's label set.
ProbVector bayes_posterior(const MixtureDomain& domain, const Vector& class_weights, const Vector& x);

// Loads a labeled feature table with header `label,f0,f1,...`. Labels are
// non-negative integers; features parse as doubles.
LabeledSample load_feature_csv(const std::filesystem::path& path);

// Global label set of a sample, sorted.
std::vector<int> label_set_of(const LabeledSample& sample);

}  // namespace otshift
