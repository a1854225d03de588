#pragma once

#include "otshift/mixture.hpp"
#include "otshift/ot.hpp"
#include "otshift/simplex.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace otshift {

// Empirical pushforward f#P: one point of the global label simplex per row,
// uniform weights.
struct PushforwardSample {
    Matrix f_values;

    Eigen::Index size() const noexcept { return f_values.rows(); }
    Eigen::Index classes() const noexcept { return f_values.cols(); }

    // Throws DomainError on an empty sample or a row that is not on the simplex.
    void validate() const;
};

// Bayes labeling function of the domain applied to every row of `points`.
PushforwardSample pushforward(const MixtureDomain& domain, const Matrix& points);

// One-hot rows for the given global labels.
PushforwardSample one_hot_pushforward(const std::vector<int>& labels, int classes);

// Empirical class frequencies of a labeled sample over the global label set.
ProbVector empirical_marginal(const std::vector<int>& labels, int classes);

// Pairwise d_Y cost between the two supports.
Matrix label_cost_matrix(const PushforwardSample& source, const PushforwardSample& target,
                         const GroundMetricSpec& d_y);

// Exact W_{d_Y} between the two uniform empirical pushforwards.
double ls_exact(const PushforwardSample& source, const PushforwardSample& target, const GroundMetricSpec& d_y);

struct StreamConfig {
    double epsilon = 0.1;
    PotentialSpec potential = PotentialSpec::net();
    int steps_per_batch = 50;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
};

struct StreamPoint {
    int batch = 0;
    double objective = 0.0;       // semi-dual value after this batch's ascent
    double transport_cost = 0.0;  // <C, P_phi> on this batch
    double estimate = 0.0;        // mean transport_cost over the latter half of batches so far
};

// Minibatch entropic semi-dual ascent with one potential carried across
// batches. Batch k pairs source_batches[k] with target_batches[k].
std::vector<StreamPoint> ls_entropic_stream(const std::vector<PushforwardSample>& source_batches,
                                            const std::vector<PushforwardSample>& target_batches,
                                            const GroundMetricSpec& d_y, const StreamConfig& cfg);

// sum_y |pS(y) - pT(y)|^p
double marginal_lower_bound(const ProbVector& ps, const ProbVector& pt, double p);

// Exact OT between the simplex vertices weighted by the two class marginals,
// cost |e_y - e_y'|_p^p.
double vertex_label_shift(const ProbVector& ps, const ProbVector& pt, double p);

// Right-hand side of the label-set mismatch lower bounds. Common labels are
// taken in ascending id order; the transport term uses the first C - 1 of them.
// Missing-mass terms are added for each non-empty private label block.
double setting_lower_bound(const PushforwardSample& source, const PushforwardSample& target,
                           const std::vector<int>& source_labels, const std::vector<int>& target_labels,
                           double p);

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

struct AnticausalBound {
    double value = 0.0;
    double marginal_term = 0.0;  // M^p |pS - pT|_1
    McEstimate source_term;      // E_{P^S} |f^S - f^T|_p^p
    McEstimate target_term;      // E_{P^T} |f^S - f^T|_p^p
};

// Throws PreconditionError unless shared classes use the same component object.
AnticausalBound anticausal_upper_bound(const MixtureDomain& source, const MixtureDomain& target, int n_mc,
                                       double p, std::uint64_t seed);

struct BoundsReport {
    std::string setting;
    double separation = 0.0;
    std::uint64_t seed = 0;
    double p_order = 1.0;
    double ls_exact = 0.0;
    double marginal_lb = 0.0;
    double vertex_ls = 0.0;
    std::optional<double> setting_lb;
    std::optional<double> anticausal_ub;
};

struct BoundsOptions {
    int samples_per_side = 500;
    double p = 1.0;
    int n_mc = 20000;
    bool with_anticausal = false;
};

// Samples both domains, pushes them through their Bayes labeling functions and
// evaluates every bound. Class marginals in the lower and vertex terms are the
// empirical frequencies of the drawn samples.
BoundsReport compute_bounds(const DaPairSpec& spec, const BoundsOptions& opts);

nlohmann::json to_json(const BoundsReport& report);
std::string bounds_csv_header();
std::string to_csv_row(const BoundsReport& report);

}  // namespace otshift
