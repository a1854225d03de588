#pragma once

#include "otshift/simplex.hpp"
#include "otshift/tinynet.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace otshift {

inline constexpr double kMassTolerance = 1e-7;

// Weighted finite support; one point per row of `points`.
struct DiscreteMeasure {
    Matrix points;
    Vector weights;

    static DiscreteMeasure uniform(Matrix points);
    Eigen::Index size() const noexcept { return weights.size(); }

    // Throws DomainError unless weights are non-negative and sum to 1 within 1e-9.
    void validate() const;
};

using CostFn = std::function<double(const Vector&, const Vector&)>;

Matrix cost_matrix(const DiscreteMeasure& a, const DiscreteMeasure& b, const CostFn& cost);
CostFn make_cost(const GroundMetricSpec& spec);

struct TransportPlan {
    Matrix matrix;
    Vector row_marginal;  // prescribed source weights
    Vector col_marginal;  // prescribed target weights

    double cost(const Matrix& c) const { return matrix.cwiseProduct(c).sum(); }
    double max_marginal_violation() const;
};

struct OtResult {
    double cost = 0.0;
    TransportPlan plan;
    long pivots = 0;
};

// Exact discrete OT by the transportation simplex (strongly feasible
// spanning-tree basis, block-search pricing with lowest-index ties).
// Throws MassMismatch when total masses differ by more than kMassTolerance.
OtResult exact_ot(const Vector& source_weights, const Vector& target_weights, const Matrix& cost);
OtResult exact_ot(const DiscreteMeasure& a, const DiscreteMeasure& b, const CostFn& cost);

struct SinkhornConfig {
    double epsilon = 0.1;
    int max_iters = 10000;
    double marginal_tol = 1e-9;

    void validate() const;
};

struct SinkhornResult {
    double entropic_cost = 0.0;   // <C, P> + eps * KL(P || a x b)
    double transport_cost = 0.0;  // <C, P>
    TransportPlan plan;
    Vector source_potential;
    Vector target_potential;
    int iterations = 0;
    double marginal_error = 0.0;
    bool converged = false;  // false: best iterate after max_iters
};

// Log-domain Sinkhorn iterations for the entropic primal regularized by
// eps * KL(P || a x b).
SinkhornResult sinkhorn(const Vector& source_weights, const Vector& target_weights, const Matrix& cost,
                        const SinkhornConfig& cfg);
SinkhornResult sinkhorn(const DiscreteMeasure& a, const DiscreteMeasure& b, const CostFn& cost,
                        const SinkhornConfig& cfg);

// -eps * log sum_i w_i exp((phi_i - d_i) / eps), evaluated with log-sum-exp.
double entropic_c_transform(const Vector& phi, const Vector& cost_row, double epsilon,
                            const Vector& source_weights);

struct SemiDualValue {
    double objective = 0.0;
    Vector grad_phi;    // d objective / d phi_i
    Matrix grad_cost;   // d objective / d C_ij (filled only on request)
};

// The entropic semi-dual
//   sum_i a_i phi_i + sum_j b_j phi^c_eps(t_j),
// which with uniform weights is the minibatch objective used to train the
// Kantorovich potential.
SemiDualValue semidual_objective(const Vector& phi, const Matrix& cost, double epsilon,
                                 const Vector& source_weights, const Vector& target_weights,
                                 bool want_cost_grad = false);

// The coupling implied by a source potential and its c-transform; its columns
// match the target weights exactly, its rows match the source weights at the optimum.
TransportPlan semidual_plan(const Vector& phi, const Matrix& cost, double epsilon,
                            const Vector& source_weights, const Vector& target_weights);

enum class PotentialKind { table, net };

struct PotentialSpec {
    PotentialKind kind = PotentialKind::table;
    std::vector<int> hidden;  // ReLU widths of the net potential; empty means one linear unit

    static PotentialSpec table() { return {PotentialKind::table, {}}; }
    static PotentialSpec net(std::vector<int> hidden = {}) { return {PotentialKind::net, std::move(hidden)}; }
};

struct SemiDualConfig {
    double epsilon = 0.1;
    double learning_rate = 0.05;
    int ascent_steps = 5000;
    PotentialSpec potential = PotentialSpec::table();
    std::uint64_t seed = 0;

    void validate() const;
};

// A trained potential: table values per source point, or a network over the
// source support.
struct Potential {
    PotentialSpec spec;
    Vector table;
    DenseNet net;

    Vector evaluate(const Matrix& points) const;
};

Potential make_potential(const PotentialSpec& spec, Eigen::Index source_size, int input_dim,
                         std::uint64_t seed);

struct SemiDualResult {
    double estimate = 0.0;      // objective at the final potential
    double transport_cost = 0.0;  // <C, P_phi> of the implied plan
    Potential potential;
    std::vector<double> trace;  // objective before every ascent step
};

// Adam ascent (beta1 = 0.5, beta2 = 0.999) on the semi-dual. The optimum
// equals the entropic primal value; there is no additive offset between them.
// Throws NumericalFailure if the objective becomes non-finite.
SemiDualResult semidual_estimate(const DiscreteMeasure& source, const DiscreteMeasure& target,
                                 const CostFn& cost, const SemiDualConfig& cfg);

// Continues ascent from an existing potential on a precomputed cost matrix.
SemiDualResult semidual_ascent(Potential potential, AdamState& adam, const Matrix& source_points,
                               const Vector& source_weights, const Vector& target_weights,
                               const Matrix& cost, const SemiDualConfig& cfg);

}  // namespace otshift
