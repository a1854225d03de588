#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace otshift {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kSimplexTolerance = 1e-9;
inline constexpr double kKlClamp = 1e-8;

// A point on the probability simplex: non-negative entries summing to one.
// Construction renormalizes inputs that are already within tolerance.
class ProbVector {
public:
    ProbVector() = default;

    // Throws DomainError if an entry is negative or the sum is off by more
    // than kSimplexTolerance.
    explicit ProbVector(Vector probs);
    ProbVector(std::initializer_list<double> probs);

    static ProbVector one_hot(Eigen::Index size, Eigen::Index hot);
    static ProbVector uniform(Eigen::Index size);

    const Vector& values() const noexcept { return probs_; }
    Eigen::Index size() const noexcept { return probs_.size(); }
    double operator[](Eigen::Index i) const { return probs_[i]; }

    // Embeds into a larger label set: entry k of this vector lands at
    // global index positions[k]; every other label gets exactly zero.
    ProbVector extend_to(Eigen::Index global_size, std::span<const int> positions) const;

    friend bool operator==(const ProbVector&, const ProbVector&) = default;

private:
    Vector probs_;
};

// Clamps negatives to zero and rescales onto the simplex.
// Throws DegenerateVector when nothing positive remains.
ProbVector normalize_to_simplex(const Vector& v);

enum class MetricKind { lp_pow, kl, cosine, combined, similarity_weighted };

struct GroundMetricSpec {
    MetricKind kind = MetricKind::lp_pow;
    double p = 1.0;       // lp_pow exponent
    double lambda = 0.0;  // combined weight on the feature metric

    static GroundMetricSpec lp(double p);
    static GroundMetricSpec kl();
    static GroundMetricSpec cosine();
    static GroundMetricSpec combined(double lambda);
    static GroundMetricSpec similarity_weighted();

    // Throws DomainError on p < 1 or negative lambda.
    void validate() const;
};

// Pointwise cost between two vectors of equal dimension.
//   lp_pow: sum |a_i - b_i|^p
//   kl:     KL(a || b) after clamping both to [1e-8, 1] and renormalizing;
//           the first argument is the prediction under test, the second the
//           reference
//   cosine: 1 - <a, b> / (|a| |b|), in [0, 2]
// The two composite kinds need a feature and a label part and are evaluated
// with combined_cost instead; passing them here throws DomainError.
double ground_cost(const GroundMetricSpec& spec, const Vector& a, const Vector& b);

// weight * dx + dy. The weight is lambda for d and w(x^S, x^T) for the
// similarity-aware variant.
double combined_cost(double weight, double dx, double dy);

double lp_pow_distance(const Vector& a, const Vector& b, double p);
double kl_divergence(const Vector& a, const Vector& b);
double cosine_distance(const Vector& a, const Vector& b);

struct PairGradient {
    Vector d_first;
    Vector d_second;
};

// Exact derivatives of the clamped KL, including the clamp and renormalization.
PairGradient kl_divergence_grad(const Vector& a, const Vector& b);
PairGradient cosine_distance_grad(const Vector& a, const Vector& b);

// Shannon entropy in nats; zero entries contribute nothing.
double entropy(const Vector& p);

}  // namespace otshift
