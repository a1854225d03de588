#include "otshift/simplex.hpp"

#include "otshift/errors.hpp"

#include <cmath>
#include <string>

namespace otshift {

namespace {

void require_same_size(const Vector& a, const Vector& b)
{
    if (a.size() != b.size())
        throw DimensionError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
}

// Clamp to [kKlClamp, 1] and renormalize.
Vector clamp_simplex(const Vector& v)
{
    Vector q = v.cwiseMax(kKlClamp).cwiseMin(1.0);
    return q / q.sum();
}

}  // namespace

ProbVector::ProbVector(Vector probs) : probs_(std::move(probs))
{
    if (probs_.size() == 0)
        throw DomainError("probability vector must have at least one entry");
    for (Eigen::Index i = 0; i < probs_.size(); ++i) {
        if (!(probs_[i] >= 0.0) || !std::isfinite(probs_[i]))
            throw DomainError("probability entries must be finite and non-negative");
    }
    const double total = probs_.sum();
    if (std::abs(total - 1.0) > kSimplexTolerance)
        throw DomainError("probabilities sum to " + std::to_string(total) + ", expected 1");
    probs_ /= total;
}

ProbVector::ProbVector(std::initializer_list<double> probs)
    : ProbVector(Eigen::Map<const Vector>(probs.begin(), static_cast<Eigen::Index>(probs.size())))
{
}

ProbVector ProbVector::one_hot(Eigen::Index size, Eigen::Index hot)
{
    if (hot < 0 || hot >= size)
        throw DimensionError("one-hot index out of range");
    Vector v = Vector::Zero(size);
    v[hot] = 1.0;
    return ProbVector(std::move(v));
}

ProbVector ProbVector::uniform(Eigen::Index size)
{
    if (size <= 0)
        throw DomainError("uniform vector needs a positive size");
    return ProbVector(Vector::Constant(size, 1.0 / static_cast<double>(size)));
}

ProbVector ProbVector::extend_to(Eigen::Index global_size, std::span<const int> positions) const
{
    if (static_cast<Eigen::Index>(positions.size()) != size())
        throw DimensionError("position map does not match vector size");
    Vector out = Vector::Zero(global_size);
    for (Eigen::Index k = 0; k < size(); ++k) {
        const int pos = positions[static_cast<std::size_t>(k)];
        if (pos < 0 || pos >= global_size)
            throw DimensionError("label position outside the global label set");
        out[pos] = probs_[k];
    }
    ProbVector result;
    result.probs_ = std::move(out);
    return result;
}

ProbVector normalize_to_simplex(const Vector& v)
{
    if (v.size() == 0)
        throw DegenerateVector("cannot normalize an empty vector");
    Vector clamped = v.cwiseMax(0.0);
    const double total = clamped.sum();
    if (!(total > 0.0) || !std::isfinite(total))
        throw DegenerateVector("no positive mass left after clamping");
    return ProbVector(clamped / total);
}

GroundMetricSpec GroundMetricSpec::lp(double p) { return {MetricKind::lp_pow, p, 0.0}; }
GroundMetricSpec GroundMetricSpec::kl() { return {MetricKind::kl, 1.0, 0.0}; }
GroundMetricSpec GroundMetricSpec::cosine() { return {MetricKind::cosine, 1.0, 0.0}; }
GroundMetricSpec GroundMetricSpec::combined(double lambda) { return {MetricKind::combined, 1.0, lambda}; }
GroundMetricSpec GroundMetricSpec::similarity_weighted()
{
    return {MetricKind::similarity_weighted, 1.0, 0.0};
}

void GroundMetricSpec::validate() const
{
    if (kind == MetricKind::lp_pow && !(p >= 1.0))
        throw DomainError("lp_pow requires p >= 1");
    if (kind == MetricKind::combined && !(lambda >= 0.0))
        throw DomainError("combined metric requires lambda >= 0");
}

double lp_pow_distance(const Vector& a, const Vector& b, double p)
{
    require_same_size(a, b);
    if (!(p >= 1.0))
        throw DomainError("lp_pow requires p >= 1");
    if (p == 1.0)
        return (a - b).cwiseAbs().sum();
    if (p == 2.0)
        return (a - b).squaredNorm();
    return (a - b).cwiseAbs().array().pow(p).sum();
}

double kl_divergence(const Vector& a, const Vector& b)
{
    require_same_size(a, b);
    const Vector pa = clamp_simplex(a);
    const Vector pb = clamp_simplex(b);
    const double value = (pa.array() * (pa.array() / pb.array()).log()).sum();
    return std::max(value, 0.0);
}

double cosine_distance(const Vector& a, const Vector& b)
{
    require_same_size(a, b);
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        throw DegenerateVector("cosine distance of a zero vector");
    const double sim = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
    return 1.0 - sim;
}

double ground_cost(const GroundMetricSpec& spec, const Vector& a, const Vector& b)
{
    spec.validate();
    switch (spec.kind) {
    case MetricKind::lp_pow:
        return lp_pow_distance(a, b, spec.p);
    case MetricKind::kl:
        return kl_divergence(a, b);
    case MetricKind::cosine:
        return cosine_distance(a, b);
    case MetricKind::combined:
    case MetricKind::similarity_weighted:
        break;
    }
    throw DomainError("composite metrics are evaluated with combined_cost");
}

double combined_cost(double weight, double dx, double dy)
{
    if (!(weight >= 0.0) || !(dx >= 0.0) || !(dy >= 0.0) || !std::isfinite(weight) ||
        !std::isfinite(dx) || !std::isfinite(dy))
        throw DomainError("combined cost inputs must be finite and non-negative");
    return weight * dx + dy;
}

PairGradient kl_divergence_grad(const Vector& a, const Vector& b)
{
    require_same_size(a, b);
    const Vector qa = a.cwiseMax(kKlClamp).cwiseMin(1.0);
    const Vector qb = b.cwiseMax(kKlClamp).cwiseMin(1.0);
    const double sa = qa.sum();
    const double sb = qb.sum();
    const Vector pa = qa / sa;
    const Vector pb = qb / sb;

    // Gradients with respect to the normalized vectors.
    const Vector ga = (pa.array() / pb.array()).log() + 1.0;
    const Vector gb = -(pa.array() / pb.array());

    // Back through q -> q / sum(q), then through the clamp.
    Vector da = (ga.array() - ga.dot(pa)) / sa;
    Vector db = (gb.array() - gb.dot(pb)) / sb;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a[i] < kKlClamp || a[i] > 1.0)
            da[i] = 0.0;
        if (b[i] < kKlClamp || b[i] > 1.0)
            db[i] = 0.0;
    }
    return {std::move(da), std::move(db)};
}

PairGradient cosine_distance_grad(const Vector& a, const Vector& b)
{
    require_same_size(a, b);
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        throw DegenerateVector("cosine distance of a zero vector");
    const double sim = a.dot(b) / (na * nb);
    Vector da = -(b / (na * nb) - sim * a / (na * na));
    Vector db = -(a / (na * nb) - sim * b / (nb * nb));
    return {std::move(da), std::move(db)};
}

double entropy(const Vector& p)
{
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0)
            h -= p[i] * std::log(p[i]);
    }
    return h;
}

}  // namespace otshift
