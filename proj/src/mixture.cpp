#include "otshift/mixture.hpp"

#include "otshift/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

namespace otshift {

double power_iteration_max_eigenvalue(const Matrix& sym, double tol, int max_iters)
{
    Vector v = Vector::Ones(sym.rows()).normalized();
    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        const Vector w = sym * v;
        const double next = w.norm();
        if (next == 0.0)
            return 0.0;
        v = w / next;
        if (std::abs(next - lambda) <= tol * next)
            return next;
        lambda = next;
    }
    return lambda;
}

GaussianComponent::GaussianComponent(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance))
{
    const auto d = mean_.size();
    if (d == 0 || covariance_.rows() != d || covariance_.cols() != d)
        throw DimensionError("covariance must be d x d for a d-dimensional mean");
    if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw DomainError("covariance is not symmetric");
    Eigen::LLT<Matrix> llt(covariance_);
    if (llt.info() != Eigen::Success)
        throw DomainError("covariance is not positive definite");
    chol_ = llt.matrixL();
    log_norm_ = 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) +
                chol_.diagonal().array().log().sum();
    op_norm_ = power_iteration_max_eigenvalue(covariance_);
}

GaussianComponent GaussianComponent::isotropic(Vector mean, double sigma)
{
    if (!(sigma > 0.0))
        throw DomainError("sigma must be positive");
    const auto d = mean.size();
    return GaussianComponent(std::move(mean), Matrix::Identity(d, d) * (sigma * sigma));
}

double GaussianComponent::log_density(const Vector& x) const
{
    if (x.size() != mean_.size())
        throw DimensionError("point dimension does not match the component");
    const Vector z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
    return -0.5 * z.squaredNorm() - log_norm_;
}

void MixtureDomain::validate() const
{
    if (components.empty())
        throw DomainError("a domain needs at least one component");
    if (components.size() != label_set.size() ||
        class_marginal.size() != static_cast<Eigen::Index>(components.size()))
        throw DimensionError("components, labels and class marginal must align");
    for (const int y : label_set)
        if (y < 0 || y >= global_classes)
            throw DomainError("label outside the global label set");
    for (const auto& c : components)
        if (!c || c->dims() != dims())
            throw DimensionError("components must share one dimension");
}

ProbVector MixtureDomain::global_marginal() const
{
    return class_marginal.extend_to(global_classes, label_set);
}

std::string to_string(DaSetting s)
{
    switch (s) {
    case DaSetting::closed: return "closed";
    case DaSetting::partial: return "partial";
    case DaSetting::open: return "open";
    case DaSetting::universal: return "universal";
    }
    return "closed";
}

DaSetting da_setting_from_string(const std::string& name)
{
    if (name == "closed") return DaSetting::closed;
    if (name == "partial") return DaSetting::partial;
    if (name == "open") return DaSetting::open;
    if (name == "universal") return DaSetting::universal;
    throw DomainError("unknown DA setting '" + name + "'");
}

namespace {

std::vector<int> iota_labels(int from, int to)
{
    std::vector<int> out;
    for (int y = from; y < to; ++y)
        out.push_back(y);
    return out;
}

bool is_subset(const std::vector<int>& a, const std::vector<int>& b)
{
    return std::all_of(a.begin(), a.end(),
                       [&](int y) { return std::find(b.begin(), b.end(), y) != b.end(); });
}

void check_setting(DaSetting setting, const std::vector<int>& ys, const std::vector<int>& yt)
{
    const std::set<int> s(ys.begin(), ys.end());
    const std::set<int> t(yt.begin(), yt.end());
    if (s.size() != ys.size() || t.size() != yt.size() || s.empty() || t.empty())
        throw DomainError("label sets must be non-empty and free of duplicates");
    const bool s_in_t = is_subset(ys, yt);
    const bool t_in_s = is_subset(yt, ys);
    bool ok = false;
    switch (setting) {
    case DaSetting::closed: ok = s == t; break;
    case DaSetting::partial: ok = t_in_s && !s_in_t; break;
    case DaSetting::open: ok = s_in_t && !t_in_s; break;
    case DaSetting::universal: {
        const bool shared = std::any_of(ys.begin(), ys.end(), [&](int y) { return t.count(y) > 0; });
        ok = !s_in_t && !t_in_s && shared;
        break;
    }
    }
    if (!ok)
        throw DomainError("label sets do not match the " + to_string(setting) + " setting");
}

// Vertices of a regular simplex with unit edge length, one per column of a
// (classes - 1) x classes matrix.
Matrix regular_simplex(int classes)
{
    if (classes == 1)
        return Matrix::Zero(1, 1);
    const Matrix centered = Matrix::Identity(classes, classes) -
                            Matrix::Constant(classes, classes, 1.0 / classes);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(centered);
    // Eigenvalues ascend: one zero, then classes - 1 ones.
    const Matrix basis = eig.eigenvectors().rightCols(classes - 1);
    return basis.transpose() * centered / std::sqrt(2.0);
}

std::vector<Vector> place_means(const DaPairSpec& spec)
{
    const int m = spec.classes;
    const int d = spec.dims;
    const double min_gap = spec.separation * spec.sigma * (1.0 + 1e-9);
    std::vector<Vector> means;
    if (d >= m - 1) {
        const Matrix vertices = regular_simplex(m) * min_gap;
        for (int y = 0; y < m; ++y) {
            Vector mu = Vector::Zero(d);
            if (m > 1)
                mu.head(m - 1) = vertices.col(y);
            means.push_back(std::move(mu));
        }
        return means;
    }

    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    const double side = 2.0 * min_gap * std::ceil(std::pow(static_cast<double>(m), 1.0 / d));
    std::uniform_real_distribution<double> coord(-side / 2.0, side / 2.0);
    for (int retry = 0; retry < 100; ++retry) {
        means.clear();
        for (int y = 0; y < m; ++y) {
            bool placed = false;
            for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
                Vector mu(d);
                for (int k = 0; k < d; ++k)
                    mu[k] = coord(rng);
                placed = std::all_of(means.begin(), means.end(),
                                     [&](const Vector& other) { return (other - mu).norm() >= min_gap; });
                if (placed)
                    means.push_back(std::move(mu));
            }
            if (!placed)
                break;
        }
        if (static_cast<int>(means.size()) == m)
            return means;
    }
    throw PlacementFailure("could not place " + std::to_string(m) + " separated means in " +
                           std::to_string(d) + " dimensions");
}

Vector transform_target(const Vector& mu, const DaPairSpec& spec)
{
    Vector out = mu;
    if (spec.target_rotation != 0.0 && mu.size() >= 2) {
        const double c = std::cos(spec.target_rotation);
        const double s = std::sin(spec.target_rotation);
        out[0] = c * mu[0] - s * mu[1];
        out[1] = s * mu[0] + c * mu[1];
    }
    for (std::size_t k = 0; k < spec.target_translation.size(); ++k)
        out[static_cast<Eigen::Index>(k)] += spec.target_translation[k];
    return out;
}

ProbVector marginal_or_uniform(const std::vector<double>& raw, std::size_t size, const char* which)
{
    if (raw.empty())
        return ProbVector::uniform(static_cast<Eigen::Index>(size));
    if (raw.size() != size)
        throw DimensionError(std::string(which) + " marginal has " + std::to_string(raw.size()) +
                             " entries for " + std::to_string(size) + " labels");
    return ProbVector(Eigen::Map<const Vector>(raw.data(), static_cast<Eigen::Index>(raw.size())));
}

}  // namespace

std::pair<std::vector<int>, std::vector<int>> default_label_sets(DaSetting setting, int classes)
{
    const int m = classes;
    const int major = (2 * m + 2) / 3;
    switch (setting) {
    case DaSetting::closed:
        return {iota_labels(0, m), iota_labels(0, m)};
    case DaSetting::partial:
        return {iota_labels(0, m), iota_labels(0, major)};
    case DaSetting::open:
        return {iota_labels(0, major), iota_labels(0, m)};
    case DaSetting::universal: {
        const int priv = std::max(1, (m - 1) / 3);
        const int shared = m - 2 * priv;
        if (shared < 1)
            throw DomainError("universal setting needs at least 3 classes");
        auto src = iota_labels(0, shared + priv);
        auto tgt = iota_labels(0, shared);
        for (int y = shared + priv; y < m; ++y)
            tgt.push_back(y);
        return {src, tgt};
    }
    }
    throw DomainError("unknown DA setting");
}

double separation_ratio(const MixtureDomain& domain)
{
    double ratio = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < domain.components.size(); ++a)
        for (std::size_t b = a + 1; b < domain.components.size(); ++b) {
            const auto& ca = *domain.components[a];
            const auto& cb = *domain.components[b];
            const double scale = std::max(std::sqrt(ca.operator_norm()), std::sqrt(cb.operator_norm()));
            ratio = std::min(ratio, (ca.mean() - cb.mean()).norm() / scale);
        }
    return ratio;
}

DaPair make_da_pair(const DaPairSpec& spec)
{
    if (spec.classes < 1 || spec.dims < 1)
        throw DomainError("classes and dims must be positive");
    if (!(spec.separation > 0.0))
        throw DomainError("separation D must be positive");
    if (!spec.target_translation.empty() && static_cast<int>(spec.target_translation.size()) != spec.dims)
        throw DimensionError("target translation needs one entry per dimension");

    auto [ys, yt] = default_label_sets(spec.setting, spec.classes);
    if (!spec.source_labels.empty())
        ys = spec.source_labels;
    if (!spec.target_labels.empty())
        yt = spec.target_labels;
    for (const auto* set : {&ys, &yt})
        for (const int y : *set)
            if (y < 0 || y >= spec.classes)
                throw DomainError("label " + std::to_string(y) + " outside [0, classes)");
    check_setting(spec.setting, ys, yt);

    const std::vector<Vector> means = place_means(spec);
    std::vector<std::shared_ptr<const GaussianComponent>> source_parts(static_cast<std::size_t>(spec.classes));
    for (int y = 0; y < spec.classes; ++y)
        source_parts[static_cast<std::size_t>(y)] =
            std::make_shared<const GaussianComponent>(GaussianComponent::isotropic(means[static_cast<std::size_t>(y)], spec.sigma));

    DaPair pair;
    pair.source.global_classes = spec.classes;
    pair.source.label_set = ys;
    pair.source.class_marginal = marginal_or_uniform(spec.source_marginal, ys.size(), "source");
    for (const int y : ys)
        pair.source.components.push_back(source_parts[static_cast<std::size_t>(y)]);

    pair.target.global_classes = spec.classes;
    pair.target.label_set = yt;
    pair.target.class_marginal = marginal_or_uniform(spec.target_marginal, yt.size(), "target");
    const bool shares_source = spec.anticausal;
    for (const int y : yt) {
        const bool in_source = std::find(ys.begin(), ys.end(), y) != ys.end();
        if (shares_source && in_source) {
            pair.target.components.push_back(source_parts[static_cast<std::size_t>(y)]);
        } else {
            pair.target.components.push_back(std::make_shared<const GaussianComponent>(GaussianComponent::isotropic(
                transform_target(means[static_cast<std::size_t>(y)], spec), spec.sigma)));
        }
    }

    for (const auto* domain : {&pair.source, &pair.target}) {
        domain->validate();
        if (separation_ratio(*domain) < spec.separation)
            throw PlacementFailure("constructed domain violates the separation condition");
    }
    return pair;
}

LabeledSample sample_labeled(const MixtureDomain& domain, Eigen::Index n, std::uint64_t seed)
{
    if (n < 0)
        throw DomainError("sample size must be non-negative");
    domain.validate();
    const int d = domain.dims();
    LabeledSample out;
    out.points = Matrix(n, d);
    out.labels.resize(static_cast<std::size_t>(n));

    std::vector<double> cumulative;
    double acc = 0.0;
    for (Eigen::Index k = 0; k < domain.class_marginal.size(); ++k) {
        acc += domain.class_marginal[k];
        cumulative.push_back(acc);
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(d);
    for (Eigen::Index s = 0; s < n; ++s) {
        const double u = unit(rng) * acc;
        auto k = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                          cumulative.begin());
        k = std::min(k, cumulative.size() - 1);
        for (int t = 0; t < d; ++t)
            z[t] = normal(rng);
        const auto& comp = *domain.components[k];
        out.points.row(s) = (comp.mean() + comp.cholesky() * z).transpose();
        out.labels[static_cast<std::size_t>(s)] = domain.label_set[k];
    }
    return out;
}

ProbVector bayes_posterior(const MixtureDomain& domain, const Vector& class_weights, const Vector& x)
{
    domain.validate();
    if (x.size() != domain.dims())
        throw DimensionError("point dimension does not match the domain");
    if (class_weights.size() != static_cast<Eigen::Index>(domain.components.size()))
        throw DimensionError("one class weight per component is required");
    const Vector weights = normalize_to_simplex(class_weights).values();

    const auto k = static_cast<Eigen::Index>(domain.components.size());
    Vector logits(k);
    for (Eigen::Index c = 0; c < k; ++c)
        logits[c] = weights[c] > 0.0
                        ? std::log(weights[c]) + domain.components[static_cast<std::size_t>(c)]->log_density(x)
                        : -std::numeric_limits<double>::infinity();
    const double top = logits.maxCoeff();
    Vector post = (logits.array() - top).exp();
    post /= post.sum();

    Vector global = Vector::Zero(domain.global_classes);
    for (Eigen::Index c = 0; c < k; ++c)
        global[domain.label_set[static_cast<std::size_t>(c)]] = post[c];
    return ProbVector(std::move(global));
}

ProbVector bayes_posterior(const MixtureDomain& domain, const Vector& x)
{
    return bayes_posterior(domain, domain.class_marginal.values(), x);
}

std::vector<int> label_set_of(const LabeledSample& sample)
{
    std::set<int> labels(sample.labels.begin(), sample.labels.end());
    return {labels.begin(), labels.end()};
}

}  // namespace otshift
