#include "otshift/ot.hpp"

#include "otshift/errors.hpp"

#include <cmath>
#include <limits>

namespace otshift {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const Vector& x)
{
    const double top = x.maxCoeff();
    if (top == kNegInf)
        return kNegInf;
    return top + std::log((x.array() - top).exp().sum());
}

Vector safe_log(const Vector& w)
{
    return w.unaryExpr([](double v) { return v > 0.0 ? std::log(v) : kNegInf; });
}

}  // namespace

DiscreteMeasure DiscreteMeasure::uniform(Matrix points)
{
    const Eigen::Index n = points.rows();
    if (n == 0)
        throw DomainError("a measure needs at least one support point");
    return {std::move(points), Vector::Constant(n, 1.0 / static_cast<double>(n))};
}

void DiscreteMeasure::validate() const
{
    if (weights.size() == 0 || points.rows() != weights.size())
        throw DomainError("measure support and weights disagree or are empty");
    if ((weights.array() < 0.0).any() || !weights.allFinite())
        throw DomainError("measure weights must be finite and non-negative");
    if (std::abs(weights.sum() - 1.0) > kSimplexTolerance)
        throw DomainError("measure weights must sum to 1");
}

Matrix cost_matrix(const DiscreteMeasure& a, const DiscreteMeasure& b, const CostFn& cost)
{
    Matrix c(a.points.rows(), b.points.rows());
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        const Vector ai = a.points.row(i).transpose();
        for (Eigen::Index j = 0; j < c.cols(); ++j)
            c(i, j) = cost(ai, b.points.row(j).transpose());
    }
    return c;
}

CostFn make_cost(const GroundMetricSpec& spec)
{
    spec.validate();
    return [spec](const Vector& a, const Vector& b) { return ground_cost(spec, a, b); };
}

double TransportPlan::max_marginal_violation() const
{
    const double rows = (matrix.rowwise().sum() - row_marginal).cwiseAbs().maxCoeff();
    const double cols = (matrix.colwise().sum().transpose() - col_marginal).cwiseAbs().maxCoeff();
    return std::max(rows, cols);
}

void SinkhornConfig::validate() const
{
    if (!(epsilon > 0.0))
        throw DomainError("sinkhorn epsilon must be positive");
    if (max_iters < 1)
        throw DomainError("sinkhorn max_iters must be at least 1");
    if (!(marginal_tol > 0.0))
        throw DomainError("sinkhorn marginal_tol must be positive");
}

SinkhornResult sinkhorn(const Vector& a, const Vector& b, const Matrix& cost, const SinkhornConfig& cfg)
{
    cfg.validate();
    if (cost.rows() != a.size() || cost.cols() != b.size())
        throw DimensionError("cost matrix shape does not match the measures");
    if (!cost.allFinite())
        throw DomainError("costs must be finite");
    if (std::abs(a.sum() - b.sum()) > kMassTolerance)
        throw MassMismatch("source and target masses differ");

    const double eps = cfg.epsilon;
    const Eigen::Index m = a.size();
    const Eigen::Index n = b.size();
    const Vector log_a = safe_log(a);
    const Vector log_b = safe_log(b);
    const Matrix scaled = cost / eps;

    Vector f = Vector::Zero(m);
    Vector g = Vector::Zero(n);
    Vector work_m(m);
    Vector work_n(n);

    // Row sums of the current plan, given f and g.
    auto row_sums = [&](Vector& out) {
        for (Eigen::Index i = 0; i < m; ++i) {
            if (log_a[i] == kNegInf) {
                out[i] = 0.0;
                continue;
            }
            work_n = log_b.array() + (g.array() / eps) - scaled.row(i).transpose().array();
            out[i] = std::exp(log_a[i] + f[i] / eps + log_sum_exp(work_n));
        }
    };

    SinkhornResult result;
    Vector rows(m);
    for (int it = 1; it <= cfg.max_iters; ++it) {
        for (Eigen::Index i = 0; i < m; ++i) {
            work_n = log_b.array() + (g.array() / eps) - scaled.row(i).transpose().array();
            f[i] = -eps * log_sum_exp(work_n);
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            work_m = log_a.array() + (f.array() / eps) - scaled.col(j).array();
            g[j] = -eps * log_sum_exp(work_m);
        }
        // Zero-weight points get finite potentials so the plan stays well defined.
        for (Eigen::Index i = 0; i < m; ++i)
            if (!std::isfinite(f[i])) f[i] = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!std::isfinite(g[j])) g[j] = 0.0;

        row_sums(rows);
        result.iterations = it;
        result.marginal_error = (rows - a).cwiseAbs().maxCoeff();
        if (!std::isfinite(result.marginal_error))
            throw NumericalFailure("sinkhorn produced a non-finite marginal", static_cast<std::size_t>(it));
        if (result.marginal_error < cfg.marginal_tol) {
            result.converged = true;
            break;
        }
    }

    Matrix plan(m, n);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            plan(i, j) = std::exp(log_a[i] + log_b[j] + (f[i] + g[j] - cost(i, j)) / eps);

    result.transport_cost = plan.cwiseProduct(cost).sum();
    // eps * KL(P || a x b) = sum P (f_i + g_j - C_ij), so the entropic cost is sum P (f_i + g_j).
    double entropic = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (plan(i, j) > 0.0)
                entropic += plan(i, j) * (f[i] + g[j]);
    result.entropic_cost = entropic;
    result.plan.matrix = std::move(plan);
    result.plan.row_marginal = a;
    result.plan.col_marginal = b;
    result.source_potential = std::move(f);
    result.target_potential = std::move(g);
    return result;
}

SinkhornResult sinkhorn(const DiscreteMeasure& a, const DiscreteMeasure& b, const CostFn& cost,
                        const SinkhornConfig& cfg)
{
    a.validate();
    b.validate();
    return sinkhorn(a.weights, b.weights, cost_matrix(a, b, cost), cfg);
}

double entropic_c_transform(const Vector& phi, const Vector& cost_row, double epsilon,
                            const Vector& source_weights)
{
    if (!(epsilon > 0.0))
        throw DomainError("epsilon must be positive");
    if (phi.size() != cost_row.size() || phi.size() != source_weights.size())
        throw DimensionError("potential, cost row and weights must have equal length");
    const Vector terms = safe_log(source_weights).array() + (phi - cost_row).array() / epsilon;
    return -epsilon * log_sum_exp(terms);
}

SemiDualValue semidual_objective(const Vector& phi, const Matrix& cost, double epsilon,
                                 const Vector& a, const Vector& b, bool want_cost_grad)
{
    if (!(epsilon > 0.0))
        throw DomainError("epsilon must be positive");
    if (phi.size() != a.size() || cost.rows() != a.size() || cost.cols() != b.size())
        throw DimensionError("semi-dual inputs have inconsistent shapes");

    const Vector log_a = safe_log(a);
    SemiDualValue out;
    out.objective = a.dot(phi);
    out.grad_phi = a;
    if (want_cost_grad)
        out.grad_cost = Matrix::Zero(cost.rows(), cost.cols());

    Vector logits(a.size());
    for (Eigen::Index j = 0; j < cost.cols(); ++j) {
        logits = log_a.array() + (phi - cost.col(j)).array() / epsilon;
        const double lse = log_sum_exp(logits);
        out.objective -= b[j] * epsilon * lse;
        // Column-wise softmax over the source points.
        const Vector weights = (logits.array() - lse).exp();
        out.grad_phi -= b[j] * weights;
        if (want_cost_grad)
            out.grad_cost.col(j) = b[j] * weights;
    }
    return out;
}

TransportPlan semidual_plan(const Vector& phi, const Matrix& cost, double epsilon, const Vector& a,
                            const Vector& b)
{
    const Vector log_a = safe_log(a);
    TransportPlan plan;
    plan.matrix = Matrix::Zero(cost.rows(), cost.cols());
    Vector logits(a.size());
    for (Eigen::Index j = 0; j < cost.cols(); ++j) {
        logits = log_a.array() + (phi - cost.col(j)).array() / epsilon;
        const double lse = log_sum_exp(logits);
        plan.matrix.col(j) = b[j] * (logits.array() - lse).exp();
    }
    plan.row_marginal = a;
    plan.col_marginal = b;
    return plan;
}

void SemiDualConfig::validate() const
{
    if (!(epsilon > 0.0))
        throw DomainError("semi-dual epsilon must be positive");
    if (!(learning_rate > 0.0))
        throw DomainError("semi-dual learning rate must be positive");
    if (ascent_steps < 1)
        throw DomainError("semi-dual needs at least one ascent step");
}

Vector Potential::evaluate(const Matrix& points) const
{
    if (spec.kind == PotentialKind::table) {
        if (points.rows() != table.size())
            throw DimensionError("table potential evaluated on a different support");
        return table;
    }
    return net.predict(Matrix(points.transpose())).row(0).transpose();
}

Potential make_potential(const PotentialSpec& spec, Eigen::Index source_size, int input_dim,
                         std::uint64_t seed)
{
    Potential p;
    p.spec = spec;
    if (spec.kind == PotentialKind::table) {
        p.table = Vector::Zero(source_size);
        return p;
    }
    std::vector<LayerSpec> layers;
    for (const int width : spec.hidden)
        layers.push_back({width, Activation::relu});
    layers.push_back({1, Activation::linear});
    p.net = DenseNet(input_dim, layers, seed);
    return p;
}

SemiDualResult semidual_ascent(Potential potential, AdamState& adam, const Matrix& source_points,
                               const Vector& a, const Vector& b, const Matrix& cost,
                               const SemiDualConfig& cfg)
{
    cfg.validate();
    SemiDualResult result;
    result.trace.reserve(static_cast<std::size_t>(cfg.ascent_steps));
    const bool table = potential.spec.kind == PotentialKind::table;
    const Matrix inputs = table ? Matrix() : Matrix(source_points.transpose());

    for (int step = 0; step < cfg.ascent_steps; ++step) {
        if (table) {
            const SemiDualValue v = semidual_objective(potential.table, cost, cfg.epsilon, a, b);
            if (!std::isfinite(v.objective))
                throw NumericalFailure("semi-dual objective is not finite", static_cast<std::size_t>(step));
            result.trace.push_back(v.objective);
            adam_step(adam, potential.table, Vector(-v.grad_phi));
        } else {
            const ForwardCache cache = potential.net.forward(inputs);
            const Vector phi = cache.output().row(0).transpose();
            const SemiDualValue v = semidual_objective(phi, cost, cfg.epsilon, a, b);
            if (!std::isfinite(v.objective))
                throw NumericalFailure("semi-dual objective is not finite", static_cast<std::size_t>(step));
            result.trace.push_back(v.objective);
            const NetGradient g = potential.net.backward(cache, Matrix(-v.grad_phi.transpose()));
            adam_step(adam, potential.net, g.params);
        }
    }

    const Vector phi = potential.evaluate(source_points);
    result.estimate = semidual_objective(phi, cost, cfg.epsilon, a, b).objective;
    if (!std::isfinite(result.estimate))
        throw NumericalFailure("semi-dual objective is not finite",
                               static_cast<std::size_t>(cfg.ascent_steps));
    result.transport_cost = semidual_plan(phi, cost, cfg.epsilon, a, b).cost(cost);
    result.potential = std::move(potential);
    return result;
}

SemiDualResult semidual_estimate(const DiscreteMeasure& source, const DiscreteMeasure& target,
                                 const CostFn& cost, const SemiDualConfig& cfg)
{
    cfg.validate();
    source.validate();
    target.validate();
    const Matrix c = cost_matrix(source, target, cost);
    Potential potential = make_potential(cfg.potential, source.size(),
                                         static_cast<int>(source.points.cols()), cfg.seed);
    const Eigen::Index params = cfg.potential.kind == PotentialKind::table
                                    ? source.size()
                                    : potential.net.parameter_count();
    AdamState adam(params, AdamOptions{cfg.learning_rate, 0.5, 0.999, 1e-8});
    return semidual_ascent(std::move(potential), adam, source.points, source.weights, target.weights, c,
                           cfg);
}

}  // namespace otshift
