#include "otshift/errors.hpp"
#include "otshift/ot.hpp"
#include "transport_vertices.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace otshift;

namespace {

Vector vec(std::initializer_list<double> v)
{
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v)
        out[i++] = x;
    return out;
}

Matrix canonical_cost()
{
    Matrix c(2, 2);
    c << 0, 2, 2, 0;
    return c;
}

struct Instance {
    std::vector<long> a_units, b_units;
    Vector a, b;
    Matrix cost;
};

Instance random_instance(std::mt19937_64& rng, int m, int n, long max_unit)
{
    std::uniform_int_distribution<long> u(1, max_unit);
    std::uniform_real_distribution<double> c(0.0, 1.0);
    Instance in;
    in.a_units.resize(m);
    in.b_units.resize(n);
    long sa = 0, sb = 0;
    for (auto& v : in.a_units) sa += (v = u(rng));
    for (auto& v : in.b_units) sb += (v = u(rng));
    while (sa != sb) {
        if (sa < sb) { ++in.a_units[rng() % m]; ++sa; }
        else { ++in.b_units[rng() % n]; ++sb; }
    }
    in.a.resize(m);
    in.b.resize(n);
    for (int i = 0; i < m; ++i) in.a[i] = static_cast<double>(in.a_units[i]) / sa;
    for (int j = 0; j < n; ++j) in.b[j] = static_cast<double>(in.b_units[j]) / sb;
    in.cost.resize(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            in.cost(i, j) = c(rng);
    return in;
}

double oracle_cost(const Instance& in)
{
    std::vector<std::vector<double>> c(in.cost.rows(), std::vector<double>(in.cost.cols()));
    for (Eigen::Index i = 0; i < in.cost.rows(); ++i)
        for (Eigen::Index j = 0; j < in.cost.cols(); ++j)
            c[i][j] = in.cost(i, j);
    return oracle::VertexSearch(in.a_units, in.b_units, c).min_cost();
}

}  // namespace

TEST_CASE("vertex oracle on hand instances")
{
    // Two vertices: [[.5,0],[.3,.2]] cost 1.0 vs [[.3,.2],[.5,0]] cost 1.4 -> 0.6.
    CHECK(oracle::VertexSearch({5, 5}, {8, 2}, {{0, 2}, {2, 0}}).min_cost() == doctest::Approx(0.6));
    CHECK(oracle::VertexSearch({1}, {1}, {{3.5}}).min_cost() == doctest::Approx(3.5));
}

TEST_CASE("exact_ot examples")
{
    const OtResult single = exact_ot(vec({1.0}), vec({1.0}), Matrix::Zero(1, 1));
    CHECK(single.cost == 0.0);
    CHECK(single.plan.matrix(0, 0) == doctest::Approx(1.0));

    const OtResult r = exact_ot(vec({0.5, 0.5}), vec({0.8, 0.2}), canonical_cost());
    CHECK(r.cost == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(r.plan.max_marginal_violation() < 1e-12);

    CHECK_THROWS_AS(exact_ot(vec({0.5, 0.5}), vec({0.5, 0.6}), canonical_cost()), MassMismatch);
    CHECK_THROWS_AS(exact_ot(vec({0.5, 0.5}), vec({1.0}), canonical_cost()), DimensionError);
}

TEST_CASE("exact_ot matches vertex enumeration on random 4x4 instances")
{
    std::mt19937_64 rng(404);
    for (int t = 0; t < 50; ++t) {
        const Instance in = random_instance(rng, 4, 4, 9);
        const OtResult r = exact_ot(in.a, in.b, in.cost);
        CHECK(std::abs(r.cost - oracle_cost(in)) < 1e-9);
        CHECK(r.plan.max_marginal_violation() < 1e-9);
        CHECK(r.plan.matrix.minCoeff() >= -1e-12);
        CHECK(std::abs(r.plan.cost(in.cost) - r.cost) < 1e-12);
    }
}

TEST_CASE("exact_ot handles degenerate and rectangular instances")
{
    std::mt19937_64 rng(9);
    for (int t = 0; t < 200; ++t) {
        const int m = 1 + static_cast<int>(rng() % 8), n = 1 + static_cast<int>(rng() % 8);
        Instance in = random_instance(rng, m, n, 2);  // many equal partial sums
        const OtResult r = exact_ot(in.a, in.b, in.cost);
        CHECK(r.plan.max_marginal_violation() < 1e-9);
        // Duality check: no negative reduced cost cycle means any permutation of mass cannot help.
        const OtResult swapped = exact_ot(in.b, in.a, Matrix(in.cost.transpose()));
        CHECK(std::abs(swapped.cost - r.cost) < 1e-9);
    }
}

TEST_CASE("sinkhorn examples and properties")
{
    const Vector a = vec({0.5, 0.5}), b = vec({0.8, 0.2});
    SinkhornConfig cfg;
    cfg.epsilon = 0.01;
    const SinkhornResult small = sinkhorn(a, b, canonical_cost(), cfg);
    CHECK(small.converged);
    CHECK(std::abs(small.transport_cost - 0.6) < 0.02);

    // Plan at eps = 100 from an independent scaling-form Sinkhorn run.
    cfg.epsilon = 100.0;
    const SinkhornResult big = sinkhorn(a, b, canonical_cost(), cfg);
    const Matrix frozen = (Matrix(2, 2) << 0.40159989, 0.09840011, 0.39840011, 0.10159989).finished();
    CHECK((big.plan.matrix - frozen).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(big.transport_cost == doctest::Approx(0.9936004437082118).epsilon(1e-9));
    const Matrix product = a * b.transpose();
    CHECK(std::abs(big.transport_cost - product.cwiseProduct(canonical_cost()).sum()) < 1e-2);
    cfg.epsilon = 1e4;
    const SinkhornResult huge = sinkhorn(a, b, canonical_cost(), cfg);
    CHECK((huge.plan.matrix - product).cwiseAbs().maxCoeff() < 1e-3);

    cfg.epsilon = 0.1;
    const SinkhornResult one = sinkhorn(vec({1.0}), vec({1.0}), Matrix::Constant(1, 1, 0.7), cfg);
    CHECK(one.entropic_cost - 0.7 == doctest::Approx(0.0));

    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(sinkhorn(a, b, canonical_cost(), cfg), DomainError);
}

TEST_CASE("sinkhorn: Gibbs structure, monotone in epsilon, above exact cost")
{
    std::mt19937_64 rng(77);
    for (int t = 0; t < 30; ++t) {
        const Instance in = random_instance(rng, 2 + t % 5, 2 + (t * 3) % 6, 20);
        const double exact = exact_ot(in.a, in.b, in.cost).cost;
        double previous = -1.0;
        for (const double eps : {0.05, 0.1, 1.0, 10.0}) {
            SinkhornConfig cfg;
            cfg.epsilon = eps;
            cfg.max_iters = 200000;
            const SinkhornResult r = sinkhorn(in.a, in.b, in.cost, cfg);
            CHECK(r.converged);
            CHECK(r.plan.max_marginal_violation() < 1e-8);
            CHECK(r.entropic_cost >= exact - 1e-9);
            CHECK(r.entropic_cost >= previous - 1e-12);
            previous = r.entropic_cost;
            // P_ij = a_i b_j exp((f_i + g_j - C_ij) / eps)
            for (Eigen::Index i = 0; i < in.cost.rows(); ++i)
                for (Eigen::Index j = 0; j < in.cost.cols(); ++j) {
                    const double gibbs = in.a[i] * in.b[j] *
                                         std::exp((r.source_potential[i] + r.target_potential[j] - in.cost(i, j)) / eps);
                    CHECK(r.plan.matrix(i, j) == doctest::Approx(gibbs).epsilon(1e-6));
                }
        }
    }
}

TEST_CASE("entropic c-transform")
{
    CHECK(entropic_c_transform(vec({0, 0}), vec({0, 0}), 0.1, vec({0.5, 0.5})) == doctest::Approx(0.0));
    CHECK(entropic_c_transform(vec({0, 1}), vec({0.5, 0.5}), 0.1, vec({0.5, 0.5})) ==
          doctest::Approx(-0.4306898218339272).epsilon(1e-12));
    const Vector phi = vec({0.3, -1.2, 2.0}), d = vec({0.1, 0.4, 0.9}), w = vec({0.2, 0.5, 0.3});
    const double base = entropic_c_transform(phi, d, 0.2, w);
    const Vector shifted = (phi.array() + 3.0).matrix();
    CHECK(entropic_c_transform(shifted, d, 0.2, w) == doctest::Approx(base - 3.0).epsilon(1e-12));
}

TEST_CASE("semi-dual objective: shift invariance, gradient, weak duality")
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        const Instance in = random_instance(rng, 2 + t % 6, 2 + (t * 5) % 7, 9);
        Vector phi(in.a.size());
        for (auto& v : phi) v = z(rng);
        const double eps = 0.1;
        const SemiDualValue v = semidual_objective(phi, in.cost, eps, in.a, in.b, true);
        const Vector moved = (phi.array() + 10.0).matrix();
        CHECK(std::abs(semidual_objective(moved, in.cost, eps, in.a, in.b).objective - v.objective) < 1e-12);

        SinkhornConfig cfg;
        cfg.epsilon = eps;
        CHECK(v.objective <= sinkhorn(in.a, in.b, in.cost, cfg).entropic_cost + 1e-9);

        const double h = 1e-6;
        for (Eigen::Index i = 0; i < phi.size(); ++i) {
            Vector p = phi, m = phi;
            p[i] += h;
            m[i] -= h;
            const double fd = (semidual_objective(p, in.cost, eps, in.a, in.b).objective -
                               semidual_objective(m, in.cost, eps, in.a, in.b).objective) / (2 * h);
            CHECK(v.grad_phi[i] == doctest::Approx(fd).epsilon(1e-6));
        }
        // d objective / d C_ij equals the implied plan entry.
        const TransportPlan plan = semidual_plan(phi, in.cost, eps, in.a, in.b);
        CHECK((v.grad_cost - plan.matrix).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((plan.matrix.colwise().sum().transpose() - in.b).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("semidual_estimate converges to the entropic primal")
{
    const Matrix pts = (Matrix(2, 2) << 1, 0, 0, 1).finished();
    const DiscreteMeasure a{pts, vec({0.5, 0.5})};
    const DiscreteMeasure b{pts, vec({0.8, 0.2})};
    const CostFn cost = make_cost(GroundMetricSpec::lp(1));
    SemiDualConfig cfg;
    cfg.epsilon = 0.1;
    cfg.ascent_steps = 5000;
    const SemiDualResult r = semidual_estimate(a, b, cost, cfg);
    SinkhornConfig sc;
    sc.epsilon = 0.1;
    const SinkhornResult s = sinkhorn(a, b, cost, sc);
    CHECK(std::abs(r.estimate - s.entropic_cost) < 1e-2);
    CHECK(r.trace.back() <= s.entropic_cost + 1e-9);

    // One point on each side at zero cost: the objective is phi - phi.
    const DiscreteMeasure p{Matrix::Zero(1, 2), vec({1.0})};
    for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        SemiDualConfig c2 = cfg;
        c2.ascent_steps = 10;
        c2.seed = seed;
        c2.potential = PotentialSpec::net({4});
        CHECK(std::abs(semidual_estimate(p, p, cost, c2).estimate) < 1e-12);
    }
}
