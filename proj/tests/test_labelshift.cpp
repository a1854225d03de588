#include "otshift/errors.hpp"
#include "otshift/labelshift.hpp"
#include "otshift/seed.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace otshift;

namespace {

PushforwardSample rows(std::initializer_list<std::initializer_list<double>> r)
{
    PushforwardSample s;
    s.f_values.resize(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& row : r) {
        Eigen::Index j = 0;
        for (double v : row)
            s.f_values(i, j++) = v;
        ++i;
    }
    return s;
}

std::vector<int> labels_with_counts(std::initializer_list<int> counts)
{
    std::vector<int> out;
    int y = 0;
    for (int c : counts) {
        out.insert(out.end(), static_cast<std::size_t>(c), y);
        ++y;
    }
    return out;
}

}  // namespace

TEST_CASE("ls_exact examples")
{
    const PushforwardSample a = rows({{0.2, 0.8}, {0.6, 0.4}});
    CHECK(ls_exact(a, a, GroundMetricSpec::lp(1)) == doctest::Approx(0.0));
    CHECK(ls_exact(a, a, GroundMetricSpec::kl()) == doctest::Approx(0.0));

    const auto fs = one_hot_pushforward(labels_with_counts({5, 5}), 2);
    const auto ft = one_hot_pushforward(labels_with_counts({8, 2}), 2);
    CHECK(ls_exact(fs, ft, GroundMetricSpec::lp(1)) == doctest::Approx(0.6).epsilon(1e-12));

    const auto ps = one_hot_pushforward(labels_with_counts({2, 2, 2}), 3);
    const auto pt = one_hot_pushforward(labels_with_counts({3, 3}), 3);
    CHECK(ls_exact(ps, pt, GroundMetricSpec::lp(1)) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(ls_exact(a, rows({{1, 0, 0}}), GroundMetricSpec::lp(1)), DimensionError);
    CHECK_THROWS_AS(rows({{0.5, 0.6}}).validate(), DomainError);
}

TEST_CASE("marginal and vertex bounds")
{
    const ProbVector p{0.5, 0.5}, q{0.8, 0.2};
    CHECK(marginal_lower_bound(p, p, 1) == 0.0);
    CHECK(marginal_lower_bound(p, q, 1) == doctest::Approx(0.6));
    CHECK(vertex_label_shift(p, p, 1) == doctest::Approx(0.0));
    CHECK(vertex_label_shift(p, q, 1) == doctest::Approx(0.6));
    CHECK(vertex_label_shift(p, q, 2) == doctest::Approx(0.6));
}

TEST_CASE("label-set mismatch bound examples")
{
    const auto same = one_hot_pushforward(labels_with_counts({3, 1, 2}), 3);
    CHECK(setting_lower_bound(same, same, {0, 1, 2}, {0, 1, 2}, 1) == doctest::Approx(0.0));

    const auto ps = one_hot_pushforward(labels_with_counts({2, 2, 2}), 3);
    const auto pt = one_hot_pushforward(labels_with_counts({3, 3}), 3);
    const double bound = setting_lower_bound(ps, pt, {0, 1, 2}, {0, 1}, 1);
    CHECK(bound == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(ls_exact(ps, pt, GroundMetricSpec::lp(1)) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    // Shared class 0, source-private 1, target-private 2, half the mass each.
    const auto us = one_hot_pushforward({0, 1}, 3);
    const auto ut = one_hot_pushforward({0, 2}, 3);
    const double ub = setting_lower_bound(us, ut, {0, 1}, {0, 2}, 1);
    CHECK(ub == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ub <= ls_exact(us, ut, GroundMetricSpec::lp(1)) + 1e-12);
}

TEST_CASE("one-hot label shift dominates the marginal gap")
{
    std::mt19937_64 rng(8);
    for (int t = 0; t < 100; ++t) {
        const int m = 2 + static_cast<int>(rng() % 5);
        std::vector<int> ys(1 + rng() % 30), yt(1 + rng() % 30);
        for (auto& y : ys) y = static_cast<int>(rng() % m);
        for (auto& y : yt) y = static_cast<int>(rng() % m);
        const auto fs = one_hot_pushforward(ys, m), ft = one_hot_pushforward(yt, m);
        const ProbVector ps = empirical_marginal(ys, m), pt = empirical_marginal(yt, m);
        for (const double p : {1.0, 2.0}) {
            CHECK(ls_exact(fs, ft, GroundMetricSpec::lp(p)) >= marginal_lower_bound(ps, pt, p) - 1e-7);
            // On vertices the label shift is exactly the vertex transport.
            CHECK(ls_exact(fs, ft, GroundMetricSpec::lp(p)) == doctest::Approx(vertex_label_shift(ps, pt, p)));
        }
    }
}

TEST_CASE("anti-causal upper bound")
{
    DaPairSpec spec;
    spec.classes = 2;
    spec.separation = 20.0;
    spec.anticausal = true;
    spec.source_marginal = {0.5, 0.5};
    spec.target_marginal = {0.8, 0.2};
    const DaPair pair = make_da_pair(spec);
    const AnticausalBound b = anticausal_upper_bound(pair.source, pair.target, 5000, 1.0, 4);
    CHECK(b.marginal_term == doctest::Approx(2 * 0.6));
    CHECK(b.value == doctest::Approx(1.2).epsilon(0.02));
    const auto s = sample_labeled(pair.source, 400, 1), t = sample_labeled(pair.target, 400, 2);
    const double ls = ls_exact(pushforward(pair.source, s.points), pushforward(pair.target, t.points),
                               GroundMetricSpec::lp(1));
    CHECK(ls == doctest::Approx(0.6).epsilon(0.1));
    CHECK(ls <= b.value);

    spec.target_marginal = spec.source_marginal;
    const DaPair same = make_da_pair(spec);
    CHECK(anticausal_upper_bound(same.source, same.target, 2000, 1.0, 4).value == doctest::Approx(0.0));

    spec.anticausal = false;
    spec.target_marginal = {0.8, 0.2};
    const DaPair unrelated = make_da_pair(spec);
    CHECK_THROWS_AS(anticausal_upper_bound(unrelated.source, unrelated.target, 100, 1.0, 4), PreconditionError);

    DaPairSpec single;
    single.classes = 1;
    single.anticausal = true;
    const DaPair one = make_da_pair(single);
    CHECK(anticausal_upper_bound(one.source, one.target, 100, 1.0, 4).value == 0.0);
}

TEST_CASE("streaming estimate")
{
    CHECK(ls_entropic_stream({}, {}, GroundMetricSpec::lp(1), StreamConfig{}).empty());

    DaPairSpec spec;
    spec.classes = 3;
    spec.source_marginal = {0.6, 0.25, 0.15};
    spec.target_marginal = {0.2, 0.35, 0.45};
    spec.anticausal = true;
    spec.seed = 2;
    const DaPair pair = make_da_pair(spec);
    const auto s = sample_labeled(pair.source, 120, derive_seed(2, 10));
    const auto t = sample_labeled(pair.target, 120, derive_seed(2, 11));
    const auto fs = pushforward(pair.source, s.points), ft = pushforward(pair.target, t.points);

    // Whole data as one batch matches the stand-alone estimator with the same potential.
    StreamConfig cfg;
    cfg.epsilon = 0.1;
    cfg.potential = PotentialSpec::table();
    cfg.steps_per_batch = 300;
    cfg.learning_rate = 0.05;
    const auto series = ls_entropic_stream({fs}, {ft}, GroundMetricSpec::lp(1), cfg);
    REQUIRE(series.size() == 1);
    SemiDualConfig sd;
    sd.epsilon = 0.1;
    sd.ascent_steps = 300;
    sd.learning_rate = 0.05;
    sd.potential = PotentialSpec::table();
    const SemiDualResult direct = semidual_estimate(DiscreteMeasure::uniform(fs.f_values),
                                                    DiscreteMeasure::uniform(ft.f_values),
                                                    make_cost(GroundMetricSpec::lp(1)), sd);
    CHECK(std::abs(series[0].objective - direct.estimate) < 1e-9);
    CHECK(std::abs(series[0].transport_cost - direct.transport_cost) < 1e-9);

    const auto again = ls_entropic_stream({fs}, {ft}, GroundMetricSpec::lp(1), cfg);
    CHECK(again[0].estimate == series[0].estimate);
}

TEST_CASE("bounds report")
{
    DaPairSpec spec;
    spec.setting = DaSetting::partial;
    spec.classes = 3;
    spec.separation = 10;
    spec.anticausal = true;
    BoundsOptions opts;
    opts.samples_per_side = 100;
    opts.n_mc = 500;
    opts.with_anticausal = true;
    const BoundsReport r = compute_bounds(spec, opts);
    CHECK(r.setting == "partial");
    REQUIRE(r.setting_lb.has_value());
    CHECK(*r.setting_lb <= r.ls_exact + 1e-7);
    CHECK(r.marginal_lb <= r.ls_exact + 1e-7);
    REQUIRE(r.anticausal_ub.has_value());
    CHECK(r.ls_exact <= *r.anticausal_ub + 0.05);
    const std::string row = to_csv_row(r);
    const std::string header = bounds_csv_header();
    CHECK(std::count(row.begin(), row.end(), ',') == std::count(header.begin(), header.end(), ','));
    CHECK(to_json(r)["setting"] == "partial");

    spec.setting = DaSetting::closed;
    CHECK_FALSE(compute_bounds(spec, opts).setting_lb.has_value());
}
