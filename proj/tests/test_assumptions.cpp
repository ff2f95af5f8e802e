#include "mixup/assumptions.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

using mixup::MixingDistribution;
using mixup::Vector;
namespace ds = mixup::datasets;
namespace as = mixup::assumptions;

namespace {
Vector vec2(double a, double b) { return Eigen::Vector2d(a, b); }

mixup::LabeledDataset random_dataset(std::mt19937_64& rng, int m, int k, int dim, bool grid) {
    std::uniform_int_distribution<int> gi(-2, 2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    mixup::PointMatrix p(m, dim);
    for (int r = 0; r < m; ++r) {
        do {
            for (int c = 0; c < dim; ++c) p(r, c) = grid ? gi(rng) : u(rng);
        } while ([&] {
            for (int q = 0; q < r; ++q)
                if (p.row(q) == p.row(r)) return true;
            return false;
        }());
    }
    std::vector<int> labels(static_cast<std::size_t>(m));
    for (int r = 0; r < m; ++r) labels[static_cast<std::size_t>(r)] = r % k + 1;
    return {p, labels, k, "random"};
}
} // namespace

TEST(Assumption1, AlternatingLineViolates) {
    const auto v = as::check_assumption1(ds::alternating_line(3, 2), 1e-9);
    ASSERT_FALSE(v.empty());
    const bool found = std::any_of(v.begin(), v.end(), [](const auto& c) {
        return c.x_index == 1 && ((c.u_index == 2 && c.v_index == 0) || (c.u_index == 0 && c.v_index == 2));
    });
    EXPECT_TRUE(found);
    for (const auto& c : v) {
        EXPECT_GT(c.lambda, 0.0);
        EXPECT_LT(c.lambda, 1.0);
        EXPECT_LE(c.residual, 1e-9);
    }
}

TEST(Assumption1, CrossAndMoonsHold) {
    EXPECT_TRUE(as::check_assumption1(ds::four_point_cross(), 1e-9).empty());
    EXPECT_TRUE(as::check_assumption1(ds::two_moons(100, 0.5, 0.1, 5), 1e-9).empty());
}

TEST(Assumption1, MatchesDenseScanOnLatticeData) {
    // Lattice points make exact collinearity common.
    std::mt19937_64 rng(12);
    for (int t = 0; t < 30; ++t) {
        const auto d = random_dataset(rng, 6, 2 + t % 2, 2, true);
        const auto v = as::check_assumption1(d, 1e-9);
        for (std::size_t x = 0; x < d.size(); ++x) {
            bool expect = false;
            for (std::size_t vi = 0; vi < d.size(); ++vi) {
                if (d.label(vi) == d.label(x)) continue;
                for (std::size_t ui = 0; ui < d.size(); ++ui) {
                    if (ui == x || ui == vi) continue;
                    // Lattice coordinates in [-2, 2]: any collinear hit lies on a 1/4-step lambda.
                    expect = expect || oracles::collinear_by_scan(d.point(x).transpose(), d.point(ui).transpose(),
                                                                  d.point(vi).transpose(), 1e-9, 240);
                }
            }
            const bool got = std::any_of(v.begin(), v.end(), [&](const auto& c) { return c.x_index == x; });
            EXPECT_EQ(got, expect) << "trial " << t << " point " << x;
        }
    }
}

TEST(EstimateEpsilon, ThreeClassLineIsNearZero) {
    const auto d = ds::alternating_line(9, 3);
    const auto e = as::estimate_epsilon(d, MixingDistribution::uniform(), 10000, d, 1);
    EXPECT_TRUE(e.warning.empty());
    EXPECT_LT(e.min_distance, 0.01);
    EXPECT_GT(e.eligible_samples, 0u);
}

TEST(EstimateEpsilon, NoEligibleReferenceGivesInfinity) {
    mixup::PointMatrix p(3, 1);
    p << 0.0, 1.0, 2.0;
    const mixup::LabeledDataset one_class(p, {1, 1, 1}, 1, "one class");
    const auto e = as::estimate_epsilon(one_class, MixingDistribution::uniform(), 100, one_class, 1);
    EXPECT_TRUE(std::isinf(e.min_distance));
    EXPECT_FALSE(e.warning.empty());
    EXPECT_EQ(e.eligible_samples, 0u);
}

TEST(EstimateEpsilon, TwoClassesUseSameClassMixtures) {
    // Cross-class mixtures have no eligible reference; same-class ones do.
    const auto d = ds::four_point_cross();
    const auto e = as::estimate_epsilon(d, MixingDistribution::uniform(), 2000, d, 1);
    EXPECT_TRUE(e.warning.empty());
    EXPECT_GT(e.eligible_samples, 0u);
    EXPECT_LT(e.eligible_samples, 2000u);
    EXPECT_GE(e.min_distance, 1.0 - 1e-12);
}

TEST(EstimateEpsilon, NestedSamplesAreMonotone) {
    std::mt19937_64 rng(3);
    const auto d = random_dataset(rng, 12, 4, 3, false);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t n : {1u, 10u, 100u, 1000u, 5000u}) {
        const double e = as::estimate_epsilon(d, MixingDistribution::beta(2.0), n, d, 9).min_distance;
        EXPECT_LE(e, prev) << n;
        prev = e;
    }
}

TEST(EstimateEpsilon, MatchesBruteForceOnSameDraws) {
    // Recompute each sample's distance directly from the same random stream.
    std::mt19937_64 gen(4);
    const auto d = random_dataset(gen, 10, 3, 2, false);
    const auto dist = MixingDistribution::beta(0.8);
    const std::size_t n = 700;
    mixup::Rng rng(17);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t s = mixup::uniform_index(rng, d.size()), t = mixup::uniform_index(rng, d.size());
        const double lam = dist.sample(rng);
        const Eigen::RowVectorXd z = lam * d.point(s) + (1.0 - lam) * d.point(t);
        for (std::size_t c = 0; c < d.size(); ++c)
            if (d.label(c) != d.label(s) && d.label(c) != d.label(t)) best = std::min(best, (z - d.point(c)).norm());
    }
    EXPECT_NEAR(as::estimate_epsilon(d, dist, n, d, 17).min_distance, best, 1e-12);
}

TEST(EstimateEpsilon, Errors) {
    const auto d = ds::four_point_cross();
    EXPECT_THROW(as::estimate_epsilon(d, MixingDistribution::uniform(), 0, d, 1), mixup::ContractError);
    EXPECT_THROW(as::estimate_epsilon(d, MixingDistribution::uniform(), 10, ds::alternating_line(3, 2), 1),
                 mixup::ContractError);
}

TEST(Assumption2, CrossExamples) {
    const auto cross = ds::four_point_cross();
    const auto u = MixingDistribution::uniform();
    const auto good = as::check_assumption2(cross, u, vec2(0, 0.9), 1, 0.05, 0.4, 1e-9);
    EXPECT_TRUE(good.holds);
    EXPECT_TRUE(good.in_xmix);

    const auto bad = as::check_assumption2(cross, u, vec2(0, 0), 1, 0.05, 0.4, 1e-9);
    EXPECT_FALSE(bad.holds);
    const bool class2_pair = std::any_of(bad.violations.begin(), bad.violations.end(),
                                         [](const auto& h) { return h.class_p == 2 && h.class_q == 2; });
    EXPECT_TRUE(class2_pair);

    const auto far = as::check_assumption2(cross, u, vec2(3, 3), 1, 0.05, 0.4, 1e-9);
    EXPECT_TRUE(far.holds);
    EXPECT_FALSE(far.in_xmix);

    EXPECT_THROW(as::check_assumption2(cross, u, vec2(0, 0), 1, 0.05, 0.5, 1e-9), mixup::ContractError);
    EXPECT_THROW(as::check_assumption2(cross, u, vec2(0, 0), 1, 0.0, 0.4, 1e-9), mixup::ContractError);
}

TEST(Assumption2, HoldsAtDataPointsOfCross) {
    const auto cross = ds::four_point_cross();
    for (std::size_t a = 0; a < cross.size(); ++a) {
        const auto rep = as::check_assumption2(cross, MixingDistribution::uniform(), cross.point(a).transpose(),
                                               cross.label(a), 0.05, 0.25, 1e-9);
        EXPECT_TRUE(rep.holds) << a;
    }
}

TEST(Assumption2, ImpliesLimitClassification) {
    // Probes on same-class segments and near data points, where the margin condition can hold.
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(0.0, 1.0), jitter(-0.02, 0.02);
    const auto d = ds::two_moons(8, 0.5, 0.05, 3);
    const auto dist = MixingDistribution::beta(2.0);
    int checked = 0;
    for (int t = 0; t < 400; ++t) {
        const int cls = 1 + t % 2;
        const auto& members = d.class_members(cls);
        const std::size_t a = members[mixup::uniform_index(rng, members.size())];
        const std::size_t b = members[mixup::uniform_index(rng, members.size())];
        const double lam = t % 4 < 2 ? 1.0 : u(rng);
        Vector x = (lam * d.point(a) + (1.0 - lam) * d.point(b)).transpose();
        if (t % 8 == 0) x += vec2(jitter(rng), jitter(rng));
        const auto rep = as::check_assumption2(d, dist, x, cls, 0.01, 0.3, 1e-9);
        if (!rep.holds || !rep.in_xmix) continue;
        const auto p = mixup::oracle::h_limit(d, dist, x);
        if (!p) continue;
        EXPECT_EQ(p->predicted_class(), cls) << t;
        EXPECT_GE((*p)[static_cast<std::size_t>(cls - 1)], 0.5) << t;
        ++checked;
    }
    EXPECT_GT(checked, 50);
}

TEST(MarginRadius, Examples) {
    EXPECT_NEAR(as::margin_radius(ds::four_point_cross(), 1), std::sqrt(2.0) / 2.0, 1e-15);
    EXPECT_NEAR(as::margin_radius(ds::alternating_line(3, 2), 2), 0.5, 1e-15);
    const auto moons = ds::two_moons(200, 0.5, 0.0, 1);
    EXPECT_GE(as::margin_radius(moons, 1), 0.25 - 0.02);
    EXPECT_GE(as::margin_radius(moons, 2), 0.25 - 0.02);
    mixup::PointMatrix p(1, 1);
    p << 0.0;
    EXPECT_THROW(as::margin_radius(mixup::LabeledDataset(p, {1}, 1, "one"), 1), mixup::ContractError);
}
