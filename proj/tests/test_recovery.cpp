#include "mixup/recovery.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <numeric>

namespace rc = mixup::recovery;

namespace {
std::vector<std::size_t> identity(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    return p;
}

Eigen::MatrixXd to_double(const rc::IntMatrix& M) {
    Eigen::MatrixXd D(static_cast<Eigen::Index>(M.size()), static_cast<Eigen::Index>(M.front().size()));
    for (std::size_t r = 0; r < M.size(); ++r)
        for (std::size_t c = 0; c < M[r].size(); ++c)
            D(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = static_cast<double>(M[r][c]);
    return D;
}

mixup::PointMatrix gaussian_points(std::mt19937_64& rng, int m, int d) {
    std::normal_distribution<double> g;
    mixup::PointMatrix p(m, d);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < d; ++c) p(r, c) = g(rng);
    return p;
}
} // namespace

TEST(MixupMatrix, SmallCases) {
    const auto A = rc::mixup_matrix(3);
    Eigen::MatrixXd expect(3, 3);
    expect << 1, 1, 0, 1, 0, 1, 0, 1, 1;
    EXPECT_EQ(A.dense(), expect);
    EXPECT_EQ(rc::mixup_matrix(6).rows(), 15u);
    EXPECT_THROW(rc::mixup_matrix(1), mixup::ContractError);
}

TEST(MixupMatrix, StructureAndRank) {
    for (std::size_t m = 3; m <= 10; ++m) {
        const auto A = rc::mixup_matrix(m);
        const auto D = A.dense();
        for (Eigen::Index r = 0; r < D.rows(); ++r) EXPECT_EQ(D.row(r).sum(), 2.0);
        std::set<std::pair<std::size_t, std::size_t>> uniq(A.pairs().begin(), A.pairs().end());
        EXPECT_EQ(uniq.size(), A.rows());
        for (std::size_t r = 0; r < A.rows(); ++r) EXPECT_EQ(A.row_of(A.pairs()[r].first, A.pairs()[r].second), r);
        EXPECT_EQ(rc::exact_rank(rc::concat_with_permuted(A, identity(A.rows()))), m);
        EXPECT_EQ(oracles::float_rank(D), static_cast<Eigen::Index>(m));
    }
    EXPECT_EQ(rc::exact_rank(rc::concat_with_permuted(rc::mixup_matrix(4), identity(6))), 4u);
}

TEST(ExactRank, AgreesWithFloatingPointOnRandomSmallMatrices) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> bit(0, 1), dim(1, 9);
    for (int t = 0; t < 300; ++t) {
        const int r = dim(rng), c = dim(rng);
        rc::IntMatrix M(static_cast<std::size_t>(r), std::vector<std::int64_t>(static_cast<std::size_t>(c)));
        for (auto& row : M)
            for (auto& v : row) v = bit(rng);
        EXPECT_EQ(static_cast<Eigen::Index>(rc::exact_rank(M)), oracles::float_rank(to_double(M))) << t;
    }
}

TEST(RankConcat, Examples) {
    const std::size_t rows = 21;
    EXPECT_EQ(rc::rank_concat(7, identity(rows)), 7u);
    EXPECT_TRUE(rc::is_column_permutation(7, identity(rows)));

    const std::vector<std::size_t> sigma{3, 0, 6, 1, 5, 2, 4};
    const auto relabel = rc::row_permutation_from_points(7, sigma);
    EXPECT_EQ(rc::rank_concat(7, relabel), 7u);
    EXPECT_TRUE(rc::is_column_permutation(7, relabel));

    auto swap01 = identity(rows);
    std::swap(swap01[0], swap01[1]);
    EXPECT_GE(rc::rank_concat(7, swap01), 8u);
    EXPECT_FALSE(rc::is_column_permutation(7, swap01));

    EXPECT_THROW(rc::rank_concat(7, identity(20)), mixup::ContractError);
    auto bad = identity(rows);
    bad[3] = 4;
    EXPECT_THROW(rc::rank_concat(7, bad), mixup::ContractError);
}

TEST(RankConcat, ThreePointTranspositionNeedNotRaiseRank) {
    // Rows (1,2) and (1,3) swapped is the relabelling 2 <-> 3, a column permutation.
    const std::vector<std::size_t> perm{1, 0, 2};
    EXPECT_EQ(rc::rank_concat(3, perm), 3u);
    EXPECT_TRUE(rc::is_column_permutation(3, perm));
}

TEST(RankConcat, EveryPointRelabellingIsAColumnPermutation) {
    std::vector<std::size_t> sigma = identity(5);
    do {
        const auto p = rc::row_permutation_from_points(5, sigma);
        EXPECT_TRUE(rc::is_column_permutation(5, p));
        EXPECT_EQ(rc::rank_concat(5, p), 5u);
    } while (std::next_permutation(sigma.begin(), sigma.end()));
}

TEST(RankTrial, RandomPermutationsRaiseRank) {
    for (std::size_t m : {7u, 8u}) {
        const auto rep = rc::permutation_rank_trial(m, 200, 100 + m);
        EXPECT_EQ(rep.trials, 200u);
        ASSERT_TRUE(rep.min_rank_non_column);
        EXPECT_GE(*rep.min_rank_non_column, m + 1);
        if (rep.max_rank_column) EXPECT_EQ(*rep.max_rank_column, m);
    }
}

TEST(RankTrial, Deterministic) {
    const auto a = rc::permutation_rank_trial(7, 20, 5), b = rc::permutation_rank_trial(7, 20, 5);
    EXPECT_EQ(a.min_rank_non_column, b.min_rank_non_column);
    EXPECT_EQ(a.column_perm_count, b.column_perm_count);
}

TEST(RecoverLabeled, ThreePointExample) {
    mixup::PointMatrix pts(3, 1);
    pts << 0, 2, 4;
    const auto mids = rc::form_midpoints(pts);
    ASSERT_EQ(mids.size(), 3u);
    EXPECT_EQ(mids[0].value(0), 1.0);
    EXPECT_EQ(mids[1].value(0), 2.0);
    EXPECT_EQ(mids[2].value(0), 3.0);
    const auto rec = rc::recover_labeled(mids, 3);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(rec.points(i, 0), pts(i, 0), 1e-12);
    EXPECT_LT(rec.residual, 1e-12);
}

TEST(RecoverLabeled, RoundTrip) {
    std::mt19937_64 rng(9);
    for (int m = 3; m <= 10; ++m)
        for (int d : {1, 2, 5})
            for (int t = 0; t < 20; ++t) {
                const auto pts = gaussian_points(rng, m, d);
                const auto rec = rc::recover_labeled(rc::form_midpoints(pts), static_cast<std::size_t>(m));
                EXPECT_LE((rec.points - pts).cwiseAbs().maxCoeff(), 1e-8) << m << " " << d;
            }
}

TEST(RecoverLabeled, OrderOfMidpointsDoesNotMatter) {
    std::mt19937_64 rng(10);
    const auto pts = gaussian_points(rng, 6, 2);
    auto mids = rc::form_midpoints(pts);
    std::shuffle(mids.begin(), mids.end(), rng);
    for (auto& mp : mids)
        if (rng() % 2) std::swap(mp.i, mp.j);
    EXPECT_LE((rc::recover_labeled(mids, 6).points - pts).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(RecoverLabeled, Errors) {
    std::mt19937_64 rng(11);
    const auto pts = gaussian_points(rng, 6, 2);
    auto mids = rc::form_midpoints(pts);
    mids[4].value(1) += 1.0;
    try {
        rc::recover_labeled(mids, 6);
        FAIL();
    } catch (const mixup::InconsistentMidpoints& e) {
        EXPECT_GT(e.residual(), 0.1);
        EXPECT_LT(e.residual(), 3.0);
    }

    auto missing = rc::form_midpoints(pts);
    missing.pop_back();
    EXPECT_THROW(rc::recover_labeled(missing, 6), mixup::NumericError);

    auto dup = rc::form_midpoints(pts);
    dup.back().i = dup.front().i;
    dup.back().j = dup.front().j;
    EXPECT_THROW(rc::recover_labeled(dup, 6), mixup::ContractError);

    mixup::PointMatrix two(2, 1);
    two << 0, 1;
    EXPECT_THROW(rc::recover_labeled(rc::form_midpoints(two), 2), mixup::NumericError);
}

TEST(RecoverUnlabeled, ThreePoints) {
    const auto sols = rc::recover_unlabeled_bruteforce({1.0, 2.0, 3.0}, 3);
    ASSERT_FALSE(sols.empty());
    const bool has = std::any_of(sols.begin(), sols.end(), [](const auto& s) {
        return std::abs(s[0]) < 1e-12 && std::abs(s[1] - 2) < 1e-12 && std::abs(s[2] - 4) < 1e-12;
    });
    EXPECT_TRUE(has);
}

TEST(RecoverUnlabeled, GenericSixPointsAreUnique) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> pts(6);
        for (double& x : pts) x = u(rng);
        auto mids = rc::midpoint_multiset(pts);
        std::shuffle(mids.begin(), mids.end(), rng);
        const auto sols = rc::recover_unlabeled_bruteforce(mids, 6);
        ASSERT_EQ(sols.size(), 1u) << t;
        std::sort(pts.begin(), pts.end());
        for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(sols[0][i], pts[i], 1e-9);
    }
}

TEST(RecoverUnlabeled, HomometricSetsGiveTwoSolutions) {
    // {1,4,5,6} and {2,3,4,7} share the pairwise sums {5,6,7,9,10,11}.
    const auto sols = rc::recover_unlabeled_bruteforce(rc::midpoint_multiset({1, 4, 5, 6}), 4);
    ASSERT_EQ(sols.size(), 2u);
    const auto target = rc::midpoint_multiset({1, 4, 5, 6});
    for (const auto& s : sols) {
        const auto again = rc::midpoint_multiset(s);
        ASSERT_EQ(again.size(), target.size());
        for (std::size_t i = 0; i < again.size(); ++i) EXPECT_NEAR(again[i], target[i], 1e-12);
    }
}

TEST(RecoverUnlabeled, SolutionsRegenerateInputOnLatticeData) {
    // Small integer points produce coincidences; every returned set must still be consistent.
    std::mt19937_64 rng(14);
    std::uniform_int_distribution<int> gi(0, 6);
    for (int t = 0; t < 200; ++t) {
        const std::size_t m = 3 + static_cast<std::size_t>(t % 5);
        std::vector<double> pts(m);
        for (double& x : pts) x = gi(rng);
        const auto target = rc::midpoint_multiset(pts);
        const auto sols = rc::recover_unlabeled_bruteforce(target, m);
        ASSERT_FALSE(sols.empty()) << t;
        std::sort(pts.begin(), pts.end());
        bool has_original = false;
        for (const auto& s : sols) {
            const auto again = rc::midpoint_multiset(s);
            for (std::size_t i = 0; i < again.size(); ++i) EXPECT_NEAR(again[i], target[i], 1e-9) << t;
            bool same = true;
            for (std::size_t i = 0; i < m; ++i) same = same && std::abs(s[i] - pts[i]) < 1e-9;
            has_original = has_original || same;
        }
        EXPECT_TRUE(has_original) << t;
    }
}

TEST(RecoverUnlabeled, SizeErrors) {
    EXPECT_THROW(rc::recover_unlabeled_bruteforce(std::vector<double>(28, 0.0), 8), mixup::ContractError);
    EXPECT_THROW(rc::recover_unlabeled_bruteforce(std::vector<double>(5, 0.0), 4), mixup::ContractError);
}
