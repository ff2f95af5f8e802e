#ifndef MIXUP_RECOVERY_HPP
#define MIXUP_RECOVERY_HPP

#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace mixup::recovery {

/// Rows of the C(m,2) x m pair-incidence matrix in lexicographic order
/// (0-based point indices, a < b). Each row has ones in columns a and b.
class MixupMatrix {
public:
    explicit MixupMatrix(std::size_t m) : m_(m) {
        if (m < 2) throw ContractError("mixup_matrix needs m >= 2");
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = a + 1; b < m; ++b) rows_.emplace_back(a, b);
    }

    std::size_t points() const noexcept { return m_; }
    std::size_t rows() const noexcept { return rows_.size(); }
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const noexcept { return rows_; }

    /// Row index of the unordered pair {a, b}.
    std::size_t row_of(std::size_t a, std::size_t b) const {
        if (a == b || a >= m_ || b >= m_) throw ContractError("invalid pair");
        if (a > b) std::swap(a, b);
        // rows before a: sum_{r<a} (m - 1 - r)
        return a * (2 * m_ - a - 1) / 2 + (b - a - 1);
    }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(m_));
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(rows_[r].first)) = 1.0;
            A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(rows_[r].second)) = 1.0;
        }
        return A;
    }

private:
    std::size_t m_;
    std::vector<std::pair<std::size_t, std::size_t>> rows_;
};

inline MixupMatrix mixup_matrix(std::size_t m) { return MixupMatrix(m); }

using IntMatrix = std::vector<std::vector<std::int64_t>>;

namespace detail {
inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw NumericError("exact rank: integer overflow");
    return r;
}
inline std::int64_t checked_sub(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_sub_overflow(a, b, &r)) throw NumericError("exact rank: integer overflow");
    return r;
}
} // namespace detail

/// Rank over the rationals by fraction-free (Bareiss) elimination. All
/// intermediate values are integer minors; overflow is detected, not wrapped.
inline std::size_t exact_rank(IntMatrix M) {
    if (M.empty()) return 0;
    const std::size_t rows = M.size(), cols = M.front().size();
    std::size_t rank = 0;
    std::int64_t prev = 1;
    for (std::size_t c = 0; c < cols && rank < rows; ++c) {
        std::size_t piv = rank;
        while (piv < rows && M[piv][c] == 0) ++piv;
        if (piv == rows) continue;
        std::swap(M[piv], M[rank]);
        const std::int64_t p = M[rank][c];
        for (std::size_t r = rank + 1; r < rows; ++r) {
            for (std::size_t j = c + 1; j < cols; ++j) {
                const std::int64_t num = detail::checked_sub(detail::checked_mul(p, M[r][j]),
                                                             detail::checked_mul(M[r][c], M[rank][j]));
                M[r][j] = num / prev; // exact by Sylvester's identity
            }
            M[r][c] = 0;
        }
        prev = p;
        ++rank;
    }
    return rank;
}

inline void validate_permutation(const std::vector<std::size_t>& perm, std::size_t n) {
    if (perm.size() != n) throw ContractError("row permutation has length " + std::to_string(perm.size()) +
                                              ", expected " + std::to_string(n));
    std::vector<bool> seen(n, false);
    for (std::size_t v : perm) {
        if (v >= n || seen[v]) throw ContractError("not a permutation");
        seen[v] = true;
    }
}

/// [A, PA] with (PA) row r equal to A row perm[r].
inline IntMatrix concat_with_permuted(const MixupMatrix& A, const std::vector<std::size_t>& perm) {
    validate_permutation(perm, A.rows());
    const std::size_t m = A.points();
    IntMatrix M(A.rows(), std::vector<std::int64_t>(2 * m, 0));
    for (std::size_t r = 0; r < A.rows(); ++r) {
        const auto [a, b] = A.pairs()[r];
        M[r][a] = M[r][b] = 1;
        const auto [pa, pb] = A.pairs()[perm[r]];
        M[r][m + pa] = M[r][m + pb] = 1;
    }
    return M;
}

/// Exact rank of [A, PA].
inline std::size_t rank_concat(std::size_t m, const std::vector<std::size_t>& perm) {
    const MixupMatrix A(m);
    return exact_rank(concat_with_permuted(A, perm));
}

/// True iff the columns of PA are a permutation of the columns of A.
inline bool is_column_permutation(std::size_t m, const std::vector<std::size_t>& perm) {
    const MixupMatrix A(m);
    validate_permutation(perm, A.rows());
    const auto columns = [&](bool permuted) {
        std::vector<std::vector<std::size_t>> cols(m);
        for (std::size_t r = 0; r < A.rows(); ++r) {
            const auto [a, b] = A.pairs()[permuted ? perm[r] : r];
            cols[a].push_back(r);
            cols[b].push_back(r);
        }
        std::sort(cols.begin(), cols.end());
        return cols;
    };
    return columns(false) == columns(true);
}

/// Row permutation induced by relabelling point a as sigma[a].
inline std::vector<std::size_t> row_permutation_from_points(std::size_t m, const std::vector<std::size_t>& sigma) {
    validate_permutation(sigma, m);
    const MixupMatrix A(m);
    std::vector<std::size_t> perm(A.rows());
    for (std::size_t r = 0; r < A.rows(); ++r) {
        const auto [a, b] = A.pairs()[r];
        perm[r] = A.row_of(sigma[a], sigma[b]);
    }
    return perm;
}

struct RankTrialReport {
    std::size_t trials = 0;
    std::size_t column_perm_count = 0;
    std::optional<std::size_t> min_rank_non_column; // over non-column permutations
    std::optional<std::size_t> max_rank_column;      // over column permutations
};

/// Rank of [A, PA] for uniformly random row permutations P.
inline RankTrialReport permutation_rank_trial(std::size_t m, std::size_t n_trials, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t rows = m * (m - 1) / 2;
    RankTrialReport rep;
    rep.trials = n_trials;
    std::vector<std::size_t> perm(rows);
    for (std::size_t t = 0; t < n_trials; ++t) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        const std::size_t r = rank_concat(m, perm);
        if (is_column_permutation(m, perm)) {
            ++rep.column_perm_count;
            rep.max_rank_column = std::max(rep.max_rank_column.value_or(0), r);
        } else {
            rep.min_rank_non_column = std::min(rep.min_rank_non_column.value_or(r), r);
        }
    }
    return rep;
}

/// A midpoint tagged with the (0-based) pair it averages.
struct LabeledMidpoint {
    std::size_t i = 0;
    std::size_t j = 0;
    Vector value;
};

inline std::vector<LabeledMidpoint> form_midpoints(const PointMatrix& pts) {
    std::vector<LabeledMidpoint> out;
    for (Eigen::Index a = 0; a < pts.rows(); ++a)
        for (Eigen::Index b = a + 1; b < pts.rows(); ++b)
            out.push_back({static_cast<std::size_t>(a), static_cast<std::size_t>(b),
                           (0.5 * (pts.row(a) + pts.row(b))).transpose()});
    return out;
}

struct LabeledRecovery {
    PointMatrix points;
    double residual = 0.0; // ||A w - 2 b||_inf over all coordinates
};

/// Solves A w = 2 b per coordinate. A has full column rank for m >= 3, so
/// the least-squares solution is exact for consistent midpoints.
inline LabeledRecovery recover_labeled(const std::vector<LabeledMidpoint>& midpoints, std::size_t m,
                                       std::optional<double> tol = std::nullopt) {
    if (m < 3) throw NumericError("recover_labeled: m >= 3 points are needed for a unique solution");
    const MixupMatrix A(m);
    if (midpoints.empty()) throw NumericError("recover_labeled: underdetermined, no midpoints given");
    const auto dim = midpoints.front().value.size();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(A.rows()), dim);
    std::vector<bool> present(A.rows(), false);
    double scale = 1.0;
    for (const auto& mp : midpoints) {
        if (mp.value.size() != dim) throw ContractError("recover_labeled: inconsistent midpoint dimensions");
        const std::size_t r = A.row_of(mp.i, mp.j);
        if (present[r]) throw ContractError("recover_labeled: duplicate pair");
        present[r] = true;
        B.row(static_cast<Eigen::Index>(r)) = 2.0 * mp.value.transpose();
        scale = std::max(scale, mp.value.cwiseAbs().maxCoeff());
    }
    const auto missing = std::count(present.begin(), present.end(), false);
    if (missing > 0)
        throw NumericError("recover_labeled: underdetermined, " + std::to_string(missing) + " pair(s) missing");
    const Eigen::MatrixXd Ad = A.dense();
    const Eigen::MatrixXd W = Ad.colPivHouseholderQr().solve(B);
    LabeledRecovery out{W, (Ad * W - B).cwiseAbs().maxCoeff()};
    const double limit = tol ? *tol : 1e-8 * scale;
    if (out.residual > limit)
        throw InconsistentMidpoints("recover_labeled: midpoints are inconsistent (residual " +
                                        std::to_string(out.residual) + ")",
                                    out.residual);
    return out;
}

namespace detail {
// Multiset with tolerant lookup.
inline bool take_near(std::multiset<double>& s, double v, double tol) {
    auto it = s.lower_bound(v - tol);
    if (it == s.end() || *it > v + tol) return false;
    s.erase(it);
    return true;
}
} // namespace detail

inline constexpr std::size_t max_unlabeled_points = 7;

/// All ascending point multisets in R^1 whose C(m,2) midpoints equal the given
/// multiset (within tol relative to the data scale).
///
/// With sorted points x1 <= ... <= xm and pairwise sums s = 2 * midpoint, the
/// two smallest sums are x1 + x2 and x1 + x3. Choosing which remaining sum
/// is x2 + x3 fixes x1..x3; afterwards the smallest unexplained sum is always
/// x1 + x_next, so each choice extends deterministically.
inline std::vector<std::vector<double>> recover_unlabeled_bruteforce(std::vector<double> midpoints, std::size_t m,
                                                                     double rel_tol = 1e-9) {
    if (m > max_unlabeled_points) throw ContractError("recover_unlabeled_bruteforce: m > 7 is not supported");
    if (m < 3) throw ContractError("recover_unlabeled_bruteforce: m >= 3 required");
    if (midpoints.size() != m * (m - 1) / 2)
        throw ContractError("recover_unlabeled_bruteforce: expected C(m,2) midpoints");
    std::vector<double> sums;
    double scale = 1.0;
    for (double v : midpoints) {
        sums.push_back(2.0 * v);
        scale = std::max(scale, std::abs(2.0 * v));
    }
    std::sort(sums.begin(), sums.end());
    const double tol = rel_tol * scale;

    std::vector<std::vector<double>> found;
    std::set<double> tried;
    for (std::size_t c = 2; c < sums.size(); ++c) {
        if (!tried.insert(sums[c]).second) continue;
        const double s12 = sums[0], s13 = sums[1], s23 = sums[c];
        const double x2 = 0.5 * (s12 + s23 - s13);
        const double x1 = s12 - x2;
        const double x3 = s13 - x1;
        if (x1 > x2 + tol || x2 > x3 + tol) continue;
        std::multiset<double> rest(sums.begin(), sums.end());
        std::vector<double> pts{x1, x2, x3};
        bool ok = detail::take_near(rest, s12, tol) && detail::take_near(rest, s13, tol) &&
                  detail::take_near(rest, s23, tol);
        while (ok && pts.size() < m) {
            const double next = *rest.begin() - x1;
            if (next < pts.back() - tol) {
                ok = false;
                break;
            }
            for (double p : pts) ok = ok && detail::take_near(rest, p + next, tol);
            pts.push_back(next);
        }
        if (!ok || !rest.empty()) continue;
        const bool dup = std::any_of(found.begin(), found.end(), [&](const std::vector<double>& f) {
            for (std::size_t i = 0; i < m; ++i)
                if (std::abs(f[i] - pts[i]) > tol) return false;
            return true;
        });
        if (!dup) found.push_back(std::move(pts));
    }
    return found;
}

/// Midpoints of a 1-D point multiset, sorted ascending.
inline std::vector<double> midpoint_multiset(const std::vector<double>& pts) {
    std::vector<double> out;
    for (std::size_t a = 0; a < pts.size(); ++a)
        for (std::size_t b = a + 1; b < pts.size(); ++b) out.push_back(0.5 * (pts[a] + pts[b]));
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace mixup::recovery

#endif // MIXUP_RECOVERY_HPP
