#ifndef MIXUP_ASSUMPTIONS_HPP
#define MIXUP_ASSUMPTIONS_HPP

#include "oracle.hpp"

#include <limits>
#include <string>
#include <vector>

namespace mixup::assumptions {

/// A support point x of class i lying (within tolerance) strictly inside the
/// segment from u to v, where v belongs to another class.
struct CollinearityViolation {
    std::size_t x_index = 0;
    std::size_t u_index = 0;
    std::size_t v_index = 0;
    double lambda = 0.0; // x ~ lambda u + (1 - lambda) v
    double residual = 0.0;
};

/// Exhaustive O(m^3) check of the no-collinearity condition. An empty result
/// means the condition holds at tolerance tol.
inline std::vector<CollinearityViolation> check_assumption1(const LabeledDataset& ds, double tol) {
    std::vector<CollinearityViolation> out;
    const std::size_t n = ds.dim();
    for (std::size_t xi = 0; xi < ds.size(); ++xi) {
        const auto x = oracle::row_span(ds, xi);
        for (std::size_t vi = 0; vi < ds.size(); ++vi) {
            if (ds.label(vi) == ds.label(xi)) continue;
            const auto v = oracle::row_span(ds, vi);
            for (std::size_t ui = 0; ui < ds.size(); ++ui) {
                if (ui == xi || ui == vi) continue;
                const auto u = oracle::row_span(ds, ui);
                double ee = 0.0, xe = 0.0, ux = 0.0;
                for (std::size_t d = 0; d < n; ++d) {
                    const double e = u[d] - v[d];
                    ee += e * e;
                    xe += (x[d] - v[d]) * e;
                    ux += (u[d] - x[d]) * (u[d] - x[d]);
                }
                // u coinciding with x only reaches x at lambda = 1.
                if (ee == 0.0 || std::sqrt(ux) <= tol) continue;
                const double lam = xe / ee;
                if (!(lam > 0.0 && lam < 1.0)) continue;
                double r2 = 0.0;
                for (std::size_t d = 0; d < n; ++d) {
                    const double r = lam * u[d] + (1.0 - lam) * v[d] - x[d];
                    r2 += r * r;
                }
                const double res = std::sqrt(r2);
                if (res <= tol) out.push_back({xi, ui, vi, lam, res});
            }
        }
    }
    return out;
}

struct EpsilonEstimate {
    double min_distance = std::numeric_limits<double>::infinity();
    std::size_t samples = 0;
    std::size_t eligible_samples = 0; // samples with at least one foreign reference point
    std::string warning;
};

/// Minimum distance between sampled mixtures lambda s + (1 - lambda) t of
/// the training set and reference points whose class differs from both mixed
/// classes. Sample j is drawn from the stream in a fixed order, so a longer
/// run with the same seed extends a shorter one.
inline EpsilonEstimate estimate_epsilon(const LabeledDataset& train, const MixingDistribution& dist,
                                        std::size_t n_samples, const LabeledDataset& reference, std::uint64_t seed) {
    if (reference.dim() != train.dim()) throw ContractError("estimate_epsilon: reference dimension differs");
    if (n_samples < 1) throw ContractError("estimate_epsilon: n_samples must be >= 1");
    Rng rng(seed);
    const auto n = static_cast<Eigen::Index>(train.dim());
    constexpr Eigen::Index block = 256;
    const auto& R = reference.points();
    const Eigen::VectorXd r_norm = R.rowwise().squaredNorm();
    EpsilonEstimate est;
    est.samples = n_samples;

    PointMatrix Z(block, n);
    std::vector<std::pair<int, int>> classes(block);
    for (std::size_t start = 0; start < n_samples; start += block) {
        const auto rows = static_cast<Eigen::Index>(std::min<std::size_t>(block, n_samples - start));
        for (Eigen::Index r = 0; r < rows; ++r) {
            const std::size_t s = uniform_index(rng, train.size());
            const std::size_t t = uniform_index(rng, train.size());
            const double lam = dist.sample(rng);
            Z.row(r) = lam * train.point(s) + (1.0 - lam) * train.point(t);
            classes[static_cast<std::size_t>(r)] = {train.label(s), train.label(t)};
        }
        const auto Zb = Z.topRows(rows);
        const Eigen::VectorXd z_norm = Zb.rowwise().squaredNorm();
        const Eigen::MatrixXd cross = Zb * R.transpose();
        for (Eigen::Index r = 0; r < rows; ++r) {
            const auto [ci, cj] = classes[static_cast<std::size_t>(r)];
            double best = std::numeric_limits<double>::infinity();
            Eigen::Index arg = -1;
            for (Eigen::Index c = 0; c < R.rows(); ++c) {
                const int lc = reference.label(static_cast<std::size_t>(c));
                if (lc == ci || lc == cj) continue;
                const double d2 = z_norm(r) + r_norm(c) - 2.0 * cross(r, c);
                if (d2 < best) {
                    best = d2;
                    arg = c;
                }
            }
            if (arg < 0) continue;
            ++est.eligible_samples;
            // Recompute the winner directly to avoid cancellation.
            const double exact = (Zb.row(r) - R.row(arg)).norm();
            est.min_distance = std::min(est.min_distance, exact);
        }
    }
    if (est.eligible_samples == 0)
        est.warning = "no reference point lies outside the mixed classes; estimate is +inf";
    return est;
}

struct Assumption2Report {
    bool holds = false;
    bool in_xmix = false; // false: holds vacuously, no mixture reaches B_eps(x)
    std::vector<oracle::SegmentHit> violations;
};

/// Pointwise margin condition for class i at probe x, decided exactly on the
/// lambda intervals at radius eps:
///   (a) every X_i x X_j segment entering B_eps(x) does so only for lambda > 1 - delta,
///   (b) no X_j x X_q segment (j, q != i) enters B_eps(x),
///   (c) xi(i, j) >= xi(j, i) for every j != i.
/// Intervals shorter than tol_line in lambda count as measure zero.
inline Assumption2Report check_assumption2(const LabeledDataset& ds, const MixingDistribution& dist, const Vector& x,
                                           int cls, double eps, double delta, double tol_line) {
    if (!(delta > 0.0 && delta < 0.5)) throw ContractError("check_assumption2 requires delta in (0, 1/2)");
    if (!(eps > 0.0)) throw ContractError("check_assumption2 requires eps > 0");
    if (cls < 1 || cls > ds.num_classes()) throw ContractError("class index out of range");
    Assumption2Report rep;
    const auto xs = oracle::as_span(x);
    for (std::size_t a = 0; a < ds.size(); ++a) {
        for (std::size_t b = 0; b < ds.size(); ++b) {
            const auto iv = oracle::segment_ball_interval(oracle::row_span(ds, a), oracle::row_span(ds, b), xs, eps);
            if (!iv || iv->length() <= tol_line) continue;
            rep.in_xmix = true;
            const int i = ds.label(a), j = ds.label(b);
            oracle::SegmentHit hit{a, b, i, j, *iv, std::nullopt, (ds.point(a) - ds.point(b)).norm()};
            if (i == cls && j != cls) {
                if (iv->lo < 1.0 - delta - tol_line) rep.violations.push_back(hit);
            } else if (i != cls && j != cls) {
                rep.violations.push_back(hit);
            }
        }
    }
    const auto t = oracle::xi_table(ds, dist, x, eps);
    for (int j = 1; j <= ds.num_classes(); ++j) {
        if (j == cls) continue;
        if (t.xi(cls - 1, j - 1) + 1e-15 >= t.xi(j - 1, cls - 1)) continue;
        // Witness: the first j -> i pair reaching the neighbourhood.
        const auto witness = [&]() -> std::optional<oracle::SegmentHit> {
            for (std::size_t b : ds.class_members(j))
                for (std::size_t a : ds.class_members(cls))
                    if (const auto iv = oracle::segment_ball_interval(oracle::row_span(ds, b), oracle::row_span(ds, a), xs, eps))
                        return oracle::SegmentHit{b, a, j, cls, *iv, std::nullopt, (ds.point(a) - ds.point(b)).norm()};
            return std::nullopt;
        }();
        if (witness) rep.violations.push_back(*witness);
    }
    rep.holds = rep.violations.empty();
    return rep;
}

/// Half the distance from class i to the nearest other class.
inline double margin_radius(const LabeledDataset& ds, int cls) {
    if (ds.num_classes() < 2) throw ContractError("margin_radius needs k >= 2");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a : ds.class_members(cls))
        for (std::size_t b = 0; b < ds.size(); ++b)
            if (ds.label(b) != cls) best = std::min(best, (ds.point(a) - ds.point(b)).squaredNorm());
    return 0.5 * std::sqrt(best);
}

} // namespace mixup::assumptions

#endif // MIXUP_ASSUMPTIONS_HPP
