#ifndef MIXUP_ORACLE_HPP
#define MIXUP_ORACLE_HPP

#include "datasets.hpp"
#include "mixing.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace mixup::oracle {

/// Closed sub-interval of [0, 1] for the mixing coefficient.
struct LambdaInterval {
    double lo = 0.0;
    double hi = 0.0;
    double length() const noexcept { return hi - lo; }
};

/// An ordered pair (p, q) whose mixtures lambda p + (1 - lambda) q reach the
/// neighbourhood of a probe.
struct SegmentHit {
    std::size_t p_index = 0;
    std::size_t q_index = 0;
    int class_p = 0;
    int class_q = 0;
    LambdaInterval lambda_interval;
    std::optional<double> lambda_star; // exact through-probe parameter
    double pair_norm = 0.0;
};

/// Mixture measures at a probe: xi(i,j) is the P_X x P_X x P_f mass of the
/// (s, t, lambda) with s in X_i, t in X_j landing in B_eps(x), xi_lambda the
/// same integral weighted by lambda. Indices are 0-based classes.
struct XiTable {
    Eigen::MatrixXd xi;
    Eigen::MatrixXd xi_lambda;
    double epsilon = 0.0;
    Vector probe;
    bool in_xmix = false;
};

inline std::span<const double> row_span(const LabeledDataset& ds, std::size_t i) {
    return {ds.points().row(static_cast<Eigen::Index>(i)).data(), ds.dim()};
}

inline std::span<const double> as_span(const Vector& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

/// Values of lambda in [0, 1] with ||lambda p + (1 - lambda) q - x|| <= eps.
inline std::optional<LambdaInterval> segment_ball_interval(std::span<const double> p, std::span<const double> q,
                                                           std::span<const double> x, double eps) {
    if (p.size() != q.size() || p.size() != x.size())
        throw ContractError("segment_ball_interval: dimension mismatch");
    double a = 0.0, de = 0.0, dd = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double e = p[i] - q[i];
        const double d = q[i] - x[i];
        a += e * e;
        de += d * e;
        dd += d * d;
    }
    const double eps2 = eps * eps;
    if (a == 0.0) {
        if (dd <= eps2) return LambdaInterval{0.0, 1.0};
        return std::nullopt;
    }
    const double centre = -de / a;
    double dist2 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double r = q[i] - x[i] + centre * (p[i] - q[i]);
        dist2 += r * r;
    }
    if (dist2 > eps2) return std::nullopt;
    const double half = std::sqrt((eps2 - dist2) / a);
    const double lo = std::max(0.0, centre - half);
    const double hi = std::min(1.0, centre + half);
    if (lo > hi) return std::nullopt;
    return LambdaInterval{lo, hi};
}

inline XiTable xi_table(const LabeledDataset& ds, const MixingDistribution& dist, const Vector& x, double eps) {
    if (!(eps > 0.0)) throw ContractError("xi_table requires eps > 0");
    if (static_cast<std::size_t>(x.size()) != ds.dim()) throw ContractError("probe dimension mismatch");
    const auto k = ds.num_classes();
    XiTable t{Eigen::MatrixXd::Zero(k, k), Eigen::MatrixXd::Zero(k, k), eps, x, false};
    const double w = 1.0 / (static_cast<double>(ds.size()) * static_cast<double>(ds.size()));
    const auto xs = as_span(x);
    for (std::size_t a = 0; a < ds.size(); ++a) {
        for (std::size_t b = 0; b < ds.size(); ++b) {
            const auto iv = segment_ball_interval(row_span(ds, a), row_span(ds, b), xs, eps);
            if (!iv) continue;
            const int i = ds.label(a) - 1, j = ds.label(b) - 1;
            t.xi(i, j) += w * dist.interval_mass(iv->lo, iv->hi);
            t.xi_lambda(i, j) += w * dist.interval_first_moment(iv->lo, iv->hi);
        }
    }
    t.in_xmix = (t.xi.array() > 0.0).any();
    return t;
}

/// Per-class coefficients of the Mixup-optimal constant fit around a probe:
/// xi(i,i) + sum_{j != i} (xi_lambda(i,j) + xi(j,i) - xi_lambda(j,i)).
inline std::vector<double> optimal_coefficients(const Eigen::MatrixXd& xi, const Eigen::MatrixXd& xi_lambda) {
    const auto k = xi.rows();
    std::vector<double> c(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index i = 0; i < k; ++i) {
        double v = xi(i, i);
        for (Eigen::Index j = 0; j < k; ++j)
            if (j != i) v += xi_lambda(i, j) + (xi(j, i) - xi_lambda(j, i));
        c[static_cast<std::size_t>(i)] = std::max(0.0, v);
    }
    return c;
}

inline std::vector<double> symmetric_coefficients(const Eigen::MatrixXd& xi, const Eigen::MatrixXd& xi_lambda) {
    const auto k = xi.rows();
    std::vector<double> c(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index i = 0; i < k; ++i) {
        double v = xi(i, i);
        for (Eigen::Index j = 0; j < k; ++j)
            if (j != i) v += 2.0 * xi_lambda(i, j);
        c[static_cast<std::size_t>(i)] = std::max(0.0, v);
    }
    return c;
}

/// Normalizes nonnegative coefficients; zero-coefficient classes get 0.
inline std::optional<ClassProbs> normalize(std::vector<double> c) {
    double total = 0.0;
    for (double v : c) total += v;
    if (!(total > 0.0)) return std::nullopt;
    for (double& v : c) v /= total;
    return ClassProbs{std::move(c)};
}

/// Mixup-optimal class probabilities at a probe for a fixed neighbourhood radius.
inline ClassProbs h_epsilon(const LabeledDataset& ds, const MixingDistribution& dist, const Vector& x, double eps) {
    const auto t = xi_table(ds, dist, x, eps);
    if (!t.in_xmix) throw OutsideMixSupport("x outside eps-inflated X_mix (no mixture reaches B_eps(x))");
    return *normalize(optimal_coefficients(t.xi, t.xi_lambda));
}

/// Same as h_epsilon using the simplification valid for symmetric mixing.
inline ClassProbs h_epsilon_symmetric(const LabeledDataset& ds, const MixingDistribution& dist, const Vector& x,
                                      double eps) {
    if (!dist.is_symmetric()) throw ContractError("h_epsilon_symmetric requires a symmetric mixing distribution");
    const auto t = xi_table(ds, dist, x, eps);
    if (!t.in_xmix) throw OutsideMixSupport("x outside eps-inflated X_mix (no mixture reaches B_eps(x))");
    return *normalize(symmetric_coefficients(t.xi, t.xi_lambda));
}

/// Exact-through-probe detection tolerance: 1e-9 times the dataset diameter.
inline double default_tol_line(const LabeledDataset& ds) {
    const double d = ds.diameter();
    return 1e-9 * (d > 0.0 ? d : 1.0);
}

/// Ordered pairs of distinct points whose open segment passes within tol of x.
inline std::vector<SegmentHit> through_hits(const LabeledDataset& ds, const Vector& x, double tol_line) {
    std::vector<SegmentHit> hits;
    const std::size_t n = ds.dim();
    for (std::size_t a = 0; a < ds.size(); ++a) {
        const auto p = row_span(ds, a);
        for (std::size_t b = 0; b < ds.size(); ++b) {
            if (a == b) continue;
            const auto q = row_span(ds, b);
            double ee = 0.0, xe = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double e = p[i] - q[i];
                ee += e * e;
                xe += (x[static_cast<Eigen::Index>(i)] - q[i]) * e;
            }
            const double norm = std::sqrt(ee);
            if (norm <= tol_line) continue;
            const double ls = xe / ee;
            if (!(ls > 0.0 && ls < 1.0)) continue;
            double r2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = q[i] + ls * (p[i] - q[i]) - x[static_cast<Eigen::Index>(i)];
                r2 += r * r;
            }
            if (std::sqrt(r2) > tol_line) continue;
            hits.push_back({a, b, ds.label(a), ds.label(b), {ls, ls}, ls, norm});
        }
    }
    return hits;
}

/// Limit of h_epsilon as eps -> 0, or nullopt when x is not in X_mix.
///
/// At a data point of class i the self-pair mass dominates and the result is
/// e_i. Elsewhere a through-x pair (p, q) carries mass f(l*) 2 eps / ||p - q||
/// to first order; the common 2 eps cancels in the normalized ratio.
inline std::optional<ClassProbs> h_limit(const LabeledDataset& ds, const MixingDistribution& dist, const Vector& x,
                                         std::optional<double> tol_line = std::nullopt) {
    require_oracle_support(dist);
    if (static_cast<std::size_t>(x.size()) != ds.dim()) throw ContractError("probe dimension mismatch");
    const double tol = tol_line ? *tol_line : default_tol_line(ds);
    const auto k = static_cast<std::size_t>(ds.num_classes());
    for (std::size_t a = 0; a < ds.size(); ++a)
        if ((ds.point(a).transpose() - x).norm() <= tol) return ClassProbs::one_hot(k, ds.label(a));

    const auto hits = through_hits(ds, x, tol);
    if (hits.empty()) return std::nullopt;
    const double m2 = static_cast<double>(ds.size()) * static_cast<double>(ds.size());
    Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    Eigen::MatrixXd xl = xi;
    for (const auto& h : hits) {
        const double w = dist.density(*h.lambda_star) / (m2 * h.pair_norm);
        xi(h.class_p - 1, h.class_q - 1) += w;
        xl(h.class_p - 1, h.class_q - 1) += *h.lambda_star * w;
    }
    return normalize(optimal_coefficients(xi, xl));
}

/// Bisection in alpha (Beta(alpha, alpha) mixing) for the point where the
/// fixed-eps probability of class cls at x crosses 1/2. The sign of
/// h^cls - 1/2 must differ at alpha_lo and alpha_hi.
inline double alpha_crossover(const LabeledDataset& ds, const Vector& x, int cls, double eps, double alpha_lo,
                              double alpha_hi, double tol = 1e-6) {
    const auto g = [&](double a) {
        return h_epsilon(ds, MixingDistribution::beta(a), x, eps)[static_cast<std::size_t>(cls - 1)] - 0.5;
    };
    double glo = g(alpha_lo);
    if ((glo > 0.0) == (g(alpha_hi) > 0.0)) throw NumericError("alpha_crossover: no sign change in the bracket");
    while (alpha_hi - alpha_lo > tol) {
        const double mid = 0.5 * (alpha_lo + alpha_hi);
        const double gm = g(mid);
        if ((gm > 0.0) == (glo > 0.0)) {
            alpha_lo = mid;
            glo = gm;
        } else {
            alpha_hi = mid;
        }
    }
    return 0.5 * (alpha_lo + alpha_hi);
}

struct GridSpec {
    double x_min = -1.0, x_max = 1.0, y_min = -1.0, y_max = 1.0;
    int nx = 101, ny = 101;

    double x_at(int i) const { return nx == 1 ? x_min : x_min + i * (x_max - x_min) / (nx - 1); }
    double y_at(int j) const { return ny == 1 ? y_min : y_min + j * (y_max - y_min) / (ny - 1); }
};

struct EpsilonMode {
    double eps;
};
struct LimitMode {
    std::optional<double> tol_line;
};
using OracleMode = std::variant<EpsilonMode, LimitMode>;

struct GridCell {
    double x = 0.0, y = 0.0;
    int label = 0;              // 0 where the oracle is undefined
    std::vector<double> probs;  // empty where undefined
};

struct BoundaryGrid {
    GridSpec spec;
    int num_classes = 0;
    std::vector<GridCell> cells; // row-major in y, then x
};

/// Argmax class of the oracle over a rectangular grid of a 2-D dataset.
inline BoundaryGrid boundary_grid(const LabeledDataset& ds, const MixingDistribution& dist, const GridSpec& spec,
                                  const OracleMode& mode) {
    if (ds.dim() != 2) throw ContractError("boundary_grid needs a 2-D dataset");
    if (spec.nx < 1 || spec.ny < 1) throw ContractError("grid resolution must be positive");
    BoundaryGrid out{spec, ds.num_classes(), {}};
    out.cells.reserve(static_cast<std::size_t>(spec.nx) * static_cast<std::size_t>(spec.ny));
    std::optional<double> tol;
    if (const auto* lm = std::get_if<LimitMode>(&mode)) tol = lm->tol_line ? *lm->tol_line : default_tol_line(ds);
    for (int j = 0; j < spec.ny; ++j) {
        for (int i = 0; i < spec.nx; ++i) {
            GridCell cell{spec.x_at(i), spec.y_at(j), 0, {}};
            const Vector x = Eigen::Vector2d(cell.x, cell.y);
            std::optional<ClassProbs> p;
            if (const auto* em = std::get_if<EpsilonMode>(&mode)) {
                const auto t = xi_table(ds, dist, x, em->eps);
                if (t.in_xmix) p = normalize(optimal_coefficients(t.xi, t.xi_lambda));
            } else {
                p = h_limit(ds, dist, x, tol);
            }
            if (p) {
                cell.label = p->predicted_class();
                cell.probs = std::move(p->probs);
            }
            out.cells.push_back(std::move(cell));
        }
    }
    return out;
}

} // namespace mixup::oracle

#endif // MIXUP_ORACLE_HPP
