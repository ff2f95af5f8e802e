#ifndef MIXUP_LINEAR_HPP
#define MIXUP_LINEAR_HPP

#include "datasets.hpp"
#include "mixing.hpp"
#include "quadrature.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mixup::linear {

struct LinearClassifier {
    Vector theta;
    Eigen::MatrixXd span_basis; // d x r orthonormal basis of the row space of X
};

struct InterpolationCertificate {
    double k = 1.0;
    Vector dual_coeffs;
    bool is_max_margin = false;
};

/// Signed labels (+1 for class 1, -1 for class 2) as a vector.
inline Vector signed_labels(const LabeledDataset& ds) {
    Vector y(static_cast<Eigen::Index>(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) y(static_cast<Eigen::Index>(i)) = ds.signed_label(i);
    return y;
}

/// Orthonormal basis of span{x_1, ..., x_n} (columns), by column-pivoted QR.
inline Eigen::MatrixXd span_basis(const LabeledDataset& ds) {
    const Eigen::MatrixXd Xt = ds.points().transpose();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xt);
    const auto r = qr.rank();
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(Xt.rows(), r);
    return Q;
}

inline Vector project_onto_span(const Eigen::MatrixXd& basis, const Vector& v) {
    return basis * (basis.transpose() * v);
}

/// Minimum-norm solution of y_i theta^T x_i = 1. Its dual coefficients
/// certify that it is also the hard-margin solution iff y_i beta_i > 0 for all i.
inline std::pair<LinearClassifier, InterpolationCertificate> min_norm_interpolator(const LabeledDataset& ds) {
    const Vector y = signed_labels(ds);
    const Eigen::MatrixXd& X = ds.points();
    const Eigen::MatrixXd G = X * X.transpose();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(G);
    qr.setThreshold(1e-12);
    if (qr.rank() < G.rows())
        throw NumericError("min_norm_interpolator: Gram matrix is singular (rank " + std::to_string(qr.rank()) +
                           " < " + std::to_string(G.rows()) + ")");
    const Vector beta = qr.solve(y);
    InterpolationCertificate cert{1.0, beta, (y.array() * beta.array() > 0.0).all()};
    LinearClassifier lc{X.transpose() * beta, span_basis(ds)};
    return {std::move(lc), std::move(cert)};
}

/// Quadrature rule for expectations over lambda: sum_i w_i g(lambda_i).
struct LambdaRule {
    std::vector<double> nodes;
    std::vector<double> weights; // sum to 1
};

namespace detail {
inline void add_panel(LambdaRule& rule, const MixingDistribution& dist, double a, double b, int n,
                      const std::vector<double>& gx, const std::vector<double>& gw) {
    const double mass = dist.interval_mass(a, b);
    if (mass <= 0.0) return;
    double raw = 0.0;
    const std::size_t first = rule.nodes.size();
    for (int i = 0; i < n; ++i) {
        const double l = 0.5 * (a + b) + 0.5 * (b - a) * gx[static_cast<std::size_t>(i)];
        const double w = 0.5 * (b - a) * gw[static_cast<std::size_t>(i)] * dist.density(l);
        rule.nodes.push_back(l);
        rule.weights.push_back(w);
        raw += w;
    }
    // Rescale so each panel carries its exact probability mass.
    if (raw > 0.0)
        for (std::size_t i = first; i < rule.nodes.size(); ++i) rule.weights[i] *= mass / raw;
}
} // namespace detail

/// Panelled Gauss-Legendre rule weighted by the mixing density. Beta
/// densities with alpha > 1 are truncated to 1/2 +- 12 standard deviations;
/// alpha < 1 integrates in w = (2 lambda)^alpha on each half; tabulated
/// densities use one panel per grid cell.
namespace detail {
inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}
} // namespace detail

inline LambdaRule lambda_rule(const MixingDistribution& dist, int nodes) {
    if (nodes < 16) throw ContractError("lambda_rule: at least 16 quadrature nodes are required");
    LambdaRule rule;
    using Kind = MixingDistribution::Kind;
    if (dist.kind() == Kind::tabulated) {
        const auto& g = dist.grid();
        const auto [gx, gw] = quad::gauss_legendre(8);
        for (std::size_t c = 0; c + 1 < g.size(); ++c) detail::add_panel(rule, dist, g[c], g[c + 1], 8, gx, gw);
    } else if (dist.kind() == Kind::beta_symmetric && dist.alpha() < 1.0) {
        // lambda = w^(1/alpha) / 2 on each half cancels the endpoint singularity
        // of the density, leaving a bounded integrand in w.
        const double p = 1.0 / dist.alpha();
        const int per = nodes / 4;
        const auto [gx, gw] = quad::gauss_legendre(per);
        for (int half = 0; half < 2; ++half)
            for (double a : {0.0, 0.5})
                for (int i = 0; i < per; ++i) {
                    const double w = a + 0.25 * (1.0 + gx[static_cast<std::size_t>(i)]);
                    const double l = 0.5 * std::pow(w, p);
                    const double jac = 0.5 * p * std::pow(w, p - 1.0);
                    rule.nodes.push_back(half == 0 ? l : 1.0 - l);
                    rule.weights.push_back(0.25 * gw[static_cast<std::size_t>(i)] * jac * dist.density(l));
                }
    } else {
        double lo = 0.0, hi = 1.0;
        if (dist.kind() == Kind::beta_symmetric) {
            const double sd = std::sqrt(1.0 / (4.0 * (2.0 * dist.alpha() + 1.0)));
            lo = std::max(0.0, 0.5 - 12.0 * sd);
            hi = std::min(1.0, 0.5 + 12.0 * sd);
        }
        const int panels = 4;
        const int per = std::max(4, nodes / panels);
        const auto [gx, gw] = quad::gauss_legendre(per);
        for (int p = 0; p < panels; ++p)
            detail::add_panel(rule, dist, lo + (hi - lo) * p / panels, lo + (hi - lo) * (p + 1) / panels, per, gx,
                              gw);
    }
    double total = 0.0;
    for (double w : rule.weights) total += w;
    for (double& w : rule.weights) w /= total;
    return rule;
}

/// log(1 + exp(s)) without overflow.
inline double softplus(double s) { return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }
inline double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

enum class PairTerms {
    all,        // every ordered pair, including same-class and same-point mixes
    cross_only, // only pairs drawn from different classes
};

struct LossOptions {
    int quadrature_nodes = 64;
    PairTerms terms = PairTerms::all;
};

struct LossValue {
    double loss = 0.0;
    Vector gradient;
};

/// Mixup logistic loss of a linear model, averaged over the included ordered
/// pairs and over lambda. Each pair contributes
///   E[q log(1 + exp(-s)) + (1 - q) log(1 + exp(s))],
/// s = theta^T (lambda x_a + (1 - lambda) x_b), q the mixed positive label.
class MixupLinearLoss {
public:
    MixupLinearLoss(const LabeledDataset& ds, const MixingDistribution& dist, LossOptions opt = {})
        : X_(ds.points()), y_(signed_labels(ds)), rule_(lambda_rule(dist, opt.quadrature_nodes)), terms_(opt.terms) {
        const auto n = X_.rows();
        for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = 0; b < n; ++b)
                if (terms_ == PairTerms::all || y_(a) != y_(b)) ++pairs_;
        if (pairs_ == 0) throw ContractError("mixup_linear_loss: no pairs to average over");
    }

    std::size_t pair_count() const noexcept { return pairs_; }
    const LambdaRule& rule() const noexcept { return rule_; }

    LossValue operator()(const Vector& theta) const {
        if (theta.size() != X_.cols()) throw ContractError("mixup_linear_loss: theta dimension mismatch");
        const Vector r = X_ * theta;
        const auto n = X_.rows();
        Vector coef = Vector::Zero(n);
        double loss = 0.0;
        for (Eigen::Index a = 0; a < n; ++a) {
            const double pa = y_(a) > 0 ? 1.0 : 0.0;
            for (Eigen::Index b = 0; b < n; ++b) {
                if (terms_ == PairTerms::cross_only && y_(a) == y_(b)) continue;
                const double pb = y_(b) > 0 ? 1.0 : 0.0;
                double ca = 0.0, cb = 0.0;
                for (std::size_t i = 0; i < rule_.nodes.size(); ++i) {
                    const double l = rule_.nodes[i], w = rule_.weights[i];
                    const double s = l * r(a) + (1.0 - l) * r(b);
                    const double q = l * pa + (1.0 - l) * pb;
                    loss += w * (q * softplus(-s) + (1.0 - q) * softplus(s));
                    const double d = w * (sigmoid(s) - q);
                    ca += d * l;
                    cb += d * (1.0 - l);
                }
                coef(a) += ca;
                coef(b) += cb;
            }
        }
        const double scale = 1.0 / static_cast<double>(pairs_);
        return {loss * scale, X_.transpose() * (coef * scale)};
    }

private:
    Eigen::MatrixXd X_;
    Vector y_;
    LambdaRule rule_;
    PairTerms terms_;
    std::size_t pairs_ = 0;
};

inline LossValue mixup_linear_loss(const Vector& theta, const LabeledDataset& ds, const MixingDistribution& dist,
                                   LossOptions opt = {}) {
    return MixupLinearLoss(ds, dist, opt)(theta);
}

struct MinimizeOptions {
    int max_iters = 5000;
    double grad_tol = 1e-9;
    LossOptions loss{};
};

struct MinimizeResult {
    LinearClassifier classifier;
    double loss = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
};

/// Gradient descent with Armijo backtracking from a Barzilai-Borwein trial
/// step; iterates are projected onto span(X).
inline MinimizeResult minimize_mixup_linear(const LabeledDataset& ds, const MixingDistribution& dist,
                                            MinimizeOptions opt = {}) {
    if (!dist.is_symmetric()) throw ContractError("minimize_mixup_linear requires a symmetric mixing distribution");
    const MixupLinearLoss f(ds, dist, opt.loss);
    const Eigen::MatrixXd basis = span_basis(ds);
    Vector theta = Vector::Zero(static_cast<Eigen::Index>(ds.dim()));
    LossValue cur = f(theta);
    Vector g = project_onto_span(basis, cur.gradient);
    double step = 1.0 / std::max(1.0, ds.points().rowwise().squaredNorm().maxCoeff());
    int it = 0;
    for (; it < opt.max_iters && g.norm() > opt.grad_tol; ++it) {
        double t = step;
        Vector next;
        LossValue nv;
        for (int bt = 0;; ++bt) {
            next = project_onto_span(basis, theta - t * g);
            nv = f(next);
            if (nv.loss <= cur.loss - 1e-4 * t * g.squaredNorm()) break;
            // Loss differences this small are rounding noise; fall back to the gradient norm.
            if (std::abs(nv.loss - cur.loss) <= 1e-13 * std::max(1.0, std::abs(cur.loss)) &&
                project_onto_span(basis, nv.gradient).norm() < g.norm())
                break;
            if (bt > 60) {
                // No further decrease representable: accept the current point.
                next = theta;
                nv = cur;
                break;
            }
            t *= 0.5;
        }
        const Vector g_next = project_onto_span(basis, nv.gradient);
        const Vector s = next - theta, yv = g_next - g;
        const double sy = s.dot(yv);
        if (s.squaredNorm() == 0.0) break;
        step = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * t;
        theta = std::move(next);
        cur = nv;
        g = g_next;
    }
    MinimizeResult res{{theta, basis}, cur.loss, g.norm(), it};
    if (res.grad_norm > opt.grad_tol)
        throw NumericError("minimize_mixup_linear did not converge in " + std::to_string(it) +
                           " iterations (gradient norm " + detail::sci(res.grad_norm) + ")");
    return res;
}

/// Derivative of the scalar objective
///   phi(u) = E[lambda log(1 + e^{(1-2 lambda) u}) + (1 - lambda) log(1 + e^{(2 lambda - 1) u})].
inline double k_objective_derivative(const LambdaRule& rule, double u) {
    double d = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double l = rule.nodes[i], t = 1.0 - 2.0 * l;
        d += rule.weights[i] * (l * t * sigmoid(t * u) - (1.0 - l) * t * sigmoid(-t * u));
    }
    return d;
}

inline double k_objective(const LambdaRule& rule, double u) {
    double v = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double l = rule.nodes[i], t = 1.0 - 2.0 * l;
        v += rule.weights[i] * (l * softplus(t * u) + (1.0 - l) * softplus(-t * u));
    }
    return v;
}

/// Common margin at the Mixup-loss minimizer, as the root of phi'(u).
/// phi is convex with phi'(0) = -E[(1 - 2 lambda)^2] / 2 < 0.
inline double estimate_k(const MixingDistribution& dist, double tol = 1e-12, int nodes = 256) {
    if (!dist.is_symmetric()) throw ContractError("estimate_k requires a symmetric mixing distribution");
    const LambdaRule rule = lambda_rule(dist, nodes);
    double spread = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        spread += rule.weights[i] * (2.0 * rule.nodes[i] - 1.0) * (2.0 * rule.nodes[i] - 1.0);
    if (spread < 1e-10)
        throw NumericError("estimate_k: mixing distribution is degenerate at 1/2, the objective is flat");
    double lo = 0.0, hi = 1.0;
    while (k_objective_derivative(rule, hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) throw NumericError("estimate_k: no sign change found");
    }
    while (hi - lo > tol * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        (k_objective_derivative(rule, mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double cosine(const Vector& a, const Vector& b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

/// max_i |y_i theta^T x_i - k| with k the mean signed margin.
inline std::pair<double, double> margin_equality(const LabeledDataset& ds, const Vector& theta) {
    const Vector m = (ds.points() * theta).cwiseProduct(signed_labels(ds));
    const double k = m.mean();
    return {k, (m.array() - k).abs().maxCoeff()};
}

} // namespace mixup::linear

#endif // MIXUP_LINEAR_HPP
