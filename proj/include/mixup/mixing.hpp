#ifndef MIXUP_MIXING_HPP
#define MIXUP_MIXING_HPP

#include "core.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace mixup {

namespace special {

inline double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Continued fraction for I_x(a, b), modified Lentz. Converges quickly for
// x < (a + 1) / (a + b + 2); iteration count grows like sqrt(max(a, b)).
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr int max_iter = 20000;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) return h;
    }
    throw NumericError("incomplete beta continued fraction did not converge");
}

/// Regularized incomplete beta function I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("incomplete_beta: a, b must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("incomplete_beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
    if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
    return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

} // namespace special

/// Law of the mixing coefficient lambda on [0, 1].
///
/// Values are immutable once built. Tabulated densities are linear between
/// grid nodes, zero outside the grid, and renormalized to unit mass.
class MixingDistribution {
public:
    enum class Kind { beta_symmetric, uniform, tabulated };

    static MixingDistribution beta(double alpha) {
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw InvalidDistribution("Beta(alpha, alpha) requires alpha > 0, got " + std::to_string(alpha));
        MixingDistribution d;
        d.kind_ = Kind::beta_symmetric;
        d.alpha_ = alpha;
        d.log_norm_ = special::log_beta(alpha, alpha);
        return d;
    }

    static MixingDistribution uniform() {
        MixingDistribution d;
        d.kind_ = Kind::uniform;
        d.alpha_ = 1.0;
        return d;
    }

    static MixingDistribution tabulated(std::vector<double> lambdas, std::vector<double> densities) {
        if (lambdas.size() != densities.size() || lambdas.size() < 2)
            throw InvalidDistribution("tabulated density needs at least two (lambda, density) rows");
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            if (!(lambdas[i] >= 0.0 && lambdas[i] <= 1.0))
                throw InvalidDistribution("tabulated lambda outside [0,1]");
            if (i > 0 && !(lambdas[i] > lambdas[i - 1]))
                throw InvalidDistribution("tabulated lambda must be strictly increasing");
            if (!(densities[i] >= 0.0) || !std::isfinite(densities[i]))
                throw InvalidDistribution("tabulated density has a negative or non-finite entry");
        }
        double mass = 0.0;
        for (std::size_t i = 1; i < lambdas.size(); ++i)
            mass += 0.5 * (densities[i] + densities[i - 1]) * (lambdas[i] - lambdas[i - 1]);
        if (!(mass > 0.0)) throw InvalidDistribution("tabulated density has zero mass");
        for (double& f : densities) f /= mass;

        MixingDistribution d;
        d.kind_ = Kind::tabulated;
        d.grid_ = std::move(lambdas);
        d.values_ = std::move(densities);
        d.normalization_ = 1.0 / mass;
        d.cumulative_.assign(d.grid_.size(), 0.0);
        for (std::size_t i = 1; i < d.grid_.size(); ++i)
            d.cumulative_[i] = d.cumulative_[i - 1] +
                               0.5 * (d.values_[i] + d.values_[i - 1]) * (d.grid_[i] - d.grid_[i - 1]);
        d.symmetric_ = d.check_tabulated_symmetry();
        return d;
    }

    /// CSV with header `lambda,density`.
    static MixingDistribution from_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open mixing density file '" + path + "'", 0);
        std::string line;
        std::size_t lineno = 0;
        std::vector<double> lam, dens;
        bool header = false;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (!header) {
                if (line != "lambda,density") throw ParseError("expected header 'lambda,density'", lineno);
                header = true;
                continue;
            }
            const auto comma = line.find(',');
            if (comma == std::string::npos) throw ParseError("expected two fields", lineno);
            try {
                std::size_t p1 = 0, p2 = 0;
                const std::string a = line.substr(0, comma), b = line.substr(comma + 1);
                lam.push_back(std::stod(a, &p1));
                dens.push_back(std::stod(b, &p2));
                if (p1 != a.size() || p2 != b.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ParseError("non-numeric field", lineno);
            }
        }
        if (!header) throw ParseError("empty mixing density file", lineno);
        return tabulated(std::move(lam), std::move(dens));
    }

    Kind kind() const noexcept { return kind_; }
    /// Beta parameter; 1 for uniform, NaN for tabulated.
    double alpha() const noexcept {
        return kind_ == Kind::tabulated ? std::numeric_limits<double>::quiet_NaN() : alpha_;
    }
    bool is_symmetric() const noexcept { return symmetric_; }
    /// Factor applied to user-supplied tabulated densities (1 otherwise).
    double normalization_factor() const noexcept { return normalization_; }
    const std::vector<double>& grid() const noexcept { return grid_; }
    const std::vector<double>& grid_density() const noexcept { return values_; }

    std::string describe() const {
        std::ostringstream os;
        switch (kind_) {
        case Kind::beta_symmetric: os << "beta(" << alpha_ << ")"; break;
        case Kind::uniform: os << "uniform"; break;
        case Kind::tabulated: os << "tabulated(" << grid_.size() << " nodes)"; break;
        }
        return os.str();
    }

    double density(double lambda) const {
        if (!(lambda >= 0.0 && lambda <= 1.0)) return 0.0;
        switch (kind_) {
        case Kind::uniform: return 1.0;
        case Kind::beta_symmetric: {
            if (lambda == 0.0 || lambda == 1.0) {
                if (alpha_ == 1.0) return 1.0;
                return alpha_ > 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
            }
            return std::exp((alpha_ - 1.0) * (std::log(lambda) + std::log1p(-lambda)) - log_norm_);
        }
        case Kind::tabulated: {
            if (lambda < grid_.front() || lambda > grid_.back()) return 0.0;
            const std::size_t i = cell_of(lambda);
            const double t = (lambda - grid_[i]) / (grid_[i + 1] - grid_[i]);
            return values_[i] + t * (values_[i + 1] - values_[i]);
        }
        }
        return 0.0;
    }

    /// P(lambda <= x) for x in [0, 1].
    double cdf(double x) const {
        if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("cdf argument outside [0,1]");
        switch (kind_) {
        case Kind::uniform: return x;
        case Kind::beta_symmetric: return special::incomplete_beta(alpha_, alpha_, x);
        case Kind::tabulated: return tabulated_partial(x, false);
        }
        return 0.0;
    }

    /// Probability mass of [a, b] clamped to [0, 1]; zero for empty ranges.
    double interval_mass(double a, double b) const {
        a = std::clamp(a, 0.0, 1.0);
        b = std::clamp(b, 0.0, 1.0);
        if (!(a < b)) return 0.0;
        if (kind_ == Kind::beta_symmetric && a > 0.5) {
            // Difference of upper tails keeps precision far from the centre.
            return std::max(0.0, cdf(1.0 - a) - cdf(1.0 - b));
        }
        return std::max(0.0, cdf(b) - cdf(a));
    }

    /// Integral of lambda * f(lambda) over [a, b] clamped to [0, 1].
    double interval_first_moment(double a, double b) const {
        a = std::clamp(a, 0.0, 1.0);
        b = std::clamp(b, 0.0, 1.0);
        if (!(a < b)) return 0.0;
        double r = 0.0;
        switch (kind_) {
        case Kind::uniform: r = 0.5 * (b * b - a * a); break;
        case Kind::beta_symmetric:
            // lambda * Beta(l; alpha, alpha) = 1/2 * Beta(l; alpha + 1, alpha)
            r = 0.5 * (special::incomplete_beta(alpha_ + 1.0, alpha_, b) -
                       special::incomplete_beta(alpha_ + 1.0, alpha_, a));
            break;
        case Kind::tabulated: r = tabulated_partial(b, true) - tabulated_partial(a, true); break;
        }
        const double mass = interval_mass(a, b);
        return std::clamp(r, a * mass, b * mass);
    }

    double mean() const { return interval_first_moment(0.0, 1.0); }

    double sample(Rng& rng) const {
        switch (kind_) {
        case Kind::uniform: return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        case Kind::beta_symmetric: {
            std::gamma_distribution<double> gamma(alpha_, 1.0);
            const double x = gamma(rng);
            const double y = gamma(rng);
            return x / (x + y);
        }
        case Kind::tabulated: {
            const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            double lo = grid_.front(), hi = grid_.back();
            for (int it = 0; it < 64; ++it) {
                const double mid = 0.5 * (lo + hi);
                (cdf(mid) < u ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
        }
        }
        return 0.5;
    }

private:
    MixingDistribution() = default;

    std::size_t cell_of(double lambda) const {
        auto it = std::upper_bound(grid_.begin(), grid_.end(), lambda);
        std::size_t i = static_cast<std::size_t>(it - grid_.begin());
        i = i == 0 ? 0 : i - 1;
        return std::min(i, grid_.size() - 2);
    }

    // Integral over [grid_.front(), x] of f (or lambda * f when weighted).
    double tabulated_partial(double x, bool weighted) const {
        if (x <= grid_.front()) return 0.0;
        if (!weighted && x >= grid_.back()) return 1.0;
        x = std::min(x, grid_.back());
        const std::size_t i = cell_of(x);
        double acc = 0.0;
        const auto piece = [&](std::size_t c, double lo, double hi) {
            const double slope = (values_[c + 1] - values_[c]) / (grid_[c + 1] - grid_[c]);
            const double intercept = values_[c] - slope * grid_[c];
            if (!weighted) return intercept * (hi - lo) + slope * (hi * hi - lo * lo) / 2.0;
            return intercept * (hi * hi - lo * lo) / 2.0 + slope * (hi * hi * hi - lo * lo * lo) / 3.0;
        };
        if (weighted) {
            for (std::size_t c = 0; c < i; ++c) acc += piece(c, grid_[c], grid_[c + 1]);
        } else {
            acc = cumulative_[i];
        }
        return acc + piece(i, grid_[i], x);
    }

    bool check_tabulated_symmetry() const {
        double peak = 0.0;
        for (double v : values_) peak = std::max(peak, v);
        const double tol = 1e-9 * std::max(1.0, peak);
        for (double l : grid_)
            if (std::abs(density(l) - density(1.0 - l)) > tol) return false;
        return true;
    }

    Kind kind_ = Kind::uniform;
    double alpha_ = 1.0;
    double log_norm_ = 0.0;
    double normalization_ = 1.0;
    bool symmetric_ = true;
    std::vector<double> grid_, values_, cumulative_;
};

/// Beta(alpha, alpha) concentration level above which P(|Y - 1/2| <= eps) > 1/2.
inline double alpha_threshold(double eps) {
    if (!(eps > 0.0)) throw std::domain_error("alpha_threshold requires eps > 0");
    return 0.5 * (std::log(4.0) / (eps * eps) - 1.0);
}

/// Oracle routines evaluate the density at interior points; below this
/// alpha the Beta density is too singular at the endpoints to be supported.
inline constexpr double min_supported_alpha = 0.5;

inline void require_oracle_support(const MixingDistribution& dist) {
    if (dist.kind() == MixingDistribution::Kind::beta_symmetric && dist.alpha() < min_supported_alpha)
        throw InvalidDistribution("Beta(alpha, alpha) with alpha < 0.5 is not supported by the oracle");
}

} // namespace mixup

#endif // MIXUP_MIXING_HPP
