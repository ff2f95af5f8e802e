#ifndef MIXUP_CORE_HPP
#define MIXUP_CORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixup {

using Rng = std::mt19937_64;

// Row i is data point i.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Errors

struct InvalidDistribution : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DatasetError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated precondition of an operation (asymmetric mixing where symmetry is
// required, labels outside the simplex, shape mismatch, ...).
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

struct OutsideMixSupport : std::domain_error {
    using std::domain_error::domain_error;
};

// Non-convergence, inconsistency and rank failures.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InconsistentMidpoints : NumericError {
    InconsistentMidpoints(const std::string& what, double residual)
        : NumericError(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Probability vector over k classes. Index 0 is class 1.
struct ClassProbs {
    std::vector<double> probs;

    std::size_t size() const noexcept { return probs.size(); }
    double operator[](std::size_t i) const { return probs[i]; }

    /// 1-based predicted class; exact ties go to the lowest class index.
    int predicted_class() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < probs.size(); ++i)
            if (probs[i] > probs[best]) best = i;
        return static_cast<int>(best) + 1;
    }

    bool is_tied() const {
        if (probs.size() < 2) return false;
        const int c = predicted_class();
        for (std::size_t i = 0; i < probs.size(); ++i)
            if (static_cast<int>(i) + 1 != c && probs[i] == probs[c - 1]) return true;
        return false;
    }

    static ClassProbs one_hot(std::size_t k, int cls) {
        ClassProbs p{std::vector<double>(k, 0.0)};
        p.probs.at(static_cast<std::size_t>(cls - 1)) = 1.0;
        return p;
    }
};

/// Deterministic per-task seed derived from a master seed, for fan-out of
/// independent runs.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Uniform index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

} // namespace mixup

#endif // MIXUP_CORE_HPP
