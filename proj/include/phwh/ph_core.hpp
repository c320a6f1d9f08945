#pragma once

// Phase-type representations (alpha, T): validation, distribution functions
// and time reversal of the underlying terminating Markov chain.

#include <phwh/errors.hpp>
#include <phwh/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>

namespace phwh {

/// Raw, unvalidated (alpha, T) pair as read from input.
struct PhaseTypeRep {
    RowVector alpha;
    Matrix T;
};

/// Validated phase-type representation. Invariants: alpha is a probability
/// vector, T is an invertible sub-generator and T + t alpha is irreducible.
class PhaseType {
public:
    static constexpr double kAlphaSumTolerance = 1e-12;
    static constexpr double kMaxCondition = 1e12;

    /// Throws InvalidArgument, NotSubGenerator, Reducible or Singular.
    static PhaseType validate(const PhaseTypeRep& rep);

    [[nodiscard]] Index size() const noexcept { return T_.rows(); }
    [[nodiscard]] const RowVector& alpha() const noexcept { return alpha_; }
    [[nodiscard]] const Matrix& T() const noexcept { return T_; }
    /// Exit vector t = -T 1; entries below the zero threshold are exactly 0.
    [[nodiscard]] const Vector& exit() const noexcept { return exit_; }

    [[nodiscard]] double mean() const {
        return alpha_ * T_.partialPivLu().solve(-Vector::Ones(size()));
    }

    [[nodiscard]] PhaseTypeRep rep() const { return {alpha_, T_}; }

private:
    PhaseType(RowVector alpha, Matrix T, Vector t)
        : alpha_(std::move(alpha)), T_(std::move(T)), exit_(std::move(t)) {}

    RowVector alpha_;
    Matrix T_;
    Vector exit_;
};

inline PhaseType validate(const PhaseTypeRep& rep) {
    return PhaseType::validate(rep);
}

namespace detail {

inline void check_probability_vector(const RowVector& p, Index n, const char* name) {
    if (p.size() != n) {
        throw Error(ErrorCode::InvalidArgument, std::string(name) + " has length " +
                                                    std::to_string(p.size()) + ", expected " +
                                                    std::to_string(n));
    }
    if (!p.allFinite() || (p.array() < 0.0).any()) {
        throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be finite and nonnegative");
    }
    if (std::abs(p.sum() - 1.0) > PhaseType::kAlphaSumTolerance) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string(name) + " must sum to 1 (got " + std::to_string(p.sum()) + ")");
    }
}

/// Exit vector -T 1 after checking the sub-generator sign pattern.
inline Vector checked_exit_vector(const Matrix& T) {
    const Index n = T.rows();
    if (T.cols() != n || n == 0) {
        throw Error(ErrorCode::InvalidArgument, "T must be a non-empty square matrix");
    }
    if (!T.allFinite()) {
        throw Error(ErrorCode::InvalidArgument, "T has non-finite entries");
    }
    Vector t(n);
    for (Index i = 0; i < n; ++i) {
        if (!(T(i, i) < 0.0)) {
            throw Error(ErrorCode::NotSubGenerator,
                        "diagonal entry T[" + std::to_string(i) + "][" + std::to_string(i) +
                            "] must be negative");
        }
        for (Index j = 0; j < n; ++j) {
            if (j != i && T(i, j) < 0.0) {
                throw Error(ErrorCode::NotSubGenerator, "off-diagonal entry T[" + std::to_string(i) +
                                                            "][" + std::to_string(j) +
                                                            "] is negative");
            }
        }
        const double scale = std::abs(T(i, i));
        double ti = -T.row(i).sum();
        if (std::abs(ti) <= linalg::kZeroThreshold * std::max(1.0, scale)) {
            ti = 0.0;
        }
        if (ti < 0.0) {
            throw Error(ErrorCode::NotSubGenerator,
                        "row " + std::to_string(i) + " of T has positive sum");
        }
        t(i) = ti;
    }
    return t;
}

inline bool irreducible_with(const Matrix& T, const Vector& t, const RowVector& alpha) {
    return linalg::is_strongly_connected(T + t * alpha);
}

} // namespace detail

inline PhaseType PhaseType::validate(const PhaseTypeRep& rep) {
    Vector t = detail::checked_exit_vector(rep.T);
    detail::check_probability_vector(rep.alpha, rep.T.rows(), "alpha");
    if (!detail::irreducible_with(rep.T, t, rep.alpha)) {
        throw Error(ErrorCode::Reducible, "T + t*alpha is not irreducible");
    }
    const double cond = linalg::condition_number(rep.T);
    if (!(cond <= kMaxCondition)) {
        throw Error(ErrorCode::Singular,
                    "T is numerically singular (condition " + std::to_string(cond) + ")");
    }
    return PhaseType(rep.alpha, rep.T, std::move(t));
}

// ---------------------------------------------------------------------------
// Common families
// ---------------------------------------------------------------------------

inline PhaseType exponential(double rate) {
    return validate({RowVector::Ones(1), Matrix::Constant(1, 1, -rate)});
}

/// Erlang(n, rate) starting in phase 0 and moving 0 -> 1 -> ... -> n-1.
inline PhaseType erlang(Index n, double rate) {
    Matrix T = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        T(i, i) = -rate;
        if (i + 1 < n) {
            T(i, i + 1) = rate;
        }
    }
    RowVector alpha = RowVector::Zero(n);
    alpha(0) = 1.0;
    return validate({alpha, T});
}

/// Generalized Coxian: from phase i leave at rate rates[i], absorbing with
/// probability exit_probs[i] and moving to i+1 otherwise. The last exit
/// probability is forced to 1.
inline PhaseType coxian(std::span<const double> rates, std::span<const double> exit_probs,
                        const RowVector& alpha) {
    const auto n = static_cast<Index>(rates.size());
    if (static_cast<Index>(exit_probs.size()) != n) {
        throw Error(ErrorCode::InvalidArgument, "coxian: rates and exit_probs differ in length");
    }
    Matrix T = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        T(i, i) = -rates[k];
        if (i + 1 < n) {
            T(i, i + 1) = rates[k] * (1.0 - exit_probs[k]);
        }
    }
    return validate({alpha, T});
}

// ---------------------------------------------------------------------------
// Distribution functions
// ---------------------------------------------------------------------------

/// P(tau <= x) = 1 - alpha exp(T x) 1.
inline double cdf(const PhaseType& ph, double x) {
    if (!(x >= 0.0)) {
        throw Error(ErrorCode::DomainError, "cdf requires x >= 0");
    }
    const double survival = ph.alpha() * linalg::expm(ph.T() * x) * Vector::Ones(ph.size());
    return std::clamp(1.0 - survival, 0.0, 1.0);
}

inline double pdf(const PhaseType& ph, double x) {
    if (!(x >= 0.0)) {
        throw Error(ErrorCode::DomainError, "pdf requires x >= 0");
    }
    return ph.alpha() * linalg::expm(ph.T() * x) * ph.exit();
}

/// E[exp(-delta tau)] = alpha (delta I - T)^{-1} t.
inline double laplace(const PhaseType& ph, double delta) {
    if (!(delta >= 0.0)) {
        throw Error(ErrorCode::DomainError, "laplace requires delta >= 0");
    }
    const Matrix shifted = delta * Matrix::Identity(ph.size(), ph.size()) - ph.T();
    return ph.alpha() * shifted.partialPivLu().solve(ph.exit());
}

// ---------------------------------------------------------------------------
// Time reversal
// ---------------------------------------------------------------------------

/// Reversed representation together with the vector nu = -alphaBase T^{-1}
/// that defines it. `alphaBase` is the initial distribution the reversal was
/// computed from (alpha itself for the standard reversal).
struct ReversalResult {
    RowVector alphaStar;
    Matrix TStar;
    Vector tStar;
    RowVector nu;
    RowVector alphaBase;

    /// Re-validates (alphaStar, TStar) as a phase-type representation.
    [[nodiscard]] PhaseType as_phase_type() const { return validate({alphaStar, TStar}); }
};

namespace detail {

/// alpha* = t^T diag(nu), T* = diag(nu)^{-1} T^T diag(nu), t* = diag(nu)^{-1} alpha^T.
inline ReversalResult reverse_from(const RowVector& base, const Matrix& T, const Vector& t) {
    const Index n = T.rows();
    RowVector nu = T.transpose().partialPivLu().solve(-base.transpose()).transpose();
    if (!((nu.array() > 0.0).all())) {
        throw Error(ErrorCode::Reducible, "occupation vector -alpha T^{-1} is not strictly positive");
    }
    ReversalResult out;
    out.nu = nu;
    out.alphaBase = base;
    out.alphaStar = t.transpose().cwiseProduct(nu);
    out.TStar.resize(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            out.TStar(i, j) = (i == j) ? T(i, i) : T(j, i) * nu(j) / nu(i);
        }
    }
    out.tStar = base.transpose().cwiseQuotient(nu.transpose());
    return out;
}

} // namespace detail

/// Standard time reversal of the phase process.
inline ReversalResult reverse_standard(const PhaseType& ph) {
    return detail::reverse_from(ph.alpha(), ph.T(), ph.exit());
}

/// Reversal computed from (alphaHat, T) instead of (alpha, T). alphaHat must
/// make T + t alphaHat irreducible.
inline ReversalResult reverse_general(const PhaseType& ph, const RowVector& alphaHat) {
    detail::check_probability_vector(alphaHat, ph.size(), "alphaHat");
    if (!detail::irreducible_with(ph.T(), ph.exit(), alphaHat)) {
        throw Error(ErrorCode::Reducible, "T + t*alphaHat is not irreducible");
    }
    return detail::reverse_from(alphaHat, ph.T(), ph.exit());
}

/// Reversal with alpha* = alphaBase and t* = t, obtained from the stationary
/// law pi of T + diag(t). Requires T + diag(t) irreducible.
inline ReversalResult reverse_stationary(const PhaseType& ph) {
    const Index n = ph.size();
    const Vector& t = ph.exit();
    Matrix generator = ph.T();
    generator.diagonal() += t;
    if (!linalg::is_strongly_connected(generator)) {
        throw Error(ErrorCode::Reducible, "T + diag(t) is not irreducible");
    }
    // pi G = 0, pi 1 = 1: replace one balance equation by the normalization.
    Matrix system = generator.transpose();
    system.row(n - 1).setOnes();
    Vector rhs = Vector::Zero(n);
    rhs(n - 1) = 1.0;
    const RowVector pi = system.partialPivLu().solve(rhs).transpose();
    const RowVector base = pi.cwiseProduct(t.transpose()) / pi.dot(t.transpose());

    ReversalResult out;
    out.alphaBase = base;
    out.alphaStar = base;
    out.nu = ph.T().transpose().partialPivLu().solve(-base.transpose()).transpose();
    out.TStar.resize(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            out.TStar(i, j) = (i == j) ? ph.T()(i, i) : ph.T()(j, i) * pi(j) / pi(i);
        }
    }
    out.tStar = t;
    return out;
}

} // namespace phwh
