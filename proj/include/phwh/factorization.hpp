#pragma once

// Factorization of the joint law of (sup, terminal value, phase at the sup,
// terminal phase) for a jump diffusion over a phase-type horizon.
//
// With U, U* the upward first-passage generators of X over (alpha, T) and of
// -X over the reversed horizon (alpha*, T*), and u, u* their exit vectors:
//
//   P_i(sup in dx, J_sup = k)                  = (e^{U x})_{ik} u_k
//   P*_j(inf in dy, J_inf = k)                 = (e^{-U* y})_{jk} u*_k
//   P_i(sup in dx, X in dy, J_sup = k, J_end = j)
//                                              = r_k alpha*_j (e^{U x})_{ik} (e^{U* (x - y)})_{jk}
//
// with c_k = (-alpha U^{-1})_k u_k and r_k = u_k u*_k / c_k. With discounting
// U, U* are replaced by U(delta), U*(delta) while u, u*, c and r stay the
// undiscounted ones.
//
// All densities are unconditional; conditional laws divide by c_k.

#include <phwh/errors.hpp>
#include <phwh/first_passage.hpp>
#include <phwh/fluid_embedding.hpp>
#include <phwh/linalg.hpp>
#include <phwh/ph_core.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace phwh {

enum class ReversalKind { Standard, General, Stationary };

struct ReversalChoice {
    ReversalKind kind = ReversalKind::Standard;
    RowVector alphaHat;  ///< only for General

    static ReversalChoice standard() { return {}; }
    static ReversalChoice general(RowVector alphaHat) { return {ReversalKind::General, std::move(alphaHat)}; }
    static ReversalChoice stationary() { return {ReversalKind::Stationary, {}}; }
};

inline ReversalResult reverse(const PhaseType& horizon, const ReversalChoice& choice) {
    switch (choice.kind) {
    case ReversalKind::Standard: return reverse_standard(horizon);
    case ReversalKind::General: return reverse_general(horizon, choice.alphaHat);
    case ReversalKind::Stationary: return reverse_stationary(horizon);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown reversal kind");
}

struct FactorizationTables {
    /// Passage operators at the requested discount rate.
    PassageOperator up;
    PassageOperator down;
    /// Undiscounted operators; identical to up/down when delta == 0.
    PassageOperator up0;
    PassageOperator down0;

    ReversalResult reversal;
    Index n = 0;
    double delta = 0.0;

    RowVector alphaExt;      ///< horizon alpha padded to the up-phases
    RowVector alphaBaseExt;  ///< reversal base padded to the up-phases
    RowVector alphaStarExt;  ///< alpha* padded to the down-phases

    /// P(J at the supremum = k) under the horizon's alpha, over up-phases.
    Vector c;
    /// Same under the reversal base; the normalizer used in r and in
    /// conditional downward densities.
    Vector cBase;
    /// r_k over up-phases; zero where cBase_k is zero.
    Vector r;
    /// Largest relative disagreement among the three expressions for r_k.
    double rDeviation = 0.0;
};

namespace factorization_detail {

inline constexpr double kUnreachable = 1e-12;
inline constexpr double kInconsistentR = 1e-6;

inline RowVector pad(const RowVector& v, Index size) {
    RowVector out = RowVector::Zero(size);
    out.head(v.size()) = v;
    return out;
}

inline void check_index(Index value, Index bound, const char* name) {
    if (value < 0 || value >= bound) {
        throw Error(ErrorCode::IndexOutOfRange, std::string(name) + " = " + std::to_string(value) +
                                                    " outside [0, " + std::to_string(bound) + ")");
    }
}

inline void check_brownian_prefix(const PassageOperator& op, Index n) {
    for (Index k = 0; k < n; ++k) {
        if (op.upIndex[static_cast<std::size_t>(k)] != k) {
            throw Error(ErrorCode::InvalidArgument, "Brownian phases must lead the up-phase ordering");
        }
    }
}

} // namespace factorization_detail

inline FactorizationTables build_tables(const JumpDiffusionModel& model, const PhaseType& horizon,
                                        double delta,
                                        const ReversalChoice& choice = ReversalChoice::standard()) {
    using namespace factorization_detail;
    FactorizationTables tb;
    tb.n = horizon.size();
    tb.delta = delta;
    tb.reversal = reverse(horizon, choice);
    const PhaseType reversed = tb.reversal.as_phase_type();

    const FluidModel upFluid = embed(model, horizon);
    const FluidModel downFluid = embed_negated(model, reversed);
    tb.up0 = compute_passage(upFluid, 0.0);
    tb.down0 = compute_passage(downFluid, 0.0);
    if (delta > 0.0) {
        tb.up = compute_passage(upFluid, delta);
        tb.down = compute_passage(downFluid, delta);
    } else {
        tb.up = tb.up0;
        tb.down = tb.down0;
    }
    check_brownian_prefix(tb.up0, tb.n);
    check_brownian_prefix(tb.down0, tb.n);

    const Index rUp = tb.up0.size();
    const Index rDown = tb.down0.size();
    tb.alphaExt = pad(horizon.alpha(), rUp);
    tb.alphaBaseExt = pad(tb.reversal.alphaBase, rUp);
    tb.alphaStarExt = pad(tb.reversal.alphaStar, rDown);

    // -alpha U^{-1} solved as U^T x = -alpha^T
    const auto upLu = tb.up0.U.transpose().partialPivLu();
    const RowVector occupancy = upLu.solve(-tb.alphaExt.transpose()).transpose();
    const RowVector occupancyBase = upLu.solve(-tb.alphaBaseExt.transpose()).transpose();
    const RowVector occupancyStar =
        tb.down0.U.transpose().partialPivLu().solve(-tb.alphaStarExt.transpose()).transpose();

    tb.c = occupancy.transpose().cwiseProduct(tb.up0.u);
    tb.cBase = occupancyBase.transpose().cwiseProduct(tb.up0.u);
    for (Index k = 0; k < rUp; ++k) {
        if (tb.c(k) < kUnreachable) {
            tb.c(k) = 0.0;
        }
        if (tb.cBase(k) < kUnreachable) {
            tb.cBase(k) = 0.0;
        }
    }

    tb.r = Vector::Zero(rUp);
    tb.rDeviation = 0.0;
    for (Index k = 0; k < tb.n; ++k) {
        if (tb.cBase(k) == 0.0) {
            continue;
        }
        const double uk = tb.up0.u(k);
        const double usk = tb.down0.u(k);
        const double viaC = uk * usk / tb.cBase(k);
        const double viaUp = usk / occupancyBase(k);
        const double viaDown = uk / occupancyStar(k);
        const double scale = std::max({std::abs(viaC), std::abs(viaUp), std::abs(viaDown),
                                       std::numeric_limits<double>::min()});
        const double dev = std::max({std::abs(viaC - viaUp), std::abs(viaC - viaDown),
                                     std::abs(viaUp - viaDown)}) /
                           scale;
        tb.rDeviation = std::max(tb.rDeviation, dev);
        tb.r(k) = viaC;
    }
    if (!(tb.rDeviation <= kInconsistentR)) {
        throw Error(ErrorCode::InconsistentR,
                    "expressions for r_k disagree (relative deviation " +
                        std::to_string(tb.rDeviation) + ")");
    }
    return tb;
}

/// P(J at the supremum = k) over the up-phases; zero on jump phases.
inline Vector phase_at_sup_distribution(const FactorizationTables& tb) {
    return tb.c;
}

/// (e^{U x})_{ik} u_k: density of the supremum jointly with the phase at the
/// supremum, started from horizon phase i.
inline double sup_density(const FactorizationTables& tb, Index i, double x, Index k) {
    factorization_detail::check_index(i, tb.n, "initial phase");
    factorization_detail::check_index(k, tb.up.size(), "up-phase");
    if (!(x >= 0.0)) {
        throw Error(ErrorCode::DomainError, "sup_density requires x >= 0");
    }
    return tb.up.phi(x)(i, k) * tb.up.u(k);
}

/// Density of the supremum and phase at the supremum under the horizon's alpha.
inline double sup_density_mixed(const FactorizationTables& tb, double x, Index k) {
    factorization_detail::check_index(k, tb.up.size(), "up-phase");
    if (!(x >= 0.0)) {
        throw Error(ErrorCode::DomainError, "sup_density requires x >= 0");
    }
    return tb.alphaExt.dot(tb.up.phi(x).col(k)) * tb.up.u(k);
}

/// (e^{-U* y})_{jk} u*_k for y <= 0: the infimum under the reversed horizon.
inline double inf_density(const FactorizationTables& tb, Index j, double y, Index k) {
    factorization_detail::check_index(j, tb.down.size(), "phase");
    factorization_detail::check_index(k, tb.down.size(), "down-phase");
    if (!(y <= 0.0)) {
        throw Error(ErrorCode::DomainError, "inf_density requires y <= 0");
    }
    return tb.down.phi(-y)(j, k) * tb.down.u(k);
}

/// Density of the infimum under the reversed horizon given that it is
/// attained in phase k. Only defined where c_k > 0.
inline double conditional_inf_density(const FactorizationTables& tb, double y, Index k) {
    factorization_detail::check_index(k, tb.n, "phase");
    if (!(y <= 0.0)) {
        throw Error(ErrorCode::DomainError, "conditional_inf_density requires y <= 0");
    }
    if (tb.cBase(k) == 0.0) {
        throw Error(ErrorCode::DomainError,
                    "phase " + std::to_string(k) + " is unreachable at the extremum");
    }
    return tb.alphaStarExt.dot(tb.down.phi(-y).col(k)) * tb.down.u(k) / tb.cBase(k);
}

/// Joint density of (sup in dx, X_tau in dy, J_sup = k, J_tau- = j) started in
/// horizon phase i; discounted by e^{-delta tau} when the tables carry delta > 0.
inline double joint_density(const FactorizationTables& tb, Index i, double x, double y, Index k,
                            Index j) {
    factorization_detail::check_index(i, tb.n, "initial phase");
    factorization_detail::check_index(k, tb.up.size(), "up-phase");
    factorization_detail::check_index(j, tb.n, "terminal phase");
    if (!(x > 0.0) || !(y < x)) {
        throw Error(ErrorCode::DomainError, "joint_density requires x > 0 and y < x");
    }
    if (k >= tb.n || tb.r(k) == 0.0) {
        return 0.0;
    }
    return tb.r(k) * tb.reversal.alphaStar(j) * tb.up.phi(x)(i, k) * tb.down.phi(x - y)(j, k);
}

namespace factorization_detail {

/// sum_k r_k (a e^{U x})_k (alpha* e^{U* w})_k for an arbitrary start row a.
inline double mixed_joint(const FactorizationTables& tb, const RowVector& upRow, double w) {
    const Matrix downPhi = tb.down.phi(w);
    double sum = 0.0;
    for (Index k = 0; k < tb.n; ++k) {
        if (tb.r(k) != 0.0) {
            sum += tb.r(k) * upRow(k) * tb.alphaStarExt.dot(downPhi.col(k));
        }
    }
    return sum;
}

/// Smallest power-of-two level with a e^{U x} 1 below `tail`.
inline double tail_level(const Matrix& U, const RowVector& start, double tail) {
    double x = 1.0;
    const Vector ones = Vector::Ones(U.rows());
    while (start.dot(linalg::expm(U * x) * ones) >= tail) {
        x *= 2.0;
        if (x > 1e8) {
            throw Error(ErrorCode::DomainError, "passage law decays too slowly to truncate");
        }
    }
    return x;
}

} // namespace factorization_detail

/// Joint density summed over k, j and mixed over the initial phase by alpha.
inline double joint_density_mixed(const FactorizationTables& tb, double x, double y) {
    if (!(x > 0.0) || !(y < x)) {
        throw Error(ErrorCode::DomainError, "joint_density requires x > 0 and y < x");
    }
    const RowVector upRow = tb.alphaExt * tb.up.phi(x);
    return factorization_detail::mixed_joint(tb, upRow, x - y);
}

/// Total mass of the alpha-mixed joint density by nested adaptive
/// Gauss-Kronrod quadrature over x in (0, x_max), y in (x - w_max, x), with
/// the truncation levels chosen so the neglected tails are below 1e-10.
/// Equals 1 for delta = 0 and E[e^{-delta tau}] otherwise.
inline double total_mass(const FactorizationTables& tb) {
    using boost::math::quadrature::gauss_kronrod;
    const double xMax = factorization_detail::tail_level(tb.up0.U, tb.alphaExt, 1e-10);
    const double wMax = factorization_detail::tail_level(tb.down0.U, tb.alphaStarExt, 1e-10);
    auto outer = [&](double x) {
        const RowVector upRow = tb.alphaExt * tb.up.phi(x);
        auto inner = [&](double w) { return factorization_detail::mixed_joint(tb, upRow, w); };
        return gauss_kronrod<double, 31>::integrate(inner, 0.0, wMax, 12, 1e-13);
    };
    return gauss_kronrod<double, 31>::integrate(outer, 0.0, xMax, 12, 1e-13);
}

namespace factorization_detail {

/// Integral of e^{U s} over [lo, hi]; hi may be +infinity.
inline Matrix integrated_phi(const Matrix& U, double lo, double hi) {
    const auto lu = U.partialPivLu();
    const Matrix upper = std::isinf(hi) ? Matrix::Zero(U.rows(), U.cols()) : linalg::expm(U * hi);
    return lu.solve(upper - linalg::expm(U * lo));
}

} // namespace factorization_detail

/// Probability (or discounted mass) of the cell
/// {sup in [xLo, xHi), sup - X_tau in [wLo, wHi), J_sup = k, J_tau- = j}
/// under the horizon's alpha. Upper edges may be +infinity.
inline double joint_cell_mass(const FactorizationTables& tb, double xLo, double xHi, double wLo,
                              double wHi, Index k, Index j) {
    factorization_detail::check_index(k, tb.up.size(), "up-phase");
    factorization_detail::check_index(j, tb.n, "terminal phase");
    if (!(xLo >= 0.0 && xHi > xLo && wLo >= 0.0 && wHi > wLo)) {
        throw Error(ErrorCode::DomainError, "cell edges must satisfy 0 <= lo < hi");
    }
    if (k >= tb.n || tb.r(k) == 0.0) {
        return 0.0;
    }
    const Matrix A = factorization_detail::integrated_phi(tb.up.U, xLo, xHi);
    const Matrix B = factorization_detail::integrated_phi(tb.down.U, wLo, wHi);
    return tb.r(k) * tb.reversal.alphaStar(j) * tb.alphaExt.dot(A.col(k)) * B(j, k);
}

} // namespace phwh
