#pragma once

#include <phwh/errors.hpp>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <complex>
#include <limits>
#include <string>
#include <vector>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace phwh {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

namespace linalg {

/// Entries at or below this magnitude count as structural zeros in sparsity
/// patterns (adjacency graphs, reversal relations).
inline constexpr double kZeroThreshold = 1e-14;

/// Eigenvalues with real part below this are treated as stable.
inline constexpr double kStableThreshold = -1e-10;

/// 2-norm condition number; infinite for an exactly singular matrix.
inline double condition_number(const Matrix& m) {
    if (m.rows() == 0) {
        return 1.0;
    }
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    if (smin <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return s(0) / smin;
}

/// Inverse of a square matrix, rejected when the condition number exceeds
/// `max_condition`.
inline Matrix checked_inverse(const Matrix& m, double max_condition = 1e12,
                              ErrorCode code = ErrorCode::Singular) {
    const double cond = condition_number(m);
    if (!(cond <= max_condition)) {
        throw Error(code, "matrix condition number " + std::to_string(cond) +
                              " exceeds " + std::to_string(max_condition));
    }
    return m.partialPivLu().inverse();
}

inline Matrix expm(const Matrix& m) {
    return m.exp();
}

/// True when the directed graph with an edge i->j for every off-diagonal
/// entry above kZeroThreshold is strongly connected. One forward and one
/// backward search from node 0.
inline bool is_strongly_connected(const Matrix& a) {
    const Index n = a.rows();
    if (n <= 1) {
        return true;
    }
    auto reaches_all = [&](bool transpose) {
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::vector<Index> stack{0};
        seen[0] = 1;
        Index count = 1;
        while (!stack.empty()) {
            const Index v = stack.back();
            stack.pop_back();
            for (Index w = 0; w < n; ++w) {
                const double entry = transpose ? a(w, v) : a(v, w);
                if (w != v && !seen[static_cast<std::size_t>(w)] && entry > kZeroThreshold) {
                    seen[static_cast<std::size_t>(w)] = 1;
                    ++count;
                    stack.push_back(w);
                }
            }
        }
        return count == n;
    };
    return reaches_all(false) && reaches_all(true);
}

/// Real Schur form M = Z S Z^T with the stable eigenvalues ordered first.
struct OrderedSchur {
    Matrix basis;  ///< first `stable_dim` Schur vectors: orthonormal basis of the stable subspace
    Matrix block;  ///< leading stable_dim x stable_dim quasi-triangular block of S
    Eigen::VectorXcd eigenvalues;
    Index stable_dim = 0;
};

namespace detail {
inline lapack_logical select_stable(const double* re, const double* /*im*/) {
    return *re < kStableThreshold ? 1 : 0;
}
} // namespace detail

/// Ordered real Schur decomposition (LAPACK dgees with eigenvalue sorting).
inline OrderedSchur stable_schur(const Matrix& m) {
    const Index n = m.rows();
    Matrix a = m;
    Matrix z(n, n);
    Vector wr(n), wi(n);
    lapack_int sdim = 0;
    const lapack_int info = LAPACKE_dgees(
        LAPACK_COL_MAJOR, 'V', 'S', &detail::select_stable, static_cast<lapack_int>(n), a.data(),
        static_cast<lapack_int>(n), &sdim, wr.data(), wi.data(), z.data(), static_cast<lapack_int>(n));
    if (info != 0) {
        throw Error(ErrorCode::DefectiveSpectrum,
                    "ordered Schur decomposition failed (dgees info=" + std::to_string(info) + ")");
    }
    OrderedSchur out;
    out.stable_dim = sdim;
    out.basis = z.leftCols(sdim);
    out.block = a.topLeftCorner(sdim, sdim);
    out.eigenvalues.resize(n);
    for (Index i = 0; i < n; ++i) {
        out.eigenvalues(i) = {wr(i), wi(i)};
    }
    return out;
}

} // namespace linalg
} // namespace phwh
