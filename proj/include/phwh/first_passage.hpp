#pragma once

// First-passage generator of a terminating Markov-modulated Brownian motion
// over positive levels. Phi(x) = exp(U x) is the matrix of probabilities of
// first crossing level x in each up-phase; u = -U 1 are the exit rates.
//
// The generator is recovered from the roots z, Re z < 0, of the quadratic
// matrix polynomial
//
//     (1/2 z^2 diag(var) - z diag(drift) + Q(delta)) h = 0,
//
// via U h_up = z h_up, where h_up collects the up-phase coordinates of h.
// The polynomial is linearized with g = z h on the variance phases.

#include <phwh/errors.hpp>
#include <phwh/fluid_embedding.hpp>
#include <phwh/linalg.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>
#include <vector>

namespace phwh {

enum class PassageMethod { Spectral, Schur };

struct PassageOperator {
    Matrix U;
    /// Undiscounted exit rates, restricted to the up-phases.
    Vector u;
    /// upIndex[k] is the fluid phase of up-phase row k.
    std::vector<Index> upIndex;
    double delta = 0.0;
    PassageMethod method = PassageMethod::Spectral;

    [[nodiscard]] Index size() const { return U.rows(); }
    [[nodiscard]] Matrix phi(double level) const { return linalg::expm(U * level); }
};

struct SpectralSolution {
    Eigen::VectorXcd eigenvalues;
    /// Full eigenvectors (h coordinates only, one column per root).
    Eigen::MatrixXcd eigenvectors;
};

namespace passage_detail {

inline constexpr double kMaxEigenvectorCondition = 1e10;
/// Above this the diagonalization loses too many digits and the Schur route is used.
inline constexpr double kSpectralConditionLimit = 1e6;
inline constexpr double kSubGeneratorTolerance = 1e-9;

inline void check_fluid(const FluidModel& fluid, double delta) {
    if (!(delta >= 0.0) || !std::isfinite(delta)) {
        throw Error(ErrorCode::InvalidArgument, "discount rate must be finite and >= 0");
    }
    for (Index p = 0; p < fluid.size(); ++p) {
        if (!(fluid.var(p) > 0.0) && fluid.drift(p) == 0.0) {
            throw Error(ErrorCode::InvalidArgument,
                        "phase " + std::to_string(p) + " has zero variance and zero drift");
        }
    }
}

/// Companion matrix acting on w = (h, g_V).
inline Matrix companion(const FluidModel& fluid, double delta) {
    const Matrix Qd = fluid.discounted_generator(delta);
    const Index m = fluid.size();
    std::vector<Index> gSlot(static_cast<std::size_t>(m), -1);
    Index nv = 0;
    for (Index p = 0; p < m; ++p) {
        if (fluid.var(p) > 0.0) {
            gSlot[static_cast<std::size_t>(p)] = m + nv++;
        }
    }
    Matrix M = Matrix::Zero(m + nv, m + nv);
    for (Index p = 0; p < m; ++p) {
        const Index g = gSlot[static_cast<std::size_t>(p)];
        if (g >= 0) {
            M(p, g) = 1.0;
            const double scale = 2.0 / fluid.var(p);
            M.row(g).head(m) = -scale * Qd.row(p);
            M(g, g) = scale * fluid.drift(p);
        } else {
            M.row(p).head(m) = Qd.row(p) / fluid.drift(p);
        }
    }
    return M;
}

inline void check_axis_gap(const Eigen::VectorXcd& eigenvalues) {
    for (Index i = 0; i < eigenvalues.size(); ++i) {
        if (std::abs(eigenvalues(i).real()) <= -linalg::kStableThreshold) {
            throw Error(ErrorCode::DefectiveSpectrum, "root on the imaginary axis (Re z = " +
                                                          std::to_string(eigenvalues(i).real()) + ")");
        }
    }
}

inline Matrix schur_generator(const FluidModel& fluid, double delta, const std::vector<Index>& up) {
    const auto r = static_cast<Index>(up.size());
    const linalg::OrderedSchur schur = linalg::stable_schur(companion(fluid, delta));
    check_axis_gap(schur.eigenvalues);
    if (schur.stable_dim != r) {
        throw Error(ErrorCode::DefectiveSpectrum, "stable subspace has dimension " +
                                                      std::to_string(schur.stable_dim) +
                                                      ", expected " + std::to_string(r));
    }
    Matrix Wup(r, r);
    for (Index k = 0; k < r; ++k) {
        Wup.row(k) = schur.basis.row(up[static_cast<std::size_t>(k)]);
    }
    const double cond = linalg::condition_number(Wup);
    if (!(cond <= kMaxEigenvectorCondition)) {
        throw Error(ErrorCode::DefectiveSpectrum,
                    "stable invariant subspace is degenerate on the up-phases (condition " +
                        std::to_string(cond) + ")");
    }
    // U Wup = Wup S
    const Matrix rhs = (Wup * schur.block).transpose();
    return Wup.transpose().partialPivLu().solve(rhs).transpose();
}

inline Matrix spectral_generator(const FluidModel& fluid, double delta, const std::vector<Index>& up);

} // namespace passage_detail

/// All roots with Re z < 0 of the quadratic pencil and their eigenvectors.
/// Throws DefectiveSpectrum when the root count differs from the number of
/// up-phases or the up-phase block of the eigenvectors is ill-conditioned.
inline SpectralSolution spectral_solve(const FluidModel& fluid, double delta) {
    passage_detail::check_fluid(fluid, delta);
    const std::vector<Index> up = fluid.up_phases();
    const auto r = static_cast<Index>(up.size());
    if (r == 0) {
        throw Error(ErrorCode::NoUpPhases, "fluid model has no up-phases");
    }
    const Index m = fluid.size();
    Eigen::EigenSolver<Matrix> es(passage_detail::companion(fluid, delta), true);
    if (es.info() != Eigen::Success) {
        throw Error(ErrorCode::DefectiveSpectrum, "eigenvalue iteration did not converge");
    }
    passage_detail::check_axis_gap(es.eigenvalues());

    std::vector<Index> stable;
    for (Index i = 0; i < es.eigenvalues().size(); ++i) {
        if (es.eigenvalues()(i).real() < linalg::kStableThreshold) {
            stable.push_back(i);
        }
    }
    if (static_cast<Index>(stable.size()) != r) {
        throw Error(ErrorCode::DefectiveSpectrum, "found " + std::to_string(stable.size()) +
                                                      " stable roots, expected " + std::to_string(r));
    }
    SpectralSolution out;
    out.eigenvalues.resize(r);
    out.eigenvectors.resize(m, r);
    Eigen::MatrixXcd Hup(r, r);
    const Eigen::MatrixXcd vectors = es.eigenvectors();
    for (Index c = 0; c < r; ++c) {
        const Index col = stable[static_cast<std::size_t>(c)];
        out.eigenvalues(c) = es.eigenvalues()(col);
        out.eigenvectors.col(c) = vectors.col(col).head(m);
        for (Index k = 0; k < r; ++k) {
            Hup(k, c) = out.eigenvectors(up[static_cast<std::size_t>(k)], c);
        }
        const double norm = Hup.col(c).norm();
        if (norm > 0.0) {
            Hup.col(c) /= norm;
            out.eigenvectors.col(c) /= norm;
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Hup);
    const auto& s = svd.singularValues();
    const double cond = s(r - 1) > 0.0 ? s(0) / s(r - 1) : std::numeric_limits<double>::infinity();
    if (!(cond <= passage_detail::kSpectralConditionLimit)) {
        throw Error(ErrorCode::DefectiveSpectrum,
                    "eigenvector matrix on the up-phases is ill-conditioned (condition " +
                        std::to_string(cond) + ")");
    }
    return out;
}

namespace passage_detail {

inline Matrix spectral_generator(const FluidModel& fluid, double delta, const std::vector<Index>& up) {
    const SpectralSolution sol = spectral_solve(fluid, delta);
    const auto r = static_cast<Index>(up.size());
    Eigen::MatrixXcd Hup(r, r);
    for (Index k = 0; k < r; ++k) {
        Hup.row(k) = sol.eigenvectors.row(up[static_cast<std::size_t>(k)]);
    }
    // U Hup = Hup diag(z)
    const Eigen::MatrixXcd rhs = (Hup * sol.eigenvalues.asDiagonal()).transpose();
    const Eigen::MatrixXcd Uc = Hup.transpose().partialPivLu().solve(rhs).transpose();
    return Uc.real();
}

/// U for the given discount, spectral first and ordered Schur when the
/// eigenvectors are not usable. Returns the method actually used.
inline Matrix raw_generator(const FluidModel& fluid, double delta, const std::vector<Index>& up,
                            PassageMethod& method) {
    try {
        method = PassageMethod::Spectral;
        return spectral_generator(fluid, delta, up);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DefectiveSpectrum) {
            throw;
        }
    }
    method = PassageMethod::Schur;
    return schur_generator(fluid, delta, up);
}

/// Clamps round-off so that U is a sub-generator; returns its exit vector.
inline Vector sanitize(Matrix& U) {
    const Index r = U.rows();
    Vector exit(r);
    for (Index i = 0; i < r; ++i) {
        double off = 0.0;
        for (Index j = 0; j < r; ++j) {
            if (j == i) {
                continue;
            }
            if (U(i, j) < -kSubGeneratorTolerance) {
                throw Error(ErrorCode::DefectiveSpectrum,
                            "first-passage generator has a negative off-diagonal entry (" +
                                std::to_string(U(i, j)) + ")");
            }
            U(i, j) = std::max(U(i, j), 0.0);
            off += U(i, j);
        }
        double ui = -(U(i, i) + off);
        if (ui < -kSubGeneratorTolerance) {
            throw Error(ErrorCode::DefectiveSpectrum,
                        "first-passage generator has a negative exit rate (" + std::to_string(ui) + ")");
        }
        ui = std::max(ui, 0.0);
        U(i, i) = -(off + ui);
        exit(i) = ui;
    }
    return exit;
}

} // namespace passage_detail

/// First-passage generator U(delta) of `fluid`, with delta-killing on the
/// real-time phases. The returned exit vector is always the undiscounted one.
inline PassageOperator compute_passage(const FluidModel& fluid, double delta) {
    passage_detail::check_fluid(fluid, delta);
    const std::vector<Index> up = fluid.up_phases();
    if (up.empty()) {
        throw Error(ErrorCode::NoUpPhases, "fluid model has no up-phases");
    }
    PassageOperator out;
    out.upIndex = up;
    out.delta = delta;
    out.U = passage_detail::raw_generator(fluid, delta, up, out.method);
    out.u = passage_detail::sanitize(out.U);
    if (delta > 0.0) {
        PassageMethod ignored{};
        Matrix U0 = passage_detail::raw_generator(fluid, 0.0, up, ignored);
        out.u = passage_detail::sanitize(U0);
    }
    return out;
}

} // namespace phwh
