#pragma once

// Numerical self-checks shared by the `verify` command and the test suites.
// Each returns the observed deviation; callers compare against tolerances.

#include <phwh/bm_erlang.hpp>
#include <phwh/factorization.hpp>
#include <phwh/mc_oracle.hpp>
#include <phwh/ph_core.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace phwh::verify {

struct CheckResult {
    std::string name;
    double tolerance = 0.0;
    double observed = 0.0;
    /// Pass when observed <= tolerance, or observed >= tolerance for
    /// lower-bound checks such as MC cell coverage.
    bool lowerBound = false;

    [[nodiscard]] bool passed() const {
        return lowerBound ? observed >= tolerance : observed <= tolerance;
    }
};

inline std::vector<double> linspace(double lo, double hi, int count) {
    std::vector<double> out(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
    }
    return out;
}

/// Entrywise distance between (alpha, T) and its double standard reversal.
inline double reversal_involution_error(const PhaseType& ph) {
    const ReversalResult once = reverse_standard(ph);
    const ReversalResult twice = reverse_standard(once.as_phase_type());
    return std::max((twice.alphaStar - ph.alpha()).cwiseAbs().maxCoeff(),
                    (twice.TStar - ph.T()).cwiseAbs().maxCoeff());
}

/// Largest CDF gap between two representations over `points` equally spaced
/// levels on [0, 5 E tau].
inline double cdf_distance(const PhaseType& a, const PhaseType& b, int points = 20) {
    double worst = 0.0;
    for (double x : linspace(0.0, 5.0 * a.mean(), points)) {
        worst = std::max(worst, std::abs(cdf(a, x) - cdf(b, x)));
    }
    return worst;
}

/// T_ij = 0 <=> T*_ji = 0, t_i = 0 <=> alpha*_i = 0, alpha_i = 0 <=> t*_i = 0.
inline bool sparsity_relations_hold(const PhaseType& ph, const ReversalResult& rev,
                                    const RowVector& base) {
    const double zero = linalg::kZeroThreshold;
    auto is_zero = [zero](double v) { return std::abs(v) <= zero; };
    const Index n = ph.size();
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i != j && is_zero(ph.T()(i, j)) != is_zero(rev.TStar(j, i))) {
                return false;
            }
        }
        if (is_zero(ph.exit()(i)) != is_zero(rev.alphaStar(i))) {
            return false;
        }
        if (is_zero(base(i)) != is_zero(rev.tStar(i))) {
            return false;
        }
    }
    return true;
}

/// Largest gap between conditional downward densities built from two
/// reversal choices, over `ys` and every reachable phase.
inline double reversal_invariance_error(const JumpDiffusionModel& model, const PhaseType& horizon,
                                        const ReversalChoice& first, const ReversalChoice& second,
                                        const std::vector<double>& ys) {
    const FactorizationTables a = build_tables(model, horizon, 0.0, first);
    const FactorizationTables b = build_tables(model, horizon, 0.0, second);
    double worst = 0.0;
    for (Index k = 0; k < a.n; ++k) {
        if (a.cBase(k) == 0.0 || b.cBase(k) == 0.0) {
            continue;
        }
        for (double y : ys) {
            worst = std::max(worst, std::abs(conditional_inf_density(a, y, k) -
                                              conditional_inf_density(b, y, k)));
        }
    }
    return worst;
}

/// Erlang(n, rate) parameters if `ph` is exactly that representation.
inline std::optional<std::pair<int, double>> as_erlang(const PhaseType& ph) {
    const Index n = ph.size();
    const double rate = -ph.T()(0, 0);
    if (ph.alpha()(0) != 1.0) {
        return std::nullopt;
    }
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            const double expected = (i == j) ? -rate : (j == i + 1 ? rate : 0.0);
            if (ph.T()(i, j) != expected) {
                return std::nullopt;
            }
        }
    }
    return std::make_pair(static_cast<int>(n), rate);
}

struct BmErlangDeviation {
    double sup = 0.0;
    double inf = 0.0;
    double joint = 0.0;
    double phaseAtSup = 0.0;
};

/// Matrix pipeline against the closed-form Erlang mixtures on the grid `xs`
/// (used for the supremum, the infimum and both joint coordinates).
inline BmErlangDeviation bm_erlang_deviation(double mu, double sigma2, int n, double lambda,
                                             const std::vector<double>& xs) {
    const PhaseType horizon = erlang(n, lambda);
    const JumpDiffusionModel model = JumpDiffusionModel::brownian(mu, sigma2);
    const FactorizationTables tb = build_tables(model, horizon, 0.0);
    const BmErlangWeights w = compute_weights(n, lambda, mu, sigma2);
    BmErlangDeviation dev;
    for (int k = 1; k <= n; ++k) {
        const Index kk = k - 1;
        dev.phaseAtSup = std::max(dev.phaseAtSup, std::abs(tb.c(kk) - phase_at_sup_erlang(w, k)));
        for (double x : xs) {
            dev.sup = std::max(dev.sup, std::abs(sup_density_mixed(tb, x, kk) - sup_density_erlang(w, x, k)));
            // reversed Erlang runs through the stages backwards: its phase k is stage n-k+1
            const double matrixInf = tb.alphaStarExt.dot(tb.down.phi(x).col(kk)) * tb.down.u(kk);
            dev.inf = std::max(dev.inf, std::abs(matrixInf - inf_density_erlang(w, x, n - k + 1)));
        }
        for (double x : xs) {
            const RowVector upRow = tb.alphaExt * tb.up.phi(x);
            for (double y : xs) {
                const Matrix downPhi = tb.down.phi(y);
                double matrixJoint = 0.0;
                for (Index j = 0; j < n; ++j) {
                    matrixJoint += tb.r(kk) * tb.reversal.alphaStar(j) * upRow(kk) * downPhi(j, kk);
                }
                dev.joint = std::max(dev.joint, std::abs(matrixJoint - joint_density_erlang(w, x, y, k)));
            }
        }
    }
    return dev;
}

struct McAgreement {
    std::size_t eligibleCells = 0;
    std::size_t cellsWithin = 0;
    double worstPhaseZ = 0.0;  ///< largest |freq - c_k| / SE over phases at the supremum

    [[nodiscard]] double coverage() const {
        return eligibleCells == 0 ? 1.0 : static_cast<double>(cellsWithin) / static_cast<double>(eligibleCells);
    }
};

/// Compares histogram cells with at least `minExpected` expected paths
/// against the analytic cell masses, counting those within `zMax` standard
/// errors; also compares the phase-at-supremum frequencies with c_k.
inline McAgreement mc_agreement(const FactorizationTables& tb, const JointHistogram& hist,
                                double zMax = 4.0, double minExpected = 25.0) {
    McAgreement out;
    const auto& ex = hist.edges_x();
    const auto& ey = hist.edges_y();
    const double paths = static_cast<double>(hist.paths());
    for (Index bx = 0; bx < hist.bins_x(); ++bx) {
        for (Index by = 0; by < hist.bins_y(); ++by) {
            for (Index k = 0; k < tb.n; ++k) {
                for (Index j = 0; j < tb.n; ++j) {
                    const double p = joint_cell_mass(tb, ex[static_cast<std::size_t>(bx)], ex[static_cast<std::size_t>(bx + 1)],
                                                     ey[static_cast<std::size_t>(by)], ey[static_cast<std::size_t>(by + 1)], k, j);
                    if (p * paths < minExpected) {
                        continue;
                    }
                    ++out.eligibleCells;
                    const double se = hist.binomial_se(p);
                    if (std::abs(hist.frequency(bx, by, k, j) - p) <= zMax * se) {
                        ++out.cellsWithin;
                    }
                }
            }
        }
    }
    for (Index k = 0; k < tb.n; ++k) {
        const double se = hist.binomial_se(tb.c(k));
        if (se > 0.0) {
            out.worstPhaseZ = std::max(out.worstPhaseZ, std::abs(hist.sup_phase_frequency(k) - tb.c(k)) / se);
        }
    }
    return out;
}

/// Kolmogorov-Smirnov distance between a sample and a phase-type CDF.
inline double ks_distance(std::vector<double> sample, const PhaseType& ph) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(ph, sample[i]);
        worst = std::max({worst, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return worst;
}

/// Asymptotic two-sided KS critical value: 1.6276 / sqrt(n) at 1%, 1.3581 / sqrt(n) at 5%.
inline double ks_critical(std::size_t n, double level) {
    const double c = level <= 0.01 ? 1.6276 : 1.3581;
    return c / std::sqrt(static_cast<double>(n));
}

} // namespace phwh::verify
