#pragma once

// Random generators shared by the unit and acceptance tests.

#include <phwh/errors.hpp>
#include <phwh/fluid_embedding.hpp>
#include <phwh/ph_core.hpp>

#include <random>

namespace phwh::testkit {

/// Random valid representation with `n` phases. Off-diagonal entries and
/// entries of alpha are zeroed with probability `sparsity`; draws that fail
/// validation are retried.
inline PhaseType random_phase_type(std::mt19937_64& rng, Index n, double sparsity = 0.3) {
    std::uniform_real_distribution<double> rate(0.2, 3.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (;;) {
        Matrix T = Matrix::Zero(n, n);
        RowVector alpha = RowVector::Zero(n);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                if (i != j && u01(rng) >= sparsity) {
                    T(i, j) = rate(rng);
                }
            }
            const double exitRate = u01(rng) < 0.5 ? rate(rng) : 0.0;
            T(i, i) = -(T.row(i).sum() + exitRate);
            alpha(i) = u01(rng) >= sparsity ? u01(rng) : 0.0;
        }
        if (alpha.sum() <= 0.0) {
            continue;
        }
        alpha /= alpha.sum();
        alpha(n - 1) = 1.0 - (alpha.sum() - alpha(n - 1));
        if (alpha(n - 1) < 0.0) {
            continue;
        }
        try {
            return validate({alpha, T});
        } catch (const Error&) {
        }
    }
}

/// Strictly positive probability vector.
inline RowVector random_positive_alpha(std::mt19937_64& rng, Index n) {
    std::uniform_real_distribution<double> w(0.1, 1.0);
    RowVector a(n);
    for (Index i = 0; i < n; ++i) {
        a(i) = w(rng);
    }
    return a / a.sum();
}

/// Jump diffusion with up to `maxJumpPhases` phases on each jump side.
inline JumpDiffusionModel random_model(std::mt19937_64& rng, Index maxJumpPhases = 2) {
    std::uniform_real_distribution<double> mu(-0.5, 0.5);
    std::uniform_real_distribution<double> s2(0.5, 2.0);
    std::uniform_real_distribution<double> lam(0.2, 1.5);
    std::uniform_int_distribution<Index> phases(0, maxJumpPhases);
    JumpDiffusionModel m = JumpDiffusionModel::brownian(mu(rng), s2(rng));
    if (const Index np = phases(rng); np > 0) {
        m.lamPlus = lam(rng);
        m.phPlus = random_phase_type(rng, np, 0.0);
    }
    if (const Index nm = phases(rng); nm > 0) {
        m.lamMinus = lam(rng);
        m.phMinus = random_phase_type(rng, nm, 0.0);
    }
    return m;
}

inline JumpDiffusionModel exponential_jumps(double mu, double sigma2, double lamPlus, double betaPlus,
                                            double lamMinus, double betaMinus) {
    JumpDiffusionModel m = JumpDiffusionModel::brownian(mu, sigma2);
    if (lamPlus > 0.0) {
        m.lamPlus = lamPlus;
        m.phPlus = exponential(betaPlus);
    }
    if (lamMinus > 0.0) {
        m.lamMinus = lamMinus;
        m.phMinus = exponential(betaMinus);
    }
    return m;
}

} // namespace phwh::testkit
