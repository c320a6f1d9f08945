#pragma once

// Embedding of a Brownian motion with two-sided phase-type jumps, run over a
// phase-type horizon, into a terminating Markov-modulated Brownian motion:
// every jump is replaced by a linear stretch of slope +-1 whose duration has
// the jump's phase-type law.

#include <phwh/errors.hpp>
#include <phwh/linalg.hpp>
#include <phwh/ph_core.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace phwh {

struct JumpDiffusionModel {
    double mu = 0.0;
    double sigma2 = 1.0;
    double lamPlus = 0.0;
    std::optional<PhaseType> phPlus;
    double lamMinus = 0.0;
    std::optional<PhaseType> phMinus;

    static JumpDiffusionModel brownian(double mu, double sigma2) {
        JumpDiffusionModel m;
        m.mu = mu;
        m.sigma2 = sigma2;
        return m;
    }

    [[nodiscard]] Index n_plus() const { return phPlus ? phPlus->size() : 0; }
    [[nodiscard]] Index n_minus() const { return phMinus ? phMinus->size() : 0; }
    [[nodiscard]] bool is_pure_brownian() const { return !phPlus && !phMinus; }

    void validate() const {
        if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
            throw Error(ErrorCode::InvalidArgument, "sigma2 must be positive");
        }
        if (!std::isfinite(mu)) {
            throw Error(ErrorCode::InvalidArgument, "mu must be finite");
        }
        auto check_side = [](double rate, const std::optional<PhaseType>& ph, const char* side) {
            if (!(rate >= 0.0) || !std::isfinite(rate)) {
                throw Error(ErrorCode::InvalidArgument, std::string(side) + " jump rate must be >= 0");
            }
            if ((rate == 0.0) != !ph.has_value()) {
                throw Error(ErrorCode::InvalidArgument,
                            std::string(side) +
                                " jump law must be given exactly when the jump rate is positive");
            }
        };
        check_side(lamPlus, phPlus, "up");
        check_side(lamMinus, phMinus, "down");
    }

    /// Model of -X: drift negated, up- and down-jump data swapped.
    [[nodiscard]] JumpDiffusionModel negated() const {
        JumpDiffusionModel m;
        m.mu = -mu;
        m.sigma2 = sigma2;
        m.lamPlus = lamMinus;
        m.phPlus = phMinus;
        m.lamMinus = lamPlus;
        m.phMinus = phPlus;
        return m;
    }
};

enum class PhaseKind { Brownian, UpJump, DownJump };

/// Horizon phase `i` (0-based) and, for jump phases, the jump phase `j`.
struct PhaseLabel {
    PhaseKind kind = PhaseKind::Brownian;
    Index i = 0;
    Index j = -1;

    friend bool operator==(const PhaseLabel&, const PhaseLabel&) = default;
};

/// Terminating Markov-modulated Brownian motion. Phase order: the n Brownian
/// phases, then n*n+ up-jump phases grouped by horizon phase, then n*n-
/// down-jump phases grouped the same way.
struct FluidModel {
    Matrix Q;
    Vector drift;
    Vector var;
    std::vector<char> realTimeMask;
    std::vector<PhaseLabel> labels;
    Index horizonPhases = 0;

    [[nodiscard]] Index size() const { return Q.rows(); }

    /// Killing rates -Q 1.
    [[nodiscard]] Vector killing() const { return -Q.rowwise().sum(); }

    /// Q with additional killing at rate delta on the real-time phases.
    [[nodiscard]] Matrix discounted_generator(double delta) const {
        Matrix out = Q;
        for (Index p = 0; p < size(); ++p) {
            if (realTimeMask[static_cast<std::size_t>(p)]) {
                out(p, p) -= delta;
            }
        }
        return out;
    }

    /// Phases that can reach a new maximum: positive variance or positive drift.
    [[nodiscard]] std::vector<Index> up_phases() const {
        std::vector<Index> out;
        for (Index p = 0; p < size(); ++p) {
            if (var(p) > 0.0 || drift(p) > 0.0) {
                out.push_back(p);
            }
        }
        return out;
    }
};

inline FluidModel embed(const JumpDiffusionModel& model, const PhaseType& horizon) {
    model.validate();
    const Index n = horizon.size();
    const Index np = model.n_plus();
    const Index nm = model.n_minus();
    const Index m = n * (1 + np + nm);

    FluidModel f;
    f.horizonPhases = n;
    f.Q = Matrix::Zero(m, m);
    f.drift = Vector::Zero(m);
    f.var = Vector::Zero(m);
    f.realTimeMask.assign(static_cast<std::size_t>(m), 0);
    f.labels.resize(static_cast<std::size_t>(m));

    auto up_index = [&](Index i, Index j) { return n + i * np + j; };
    auto down_index = [&](Index i, Index j) { return n + n * np + i * nm + j; };

    const Matrix& T = horizon.T();
    for (Index i = 0; i < n; ++i) {
        f.labels[static_cast<std::size_t>(i)] = {PhaseKind::Brownian, i, -1};
        f.drift(i) = model.mu;
        f.var(i) = model.sigma2;
        f.realTimeMask[static_cast<std::size_t>(i)] = 1;
        for (Index k = 0; k < n; ++k) {
            if (k != i) {
                f.Q(i, k) = T(i, k);
            }
        }
        double leave = -T(i, i);
        if (model.phPlus) {
            const PhaseType& jp = *model.phPlus;
            for (Index j = 0; j < np; ++j) {
                f.Q(i, up_index(i, j)) = model.lamPlus * jp.alpha()(j);
            }
            leave += model.lamPlus;
            for (Index j = 0; j < np; ++j) {
                const Index p = up_index(i, j);
                f.labels[static_cast<std::size_t>(p)] = {PhaseKind::UpJump, i, j};
                f.drift(p) = 1.0;
                for (Index k = 0; k < np; ++k) {
                    f.Q(p, up_index(i, k)) = jp.T()(j, k);
                }
                f.Q(p, i) = jp.exit()(j);
            }
        }
        if (model.phMinus) {
            const PhaseType& jm = *model.phMinus;
            for (Index j = 0; j < nm; ++j) {
                f.Q(i, down_index(i, j)) = model.lamMinus * jm.alpha()(j);
            }
            leave += model.lamMinus;
            for (Index j = 0; j < nm; ++j) {
                const Index p = down_index(i, j);
                f.labels[static_cast<std::size_t>(p)] = {PhaseKind::DownJump, i, j};
                f.drift(p) = -1.0;
                for (Index k = 0; k < nm; ++k) {
                    f.Q(p, down_index(i, k)) = jm.T()(j, k);
                }
                f.Q(p, i) = jm.exit()(j);
            }
        }
        f.Q(i, i) = -leave;
    }
    return f;
}

/// Embedding of -X over the same horizon; upward passage of the result is
/// downward passage of X.
inline FluidModel embed_negated(const JumpDiffusionModel& model, const PhaseType& horizon) {
    return embed(model.negated(), horizon);
}

} // namespace phwh
