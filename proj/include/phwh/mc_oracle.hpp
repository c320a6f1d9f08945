#pragma once

// Exact-maximum Monte Carlo for a jump diffusion over a phase-type horizon.
// The path is simulated event by event (horizon phase changes and jump
// epochs); on each Brownian stretch between events the maximum is drawn
// exactly from the Brownian-bridge maximum law given both endpoints.

#include <phwh/errors.hpp>
#include <phwh/fluid_embedding.hpp>
#include <phwh/ph_core.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <thread>
#include <vector>

namespace phwh {

struct PhaseSegment {
    Index phase = 0;
    double start = 0.0;
    double end = 0.0;
};

struct PhasePath {
    double tau = 0.0;
    std::vector<PhaseSegment> segments;
};

struct PathSample {
    double tau = 0.0;
    double sup = 0.0;
    double xTau = 0.0;
    Index phaseAtSup = 0;
    Index phaseAtEnd = 0;
    /// Time of the supremum; NaN unless SampleOptions::trackSigmaBar is set.
    double sigmaBar = std::numeric_limits<double>::quiet_NaN();
};

struct SampleOptions {
    /// Locate the time of the supremum by splitting each Brownian stretch into
    /// `subintervals` bridge pieces. The supremum itself stays exact.
    bool trackSigmaBar = false;
    int subintervals = 1024;
};

using PathRng = std::mt19937_64;

/// Independent generator for path `index` of a run seeded with `seed`; the
/// stream depends only on (seed, index), never on thread assignment.
inline PathRng path_rng(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 finalizer over the pair
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return PathRng(mix(mix(seed) ^ index));
}

namespace mc_detail {

template <class Rng>
double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

template <class Rng>
double exponential(Rng& rng, double rate) {
    return std::exponential_distribution<double>(rate)(rng);
}

template <class Rng>
double normal(Rng& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

template <class Rng>
Index draw_initial(const PhaseType& ph, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    const Index n = ph.size();
    for (Index i = 0; i < n; ++i) {
        acc += ph.alpha()(i);
        if (u < acc) {
            return i;
        }
    }
    for (Index i = n - 1; i >= 0; --i) {
        if (ph.alpha()(i) > 0.0) {
            return i;
        }
    }
    return n - 1;
}

/// Next phase after leaving `phase`, or -1 for absorption.
template <class Rng>
Index draw_next(const PhaseType& ph, Index phase, Rng& rng) {
    const double total = -ph.T()(phase, phase);
    const double u = uniform01(rng) * total;
    double acc = 0.0;
    Index last = -1;
    for (Index j = 0; j < ph.size(); ++j) {
        if (j == phase) {
            continue;
        }
        const double rate = ph.T()(phase, j);
        if (rate > 0.0) {
            acc += rate;
            last = j;
            if (u < acc) {
                return j;
            }
        }
    }
    if (ph.exit()(phase) > 0.0) {
        return -1;
    }
    return last;
}

template <class Rng>
double sample_ph_time(const PhaseType& ph, Rng& rng) {
    double t = 0.0;
    Index phase = draw_initial(ph, rng);
    while (phase >= 0) {
        t += exponential(rng, -ph.T()(phase, phase));
        phase = draw_next(ph, phase, rng);
    }
    return t;
}

/// Maximum of a Brownian bridge from a to b over a stretch with variance
/// `spread` = sigma^2 dt, by inversion of P(M >= m) = exp(-2 (m-a)(m-b) / spread).
template <class Rng>
double bridge_max(double a, double b, double spread, Rng& rng) {
    const double u = 1.0 - uniform01(rng);  // (0, 1]
    return 0.5 * (a + b + std::sqrt((b - a) * (b - a) - 2.0 * spread * std::log(u)));
}

struct RunningMax {
    double value = 0.0;
    Index phase = 0;
    double time = 0.0;
};

template <class Rng>
void brownian_stretch(double& x, double start, double dt, Index phase, const JumpDiffusionModel& model,
                      const SampleOptions& opt, RunningMax& best, Rng& rng) {
    const double sigma = std::sqrt(model.sigma2);
    const double a = x;
    const double b = a + model.mu * dt + sigma * std::sqrt(dt) * normal(rng);
    if (!opt.trackSigmaBar) {
        const double m = bridge_max(a, b, model.sigma2 * dt, rng);
        if (m > best.value) {
            best = {m, phase, std::numeric_limits<double>::quiet_NaN()};
        }
    } else {
        // bridge skeleton on a uniform grid, exact maxima in between
        const int pieces = std::max(1, opt.subintervals);
        const double h = dt / pieces;
        double v = a;
        for (int p = 0; p < pieces; ++p) {
            double next = b;
            if (p + 1 < pieces) {
                const double remaining = dt - p * h;
                next = v + (b - v) * h / remaining +
                       sigma * std::sqrt(h * (remaining - h) / remaining) * normal(rng);
            }
            const double m = bridge_max(v, next, model.sigma2 * h, rng);
            if (m > best.value) {
                best = {m, phase, start + (p + 0.5) * h};
            }
            v = next;
        }
    }
    x = b;
}

} // namespace mc_detail

/// Trajectory of the horizon's phase process up to absorption.
template <class Rng>
PhasePath sample_phase_path(const PhaseType& horizon, Rng& rng) {
    PhasePath out;
    double t = 0.0;
    Index phase = mc_detail::draw_initial(horizon, rng);
    while (phase >= 0) {
        const double hold = mc_detail::exponential(rng, -horizon.T()(phase, phase));
        out.segments.push_back({phase, t, t + hold});
        t += hold;
        phase = mc_detail::draw_next(horizon, phase, rng);
    }
    out.tau = t;
    return out;
}

/// One path of X over the horizon, simulated directly (not via the fluid
/// embedding). X_{0-} = 0 and ties for the maximum go to the earliest stretch.
template <class Rng>
PathSample sample_path(const JumpDiffusionModel& model, const PhaseType& horizon, Rng& rng,
                       const SampleOptions& opt = {}) {
    const double jumpRate = model.lamPlus + model.lamMinus;
    double x = 0.0;
    double t = 0.0;
    Index phase = mc_detail::draw_initial(horizon, rng);
    mc_detail::RunningMax best{0.0, phase, 0.0};
    PathSample out;
    while (true) {
        const double segEnd = t + mc_detail::exponential(rng, -horizon.T()(phase, phase));
        while (true) {
            const double gap = jumpRate > 0.0 ? mc_detail::exponential(rng, jumpRate)
                                               : std::numeric_limits<double>::infinity();
            if (t + gap >= segEnd) {
                mc_detail::brownian_stretch(x, t, segEnd - t, phase, model, opt, best, rng);
                t = segEnd;
                break;
            }
            mc_detail::brownian_stretch(x, t, gap, phase, model, opt, best, rng);
            t += gap;
            // the pre-jump value closed the stretch above; the post-jump
            // value opens the next one
            if (mc_detail::uniform01(rng) * jumpRate < model.lamPlus) {
                x += mc_detail::sample_ph_time(*model.phPlus, rng);
            } else {
                x -= mc_detail::sample_ph_time(*model.phMinus, rng);
            }
        }
        const Index next = mc_detail::draw_next(horizon, phase, rng);
        if (next < 0) {
            break;
        }
        phase = next;
    }
    out.tau = t;
    out.xTau = x;
    out.sup = best.value;
    out.phaseAtSup = best.phase;
    out.phaseAtEnd = phase;
    out.sigmaBar = opt.trackSigmaBar ? best.time : std::numeric_limits<double>::quiet_NaN();
    return out;
}

struct SimConfig {
    std::uint64_t seed = 0;
    std::uint64_t nPaths = 1;
    /// Edges for the supremum; the last edge may be +infinity.
    std::vector<double> binEdgesX;
    /// Edges for the drawdown sup - X_tau; the last edge may be +infinity.
    std::vector<double> binEdgesY;
    unsigned threads = 1;

    void validate() const {
        if (nPaths < 1) {
            throw Error(ErrorCode::InvalidArgument, "nPaths must be >= 1");
        }
        if (threads < 1) {
            throw Error(ErrorCode::InvalidArgument, "threads must be >= 1");
        }
        for (const auto* edges : {&binEdgesX, &binEdgesY}) {
            if (edges->size() < 2) {
                throw Error(ErrorCode::InvalidArgument, "need at least two bin edges");
            }
            for (std::size_t i = 1; i < edges->size(); ++i) {
                if (!((*edges)[i] > (*edges)[i - 1])) {
                    throw Error(ErrorCode::InvalidArgument, "bin edges must be strictly increasing");
                }
            }
        }
    }
};

/// Runs fn(begin, end) over contiguous blocks of path indices on `threads`
/// workers. The block layout depends only on nPaths and threads.
template <class Fn>
void for_each_path_block(std::uint64_t nPaths, unsigned threads, Fn&& fn) {
    const unsigned workers = static_cast<unsigned>(
        std::max<std::uint64_t>(1, std::min<std::uint64_t>(threads, nPaths)));
    if (workers == 1) {
        fn(0u, std::uint64_t{0}, nPaths);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::uint64_t chunk = (nPaths + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::uint64_t begin = std::min(nPaths, w * chunk);
        const std::uint64_t end = std::min(nPaths, begin + chunk);
        pool.emplace_back([&fn, w, begin, end] { fn(w, begin, end); });
    }
    for (auto& th : pool) {
        th.join();
    }
}

/// All path samples of a run, in path-index order.
inline std::vector<PathSample> simulate(const JumpDiffusionModel& model, const PhaseType& horizon,
                                        std::uint64_t seed, std::uint64_t nPaths, unsigned threads = 1,
                                        const SampleOptions& opt = {}) {
    model.validate();
    std::vector<PathSample> out(nPaths);
    for_each_path_block(nPaths, threads, [&](unsigned, std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t p = begin; p < end; ++p) {
            PathRng rng = path_rng(seed, p);
            out[p] = sample_path(model, horizon, rng, opt);
        }
    });
    return out;
}

/// Counts over (x-bin, y-bin, k, j) with x = sup, y = sup - X_tau, k the
/// horizon phase at the supremum and j the terminal phase.
class JointHistogram {
public:
    JointHistogram() = default;
    JointHistogram(std::vector<double> edgesX, std::vector<double> edgesY, Index phases)
        : edgesX_(std::move(edgesX)), edgesY_(std::move(edgesY)), phases_(phases),
          counts_(static_cast<std::size_t>(bins_x() * bins_y() * phases * phases), 0),
          supPhase_(static_cast<std::size_t>(phases), 0), endPhase_(static_cast<std::size_t>(phases), 0) {}

    [[nodiscard]] Index bins_x() const { return static_cast<Index>(edgesX_.size()) - 1; }
    [[nodiscard]] Index bins_y() const { return static_cast<Index>(edgesY_.size()) - 1; }
    [[nodiscard]] Index phases() const { return phases_; }
    [[nodiscard]] const std::vector<double>& edges_x() const { return edgesX_; }
    [[nodiscard]] const std::vector<double>& edges_y() const { return edgesY_; }
    [[nodiscard]] std::uint64_t paths() const { return paths_; }
    [[nodiscard]] std::uint64_t outside() const { return outside_; }

    void add(const PathSample& s) {
        ++paths_;
        supPhase_[static_cast<std::size_t>(s.phaseAtSup)]++;
        endPhase_[static_cast<std::size_t>(s.phaseAtEnd)]++;
        const Index bx = bin_of(edgesX_, s.sup);
        const Index by = bin_of(edgesY_, s.sup - s.xTau);
        if (bx < 0 || by < 0) {
            ++outside_;
            return;
        }
        counts_[index(bx, by, s.phaseAtSup, s.phaseAtEnd)]++;
    }

    void merge(const JointHistogram& other) {
        for (std::size_t i = 0; i < counts_.size(); ++i) {
            counts_[i] += other.counts_[i];
        }
        for (std::size_t i = 0; i < supPhase_.size(); ++i) {
            supPhase_[i] += other.supPhase_[i];
            endPhase_[i] += other.endPhase_[i];
        }
        paths_ += other.paths_;
        outside_ += other.outside_;
    }

    [[nodiscard]] std::uint64_t count(Index bx, Index by, Index k, Index j) const {
        return counts_[index(bx, by, k, j)];
    }
    [[nodiscard]] double frequency(Index bx, Index by, Index k, Index j) const {
        return static_cast<double>(count(bx, by, k, j)) / static_cast<double>(paths_);
    }
    /// Binomial standard error of frequency().
    [[nodiscard]] double standard_error(Index bx, Index by, Index k, Index j) const {
        return binomial_se(frequency(bx, by, k, j));
    }

    [[nodiscard]] std::uint64_t sup_phase_count(Index k) const { return supPhase_[static_cast<std::size_t>(k)]; }
    [[nodiscard]] std::uint64_t end_phase_count(Index j) const { return endPhase_[static_cast<std::size_t>(j)]; }
    [[nodiscard]] double sup_phase_frequency(Index k) const {
        return static_cast<double>(sup_phase_count(k)) / static_cast<double>(paths_);
    }
    [[nodiscard]] double binomial_se(double p) const {
        return std::sqrt(p * (1.0 - p) / static_cast<double>(paths_));
    }

private:
    static Index bin_of(const std::vector<double>& edges, double v) {
        if (v < edges.front() || !(v < edges.back())) {
            return -1;
        }
        const auto it = std::upper_bound(edges.begin(), edges.end(), v);
        return static_cast<Index>(it - edges.begin()) - 1;
    }
    [[nodiscard]] std::size_t index(Index bx, Index by, Index k, Index j) const {
        return static_cast<std::size_t>(((bx * bins_y() + by) * phases_ + k) * phases_ + j);
    }

    std::vector<double> edgesX_;
    std::vector<double> edgesY_;
    Index phases_ = 0;
    std::vector<std::uint64_t> counts_;
    std::vector<std::uint64_t> supPhase_;
    std::vector<std::uint64_t> endPhase_;
    std::uint64_t paths_ = 0;
    std::uint64_t outside_ = 0;
};

inline JointHistogram estimate_joint(const JumpDiffusionModel& model, const PhaseType& horizon,
                                     const SimConfig& cfg, const SampleOptions& opt = {}) {
    cfg.validate();
    model.validate();
    const unsigned workers = static_cast<unsigned>(
        std::max<std::uint64_t>(1, std::min<std::uint64_t>(cfg.threads, cfg.nPaths)));
    std::vector<JointHistogram> partial(workers,
                                        JointHistogram(cfg.binEdgesX, cfg.binEdgesY, horizon.size()));
    for_each_path_block(cfg.nPaths, cfg.threads, [&](unsigned w, std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t p = begin; p < end; ++p) {
            PathRng rng = path_rng(cfg.seed, p);
            partial[w].add(sample_path(model, horizon, rng, opt));
        }
    });
    JointHistogram total = partial.front();
    for (std::size_t w = 1; w < partial.size(); ++w) {
        total.merge(partial[w]);
    }
    return total;
}

} // namespace phwh
