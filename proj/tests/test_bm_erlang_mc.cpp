#include "support.hpp"

#include <phwh/bm_erlang.hpp>
#include <phwh/factorization.hpp>
#include <phwh/mc_oracle.hpp>
#include <phwh/verify.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace phwh;

// ---- BM-Erlang closed forms -----------------------------------------------

TEST(BmErlang, WeightBaseCases) {
    const BmErlangWeights w = compute_weights(3, 1.0, 0.3, 1.2);
    EXPECT_DOUBLE_EQ(w.pBar(1, 1), 1.0);
    EXPECT_DOUBLE_EQ(w.pUnder(1, 1), 1.0);
    EXPECT_DOUBLE_EQ(w.pBar(1, 2), 0.0);
    EXPECT_NEAR(w.pBar(2, 2), w.thetaPlus, 1e-15);
    EXPECT_NEAR(w.pUnder(2, 2), w.thetaMinus, 1e-15);
}

TEST(BmErlang, SymmetricWhenDriftless) {
    const BmErlangWeights w = compute_weights(4, 0.8, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(w.thetaPlus, 0.5);
    EXPECT_DOUBLE_EQ(w.thetaMinus, 0.5);
    for (int k = 1; k <= 4; ++k) {
        for (int i = 1; i <= k; ++i) {
            EXPECT_DOUBLE_EQ(w.pBar(i, k), w.pUnder(i, k));
        }
        EXPECT_DOUBLE_EQ(sup_density_erlang(w, 0.9, k), inf_density_erlang(w, 0.9, k));
    }
}

TEST(BmErlang, OneStageIsExponential) {
    const BmErlangWeights w = compute_weights(1, 0.7, 0.2, 1.5);
    for (double x : {0.1, 1.0, 3.0}) {
        EXPECT_NEAR(sup_density_erlang(w, x, 1), w.lamPlus * std::exp(-w.lamPlus * x), 1e-14);
        EXPECT_NEAR(inf_density_erlang(w, x, 1), w.lamMinus * std::exp(-w.lamMinus * x), 1e-14);
        EXPECT_NEAR(joint_density_erlang(w, x, 0.5, 1),
                    w.lamPlus * std::exp(-w.lamPlus * x) * w.lamMinus * std::exp(-w.lamMinus * 0.5), 1e-14);
    }
}

TEST(BmErlang, TwoStagesLastPhase) {
    const BmErlangWeights w = compute_weights(2, 1.0, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(w.qUnder[1], 1.0);
    EXPECT_NEAR(sup_density_erlang(w, 0.8, 2), 0.5 * erlang_density(2, w.lamPlus, 0.8), 1e-15);
}

TEST(BmErlang, PhaseWeightsSumToOne) {
    for (int n = 1; n <= 6; ++n) {
        const BmErlangWeights w = compute_weights(n, 1.3, -0.4, 0.7);
        double sum = 0.0;
        for (int k = 1; k <= n; ++k) {
            sum += phase_at_sup_erlang(w, k);
        }
        EXPECT_NEAR(sum, 1.0, 1e-12) << "n=" << n;
    }
}

TEST(BmErlang, MatchesMatrixPipeline) {
    const auto dev = verify::bm_erlang_deviation(0.3, 1.0, 3, 1.0, verify::linspace(0.0, 4.0, 13));
    EXPECT_LE(dev.sup, 1e-8);
    EXPECT_LE(dev.inf, 1e-8);
    EXPECT_LE(dev.joint, 1e-8);
    EXPECT_LE(dev.phaseAtSup, 1e-8);
}

TEST(BmErlang, StageOutOfRange) {
    const BmErlangWeights w = compute_weights(2, 1.0, 0.0, 1.0);
    EXPECT_THROW((void)sup_density_erlang(w, 1.0, 3), Error);
    EXPECT_THROW((void)joint_density_erlang(w, 1.0, 1.0, 0), Error);
    EXPECT_THROW(compute_weights(0, 1.0, 0.0, 1.0), Error);
}

// ---- Monte Carlo oracle ---------------------------------------------------

TEST(PhasePath, ErlangVisitsPhasesInOrder) {
    PathRng rng = path_rng(1, 0);
    for (int rep = 0; rep < 100; ++rep) {
        const PhasePath p = sample_phase_path(erlang(2, 1.0), rng);
        ASSERT_EQ(p.segments.size(), 2u);
        EXPECT_EQ(p.segments[0].phase, 0);
        EXPECT_EQ(p.segments[1].phase, 1);
        EXPECT_EQ(p.segments[0].start, 0.0);
        EXPECT_EQ(p.segments[0].end, p.segments[1].start);
        EXPECT_EQ(p.segments[1].end, p.tau);
    }
}

TEST(PhasePath, ExponentialMeanAndKs) {
    const PhaseType h = exponential(2.0);
    const std::size_t n = 200000;
    std::vector<double> taus(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        PathRng rng = path_rng(9, i);
        taus[i] = sample_phase_path(h, rng).tau;
        mean += taus[i];
    }
    mean /= static_cast<double>(n);
    EXPECT_LE(std::abs(mean - 0.5), 4.0 * 0.5 / std::sqrt(static_cast<double>(n)));
    EXPECT_LE(verify::ks_distance(taus, h), verify::ks_critical(n, 0.01));
}

TEST(SamplePath, SupremumTailOfDriftlessBrownian) {
    const auto samples = simulate(JumpDiffusionModel::brownian(0.0, 1.0), exponential(0.5), 21, 200000);
    double hits = 0.0;
    for (const auto& s : samples) {
        hits += s.sup > 1.0 ? 1.0 : 0.0;
        EXPECT_GE(s.sup, std::max(0.0, s.xTau));
        EXPECT_TRUE(std::isnan(s.sigmaBar));
    }
    const double n = static_cast<double>(samples.size());
    const double p = std::exp(-1.0);
    EXPECT_LE(std::abs(hits / n - p), 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST(SamplePath, SeedDeterminesSamples) {
    const JumpDiffusionModel m = testkit::exponential_jumps(0.1, 1.0, 0.5, 2.0, 0.4, 1.5);
    const auto a = simulate(m, erlang(2, 1.0), 5, 500, 1);
    const auto b = simulate(m, erlang(2, 1.0), 5, 500, 3);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].sup, b[i].sup);
        EXPECT_EQ(a[i].xTau, b[i].xTau);
        EXPECT_EQ(a[i].phaseAtSup, b[i].phaseAtSup);
    }
}

TEST(SamplePath, TracksTimeOfSupremum) {
    SampleOptions opt;
    opt.trackSigmaBar = true;
    opt.subintervals = 64;
    PathRng rng = path_rng(3, 0);
    for (int rep = 0; rep < 50; ++rep) {
        const PathSample s = sample_path(JumpDiffusionModel::brownian(0.0, 1.0), erlang(2, 1.0), rng, opt);
        EXPECT_GE(s.sigmaBar, 0.0);
        EXPECT_LE(s.sigmaBar, s.tau);
    }
}

TEST(EstimateJoint, PhaseAtSupAgreesWithAnalytic) {
    SimConfig cfg;
    cfg.seed = 17;
    cfg.nPaths = 100000;
    cfg.binEdgesX = verify::linspace(0.0, 5.0, 11);
    cfg.binEdgesY = verify::linspace(0.0, 5.0, 11);
    cfg.threads = 2;
    const PhaseType h = erlang(2, 1.0);
    const JumpDiffusionModel m = JumpDiffusionModel::brownian(0.0, 1.0);
    const JointHistogram hist = estimate_joint(m, h, cfg);
    EXPECT_EQ(hist.paths(), cfg.nPaths);

    std::uint64_t total = hist.outside();
    for (Index bx = 0; bx < hist.bins_x(); ++bx) {
        for (Index by = 0; by < hist.bins_y(); ++by) {
            for (Index k = 0; k < 2; ++k) {
                for (Index j = 0; j < 2; ++j) {
                    total += hist.count(bx, by, k, j);
                }
            }
        }
    }
    EXPECT_EQ(total, cfg.nPaths);

    const FactorizationTables tb = build_tables(m, h, 0.0);
    const verify::McAgreement mc = verify::mc_agreement(tb, hist);
    EXPECT_LE(mc.worstPhaseZ, 4.0);
    EXPECT_GE(mc.coverage(), 0.95);
}

TEST(SimConfig, RejectsBadEdges) {
    SimConfig cfg;
    cfg.binEdgesX = {0.0, 1.0};
    cfg.binEdgesY = {1.0, 0.0};
    EXPECT_THROW(cfg.validate(), Error);
    cfg.binEdgesY = {0.0, std::numeric_limits<double>::infinity()};
    EXPECT_NO_THROW(cfg.validate());
}
