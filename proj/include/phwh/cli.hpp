#pragma once

// Command implementations behind the `phwh` executable. Each command reads a
// RunConfig and writes CSV tables into cfg.output.

#include <phwh/bm_erlang.hpp>
#include <phwh/config.hpp>
#include <phwh/csv.hpp>
#include <phwh/errors.hpp>
#include <phwh/factorization.hpp>
#include <phwh/mc_oracle.hpp>
#include <phwh/ph_core.hpp>
#include <phwh/verify.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace phwh::cli {

namespace detail {

inline std::string out_path(const config::RunConfig& cfg, const char* name) {
    return (cfg.output / name).string();
}

inline std::int64_t one_based(Index i) {
    return static_cast<std::int64_t>(i) + 1;
}

inline void write_reverse(const config::RunConfig& cfg) {
    const ReversalResult rev = reverse(*cfg.horizon, cfg.reversal);
    csv::Writer w(out_path(cfg, "reverse.csv"));
    w.line("alpha_star");
    w.row(rev.alphaStar);
    w.line("T_star");
    w.matrix(rev.TStar);
}

inline void write_factorize(const config::RunConfig& cfg) {
    const FactorizationTables tb = build_tables(cfg.model, *cfg.horizon, cfg.delta, cfg.reversal);
    csv::Writer w(out_path(cfg, "factorization.csv"));
    w.row("k", "c", "r", "u", "u_star");
    for (Index k = 0; k < tb.n; ++k) {
        w.row(one_based(k), tb.c(k), tb.r(k), tb.up.u(k), tb.down.u(k));
    }
    csv::Writer wu(out_path(cfg, "U.csv"));
    wu.line("U");
    wu.matrix(tb.up.U);
    csv::Writer ws(out_path(cfg, "U_star.csv"));
    ws.line("U_star");
    ws.matrix(tb.down.U);
}

inline void write_density(const config::RunConfig& cfg) {
    const FactorizationTables tb = build_tables(cfg.model, *cfg.horizon, cfg.delta, cfg.reversal);
    const RowVector& alpha = cfg.horizon->alpha();
    csv::Writer w(out_path(cfg, "density.csv"));
    w.row("x", "y", "k", "j", "value");
    for (double x : cfg.xGrid) {
        if (x < 0.0) {
            continue;
        }
        for (double y : cfg.yGrid) {
            if (y >= x) {
                continue;
            }
            for (Index k = 0; k < tb.n; ++k) {
                for (Index j = 0; j < tb.n; ++j) {
                    double value = 0.0;
                    for (Index i = 0; i < tb.n; ++i) {
                        if (alpha(i) != 0.0) {
                            value += alpha(i) * joint_density(tb, i, x, y, k, j);
                        }
                    }
                    w.row(x, y, one_based(k), one_based(j), value);
                }
            }
        }
    }
    csv::Writer s(out_path(cfg, "density_summary.csv"));
    s.row("delta", "total_mass", "laplace");
    s.row(cfg.delta, total_mass(tb), laplace(*cfg.horizon, cfg.delta));
}

inline std::pair<int, double> require_bm_erlang(const config::RunConfig& cfg) {
    if (!cfg.model.is_pure_brownian()) {
        throw Error(ErrorCode::ConfigError, "[model] lam_plus / lam_minus: bm-erlang needs a pure Brownian model");
    }
    const auto shape = verify::as_erlang(*cfg.horizon);
    if (!shape) {
        throw Error(ErrorCode::ConfigError, "[horizon] alpha / T: bm-erlang needs an Erlang horizon");
    }
    return *shape;
}

inline void write_bm_erlang(const config::RunConfig& cfg) {
    const auto [n, lambda] = require_bm_erlang(cfg);
    const BmErlangWeights bw = compute_weights(n, lambda, cfg.model.mu, cfg.model.sigma2);
    csv::Writer w(out_path(cfg, "bm_erlang_weights.csv"));
    w.row("i", "k", "p_bar", "p_under");
    for (int k = 1; k <= n; ++k) {
        for (int i = 1; i <= k; ++i) {
            w.row(std::int64_t{i}, std::int64_t{k}, bw.pBar(i, k), bw.pUnder(i, k));
        }
    }
    csv::Writer d(out_path(cfg, "bm_erlang_density.csv"));
    d.row("x", "k", "sup", "inf");
    for (double x : cfg.xGrid) {
        if (x < 0.0) {
            continue;
        }
        for (int k = 1; k <= n; ++k) {
            d.row(x, std::int64_t{k}, sup_density_erlang(bw, x, k), inf_density_erlang(bw, x, k));
        }
    }
}

inline std::vector<PathSample> run_paths(const config::RunConfig& cfg) {
    cfg.sim.validate();
    return simulate(cfg.model, *cfg.horizon, cfg.sim.seed, cfg.sim.nPaths, cfg.sim.threads);
}

inline JointHistogram histogram_of(const config::RunConfig& cfg, const std::vector<PathSample>& samples) {
    JointHistogram hist(cfg.sim.binEdgesX, cfg.sim.binEdgesY, cfg.horizon->size());
    for (const PathSample& s : samples) {
        hist.add(s);
    }
    return hist;
}

inline void write_simulate(const config::RunConfig& cfg) {
    const JointHistogram hist = histogram_of(cfg, run_paths(cfg));
    const auto& ex = hist.edges_x();
    const auto& ey = hist.edges_y();
    csv::Writer w(out_path(cfg, "histogram.csv"));
    w.row("x_lo", "x_hi", "y_lo", "y_hi", "k", "j", "count", "frequency", "std_error");
    for (Index bx = 0; bx < hist.bins_x(); ++bx) {
        for (Index by = 0; by < hist.bins_y(); ++by) {
            for (Index k = 0; k < hist.phases(); ++k) {
                for (Index j = 0; j < hist.phases(); ++j) {
                    w.row(ex[static_cast<std::size_t>(bx)], ex[static_cast<std::size_t>(bx + 1)],
                          ey[static_cast<std::size_t>(by)], ey[static_cast<std::size_t>(by + 1)], one_based(k),
                          one_based(j), hist.count(bx, by, k, j), hist.frequency(bx, by, k, j),
                          hist.standard_error(bx, by, k, j));
                }
            }
        }
    }
    csv::Writer p(out_path(cfg, "phase_at_sup.csv"));
    p.row("k", "count", "frequency", "std_error");
    for (Index k = 0; k < hist.phases(); ++k) {
        const double f = hist.sup_phase_frequency(k);
        p.row(one_based(k), hist.sup_phase_count(k), f, hist.binomial_se(f));
    }
}

/// Tolerances of the `verify` report.
inline constexpr double kInvolutionTol = 1e-12;
inline constexpr double kCdfTol = 1e-10;
inline constexpr double kInvarianceTol = 1e-8;
inline constexpr double kRTol = 1e-8;
inline constexpr double kMassTol = 1e-6;
inline constexpr double kBmErlangTol = 1e-8;
inline constexpr double kProductFormTol = 1e-10;
inline constexpr double kCoverage = 0.99;
inline constexpr double kPhaseZ = 4.0;

inline std::vector<verify::CheckResult> run_checks(const config::RunConfig& cfg) {
    using verify::CheckResult;
    const PhaseType& horizon = *cfg.horizon;
    std::vector<CheckResult> out;

    const ReversalResult rev = reverse_standard(horizon);
    out.push_back({"reversal_involution", kInvolutionTol, verify::reversal_involution_error(horizon)});
    out.push_back({"reversal_cdf", kCdfTol, verify::cdf_distance(horizon, rev.as_phase_type())});
    out.push_back({"reversal_sparsity", 0.0,
                   verify::sparsity_relations_hold(horizon, rev, horizon.alpha()) ? 0.0 : 1.0});

    // a strictly positive start unlikely to coincide with alpha
    RowVector ramp = RowVector::LinSpaced(horizon.size(), 1.0, static_cast<double>(horizon.size()));
    ramp /= ramp.sum();
    out.push_back({"reversal_invariance", kInvarianceTol,
                   verify::reversal_invariance_error(cfg.model, horizon, ReversalChoice::standard(),
                                                     ReversalChoice::general(ramp),
                                                     verify::linspace(-5.0, 0.0, 30))});

    const FactorizationTables tb = build_tables(cfg.model, horizon, cfg.delta, cfg.reversal);
    out.push_back({"r_consistency", kRTol, tb.rDeviation});
    out.push_back({"normalization", kMassTol, std::abs(total_mass(tb) - laplace(horizon, cfg.delta))});

    if (cfg.model.is_pure_brownian()) {
        if (const auto shape = verify::as_erlang(horizon)) {
            const auto xs = cfg.xGrid.empty() ? verify::linspace(0.0, 5.0, 50) : cfg.xGrid;
            const auto dev = verify::bm_erlang_deviation(cfg.model.mu, cfg.model.sigma2, shape->first, shape->second, xs);
            out.push_back({"bm_erlang_sup", kBmErlangTol, dev.sup});
            out.push_back({"bm_erlang_inf", kBmErlangTol, dev.inf});
            out.push_back({"bm_erlang_joint", kBmErlangTol, dev.joint});
            out.push_back({"bm_erlang_phase_at_sup", kBmErlangTol, dev.phaseAtSup});
        }
        if (horizon.size() == 1) {
            const FactorizationTables t0 = build_tables(cfg.model, horizon, 0.0);
            const double rate = -horizon.T()(0, 0);
            const double lp0 = ladder_rate(cfg.model.mu, cfg.model.sigma2, rate, +1);
            const double lm0 = ladder_rate(cfg.model.mu, cfg.model.sigma2, rate, -1);
            out.push_back({"wh_ladder_rates", kInvolutionTol,
                           std::max(std::abs(t0.up.U(0, 0) + lp0), std::abs(t0.down.U(0, 0) + lm0))});
            double worst = 0.0;
            for (double x : verify::linspace(0.2, 4.0, 20)) {
                for (double d : verify::linspace(0.2, 4.0, 20)) {
                    const double product = lp0 * std::exp(-lp0 * x) * lm0 * std::exp(-lm0 * d);
                    worst = std::max(worst, std::abs(joint_density(t0, 0, x, x - d, 0, 0) - product));
                }
            }
            out.push_back({"wh_product_form", kProductFormTol, worst});
        }
    }

    if (cfg.sim.nPaths > 0) {
        const std::vector<PathSample> samples = run_paths(cfg);
        const JointHistogram hist = histogram_of(cfg, samples);
        const FactorizationTables t0 = cfg.delta == 0.0 ? tb : build_tables(cfg.model, horizon, 0.0, cfg.reversal);
        const verify::McAgreement mc = verify::mc_agreement(t0, hist, kPhaseZ);
        CheckResult coverage{"mc_cell_coverage", kCoverage, mc.coverage()};
        coverage.lowerBound = true;
        out.push_back(coverage);
        out.push_back({"mc_phase_at_sup_z", kPhaseZ, mc.worstPhaseZ});
        std::vector<double> taus;
        taus.reserve(samples.size());
        for (const PathSample& s : samples) {
            taus.push_back(s.tau);
        }
        out.push_back({"mc_tau_ks", verify::ks_critical(samples.size(), 0.01), verify::ks_distance(std::move(taus), horizon)});
    }
    return out;
}

inline bool write_verify(const config::RunConfig& cfg) {
    const auto checks = run_checks(cfg);
    csv::Writer w(out_path(cfg, "verify_report.csv"));
    w.row("check", "tolerance", "observed", "status");
    bool all = true;
    for (const auto& c : checks) {
        w.row(c.name, c.tolerance, c.observed, c.passed() ? "pass" : "fail");
        all = all && c.passed();
    }
    return all;
}

} // namespace detail

/// Runs one command. Returns the process exit status: 0 on success, 1 on a
/// numerical failure or failed verification, 2 on a configuration error.
inline int run(const config::RunConfig& cfg, std::ostream& err = std::cerr) {
    try {
        if (!cfg.horizon) {
            throw Error(ErrorCode::ConfigError, "[horizon]: missing");
        }
        std::filesystem::create_directories(cfg.output);
        switch (cfg.command) {
        case config::Command::Reverse: detail::write_reverse(cfg); break;
        case config::Command::Factorize: detail::write_factorize(cfg); break;
        case config::Command::Density: detail::write_density(cfg); break;
        case config::Command::BmErlang: detail::write_bm_erlang(cfg); break;
        case config::Command::Simulate: detail::write_simulate(cfg); break;
        case config::Command::Verify:
            if (!detail::write_verify(cfg)) {
                err << "verify: one or more checks failed\n";
                return 1;
            }
            break;
        }
        return 0;
    } catch (const Error& e) {
        err << e.what() << '\n';
        return e.code() == ErrorCode::ConfigError ? 2 : 1;
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return 1;
    }
}

} // namespace phwh::cli
