// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Tolerances are fixed here, not read from anywhere.

#include "support.hpp"

#include <phwh/bm_erlang.hpp>
#include <phwh/factorization.hpp>
#include <phwh/mc_oracle.hpp>
#include <phwh/ph_core.hpp>
#include <phwh/verify.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cli_path.hpp"

using namespace phwh;
namespace fs = std::filesystem;

namespace {

constexpr double kInvolutionTol = 1e-12;
constexpr double kCdfTol = 1e-10;
constexpr double kCoxianTol = 1e-12;
constexpr double kInvarianceTol = 1e-8;
constexpr double kBmErlangTol = 1e-8;
constexpr double kWeightSumTol = 1e-12;
constexpr double kMassTol = 1e-6;
constexpr double kRTol = 1e-8;
constexpr double kLadderTol = 1e-12;
constexpr double kProductTol = 1e-10;
constexpr double kCellCoverage = 0.99;
constexpr double kZ = 4.0;
constexpr std::uint64_t kMcPaths = 1000000;

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

void require(Outcome& o, bool ok, const std::string& what) {
    o.pass = o.pass && ok;
    if (!o.detail.empty()) {
        o.detail += "; ";
    }
    o.detail += what;
}

void bound(Outcome& o, const std::string& what, double observed, double tol) {
    require(o, observed <= tol, what + " " + sci(observed) + " <= " + sci(tol));
}

// 1 ----------------------------------------------------------------------
Outcome reversal_suite() {
    std::mt19937_64 rng(20240101);
    std::vector<PhaseType> cases;
    std::uniform_int_distribution<Index> size(1, 8);
    for (int i = 0; i < 50; ++i) {
        cases.push_back(testkit::random_phase_type(rng, size(rng)));
    }
    std::uniform_real_distribution<double> rate(0.3, 3.0);
    std::uniform_real_distribution<double> prob(0.05, 0.95);
    for (Index n = 1; n <= 6; ++n) {
        cases.push_back(erlang(n, rate(rng)));
        std::vector<double> rates, exits;
        for (Index i = 0; i < n; ++i) {
            rates.push_back(rate(rng));
            exits.push_back(prob(rng));
        }
        RowVector alpha = RowVector::Zero(n);
        alpha(0) = 1.0;
        cases.push_back(coxian(rates, exits, alpha));
    }
    double involution = 0.0;
    double cdfGap = 0.0;
    int sparsityFailures = 0;
    for (const PhaseType& ph : cases) {
        const ReversalResult rev = reverse_standard(ph);
        involution = std::max(involution, verify::reversal_involution_error(ph));
        cdfGap = std::max(cdfGap, verify::cdf_distance(ph, rev.as_phase_type(), 20));
        sparsityFailures += verify::sparsity_relations_hold(ph, rev, ph.alpha()) ? 0 : 1;
    }
    Outcome o;
    require(o, true, std::to_string(cases.size()) + " representations");
    bound(o, "involution", involution, kInvolutionTol);
    bound(o, "cdf", cdfGap, kCdfTol);
    require(o, sparsityFailures == 0, "sparsity failures " + std::to_string(sparsityFailures));
    return o;
}

// 2 ----------------------------------------------------------------------
Outcome worked_examples() {
    Outcome o;
    double erlangGap = 0.0;
    int stationaryErrors = 0;
    for (Index n = 1; n <= 6; ++n) {
        const PhaseType e = erlang(n, 1.7);
        const ReversalResult rev = reverse_standard(e);
        RowVector last = RowVector::Zero(n);
        last(n - 1) = 1.0;
        // same Erlang run backwards: start in the last phase, move down
        erlangGap = std::max({erlangGap, (rev.alphaStar - last).cwiseAbs().maxCoeff(),
                              (rev.TStar - e.T().transpose()).cwiseAbs().maxCoeff()});
        if (n >= 2) {
            try {
                reverse_stationary(e);
            } catch (const Error& err) {
                stationaryErrors += err.code() == ErrorCode::Reducible ? 1 : 0;
            }
        }
    }
    bound(o, "erlang", erlangGap, kCoxianTol);

    double coxianGap = 0.0;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> rate(0.3, 3.0);
    std::uniform_real_distribution<double> prob(0.05, 0.95);
    for (Index n = 1; n <= 6; ++n) {
        std::vector<double> rates, p;
        for (Index i = 0; i < n; ++i) {
            rates.push_back(rate(rng));
            p.push_back(prob(rng));
        }
        p.back() = 1.0;
        RowVector alpha = RowVector::Zero(n);
        alpha(0) = 1.0;
        const ReversalResult rev = reverse_standard(coxian(rates, p, alpha));
        double survive = 1.0;
        for (Index i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            coxianGap = std::max(coxianGap, std::abs(rev.alphaStar(i) - p[k] * survive));
            survive *= 1.0 - p[k];
        }
    }
    bound(o, "coxian", coxianGap, kCoxianTol);
    require(o, stationaryErrors == 5, "stationary rejects erlang " + std::to_string(stationaryErrors) + "/5");
    return o;
}

// 3 ----------------------------------------------------------------------
Outcome reversal_invariance() {
    std::mt19937_64 rng(314159);
    std::uniform_int_distribution<Index> size(1, 4);
    const auto ys = verify::linspace(-3.0, 0.0, 30);
    double worst = 0.0;
    for (int m = 0; m < 10; ++m) {
        const JumpDiffusionModel model = testkit::random_model(rng, 2);
        const PhaseType h = testkit::random_phase_type(rng, size(rng));
        const RowVector a = testkit::random_positive_alpha(rng, h.size());
        const RowVector b = testkit::random_positive_alpha(rng, h.size());
        worst = std::max(worst, verify::reversal_invariance_error(model, h, ReversalChoice::general(a),
                                                                  ReversalChoice::general(b), ys));
    }
    Outcome o;
    bound(o, "10 models, conditional inf", worst, kInvarianceTol);
    return o;
}

// 4 ----------------------------------------------------------------------
Outcome bm_erlang_cross_check() {
    struct Params {
        double mu, sigma2, lambda;
    };
    const Params grid[] = {{0.0, 1.0, 1.0}, {0.5, 2.0, 0.5}, {-0.7, 0.5, 2.0}};
    const auto xs = verify::linspace(0.0, 5.0, 50);
    verify::BmErlangDeviation worst;
    double sumGap = 0.0;
    for (int n = 1; n <= 5; ++n) {
        for (const Params& p : grid) {
            const auto d = verify::bm_erlang_deviation(p.mu, p.sigma2, n, p.lambda, xs);
            worst.sup = std::max(worst.sup, d.sup);
            worst.inf = std::max(worst.inf, d.inf);
            worst.joint = std::max(worst.joint, d.joint);
            worst.phaseAtSup = std::max(worst.phaseAtSup, d.phaseAtSup);
            const BmErlangWeights w = compute_weights(n, p.lambda, p.mu, p.sigma2);
            double sum = 0.0;
            for (int k = 1; k <= n; ++k) {
                sum += phase_at_sup_erlang(w, k);
            }
            sumGap = std::max(sumGap, std::abs(sum - 1.0));
        }
    }
    Outcome o;
    bound(o, "sup", worst.sup, kBmErlangTol);
    bound(o, "inf", worst.inf, kBmErlangTol);
    bound(o, "joint", worst.joint, kBmErlangTol);
    bound(o, "c_k", worst.phaseAtSup, kBmErlangTol);
    bound(o, "sum q", sumGap, kWeightSumTol);
    return o;
}

// 5 ----------------------------------------------------------------------
Outcome normalization() {
    std::mt19937_64 rng(2718);
    struct Case {
        JumpDiffusionModel model;
        PhaseType horizon;
    };
    std::vector<Case> cases = {
        {JumpDiffusionModel::brownian(0.0, 1.0), erlang(3, 1.0)},
        {testkit::exponential_jumps(0.1, 1.0, 0.5, 2.0, 0.4, 1.5), erlang(2, 1.0)},
        {testkit::random_model(rng, 2), testkit::random_phase_type(rng, 3, 0.0)},
    };
    double massGap = 0.0;
    double discountGap = 0.0;
    double rGap = 0.0;
    for (const Case& c : cases) {
        const FactorizationTables t0 = build_tables(c.model, c.horizon, 0.0);
        massGap = std::max(massGap, std::abs(total_mass(t0) - 1.0));
        rGap = std::max(rGap, t0.rDeviation);
        for (double delta : {0.05, 0.5}) {
            const FactorizationTables td = build_tables(c.model, c.horizon, delta);
            discountGap = std::max(discountGap, std::abs(total_mass(td) - laplace(c.horizon, delta)));
        }
    }
    Outcome o;
    bound(o, "mass", massGap, kMassTol);
    bound(o, "discounted mass", discountGap, kMassTol);
    bound(o, "r forms", rGap, kRTol);
    return o;
}

// 6 ----------------------------------------------------------------------
Outcome exponential_horizon() {
    struct Params {
        double mu, sigma2, lambda;
    };
    const Params grid[] = {{0.0, 1.0, 0.5}, {0.4, 1.5, 1.0}, {-0.3, 0.8, 2.0}};
    const auto pts = verify::linspace(0.2, 4.0, 20);
    double ladder = 0.0;
    double product = 0.0;
    for (const Params& p : grid) {
        const FactorizationTables tb =
            build_tables(JumpDiffusionModel::brownian(p.mu, p.sigma2), exponential(p.lambda), 0.0);
        const double lp = ladder_rate(p.mu, p.sigma2, p.lambda, +1);
        const double lm = ladder_rate(p.mu, p.sigma2, p.lambda, -1);
        ladder = std::max({ladder, std::abs(tb.up.U(0, 0) + lp), std::abs(tb.down.U(0, 0) + lm)});
        for (double x : pts) {
            for (double d : pts) {
                const double expected = lp * std::exp(-lp * x) * lm * std::exp(-lm * d);
                product = std::max(product, std::abs(joint_density(tb, 0, x, x - d, 0, 0) - expected));
            }
        }
    }
    Outcome o;
    bound(o, "ladder rates", ladder, kLadderTol);
    bound(o, "product form", product, kProductTol);
    return o;
}

// 7 ----------------------------------------------------------------------
void mc_case(Outcome& o, const std::string& name, const JumpDiffusionModel& model, const PhaseType& horizon,
             std::uint64_t seed) {
    std::vector<double> edges = verify::linspace(0.0, 4.0, 11);
    edges.back() = std::numeric_limits<double>::infinity();
    const std::vector<PathSample> samples = simulate(model, horizon, seed, kMcPaths);
    JointHistogram hist(edges, edges, horizon.size());
    std::vector<double> taus;
    taus.reserve(samples.size());
    for (const PathSample& s : samples) {
        hist.add(s);
        taus.push_back(s.tau);
    }
    const FactorizationTables tb = build_tables(model, horizon, 0.0);
    const verify::McAgreement mc = verify::mc_agreement(tb, hist, kZ, 25.0);
    const double ks = verify::ks_distance(std::move(taus), horizon);
    const double ksCrit = verify::ks_critical(samples.size(), 0.01);
    require(o, mc.coverage() >= kCellCoverage,
            name + " cells " + std::to_string(mc.cellsWithin) + "/" + std::to_string(mc.eligibleCells));
    bound(o, name + " c_k z", mc.worstPhaseZ, kZ);
    bound(o, name + " KS", ks, ksCrit);
}

Outcome monte_carlo() {
    Outcome o;
    mc_case(o, "bm/erlang3", JumpDiffusionModel::brownian(0.0, 1.0), erlang(3, 1.0), 1001);
    mc_case(o, "jumps/erlang2", testkit::exponential_jumps(0.1, 1.0, 0.5, 2.0, 0.4, 1.5), erlang(2, 1.0), 2002);
    return o;
}

// 8 ----------------------------------------------------------------------
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool same_outputs(const fs::path& a, const fs::path& b, std::size_t& files) {
    files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        const fs::path other = b / entry.path().filename();
        if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
            return false;
        }
        ++files;
    }
    return files > 0;
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "phwh_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path config = root / "run.ini";
    {
        std::ofstream out(config);
        out << "[model]\nmu = 0.1\nsigma2 = 1\nlam_plus = 0.5\nplus_alpha = 1\nplus_T = -2\n"
               "lam_minus = 0.4\nminus_alpha = 1\nminus_T = -1.5\n"
               "[horizon]\nalpha = 1, 0\nT = -1, 1; 0, -1\n"
               "[run]\ncommand = simulate\npaths = 20000\nseed = 99\n";
    }
    auto run = [&](const std::string& dir, int threads) {
        const std::string cmd = std::string("\"") + PHWH_CLI_PATH + "\" --config \"" + config.string() +
                                "\" --output \"" + (root / dir).string() + "\" --threads " +
                                std::to_string(threads);
        return std::system(cmd.c_str());
    };
    Outcome o;
    const int rc = run("a", 1) | run("b", 1) | run("c", 4);
    require(o, rc == 0, "exit status " + std::to_string(rc));
    std::size_t files = 0;
    const bool repeat = rc == 0 && same_outputs(root / "a", root / "b", files);
    require(o, repeat, "two runs identical over " + std::to_string(files) + " files");
    const bool threads = rc == 0 && same_outputs(root / "a", root / "c", files);
    require(o, threads, "threads 1 vs 4 identical over " + std::to_string(files) + " files");
    return o;
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> check;
    };
    const Criterion criteria[] = {
        {"reversal suite", reversal_suite},
        {"worked reversal examples", worked_examples},
        {"reversal invariance", reversal_invariance},
        {"bm-erlang cross-validation", bm_erlang_cross_check},
        {"normalization and discounting", normalization},
        {"exponential horizon", exponential_horizon},
        {"monte carlo agreement", monte_carlo},
        {"determinism", determinism},
    };
    int failures = 0;
    int index = 1;
    for (const Criterion& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s [%d] %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", index, c.name, secs, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
        ++index;
    }
    std::printf("%d/%d criteria passed\n", index - 1 - failures, index - 1);
    return failures == 0 ? 0 : 1;
}
