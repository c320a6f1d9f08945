#include <phwh/cli.hpp>
#include <phwh/config.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Wiener-Hopf factors of jump diffusions over phase-type horizons"};
    std::string configPath;
    std::string output = "./out";
    unsigned threads = 1;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", configPath, "run configuration (INI)")->required();
    app.add_option("--output", output, "output directory");
    app.add_option("--threads", threads, "worker threads for simulation")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "overrides [run] seed");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    phwh::config::RunConfig cfg;
    try {
        cfg = phwh::config::load(configPath);
    } catch (const phwh::Error& e) {
        std::cerr << e.what() << '\n';
        return e.code() == phwh::ErrorCode::ConfigError ? 2 : 1;
    }
    cfg.output = output;
    cfg.sim.threads = threads;
    if (seed) {
        cfg.sim.seed = *seed;
    }
    return phwh::cli::run(cfg);
}
