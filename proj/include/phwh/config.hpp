#pragma once

// Run configuration: an INI-style file with sections [model], [horizon] and
// [run]. Vectors are comma separated; matrices separate rows with ';'.
//
//   [model]
//   mu = 0.1
//   sigma2 = 1
//   lam_plus = 0.5          ; optional, with plus_alpha / plus_T
//   plus_alpha = 1
//   plus_T = -2
//
//   [horizon]
//   alpha = 1, 0
//   T = -1, 1; 0, -1
//
//   [run]
//   command = density
//   delta = 0.1
//   reversal = general
//   alpha_hat = 0.5, 0.5
//   x_grid = linspace(0.1, 4, 40)
//   y_grid = -2, -1, 0, 1

#include <phwh/errors.hpp>
#include <phwh/factorization.hpp>
#include <phwh/fluid_embedding.hpp>
#include <phwh/mc_oracle.hpp>
#include <phwh/ph_core.hpp>

#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <optional>
#include <string>
#include <vector>

namespace phwh::config {

enum class Command { Reverse, Factorize, Density, BmErlang, Simulate, Verify };

inline std::optional<Command> parse_command(std::string_view name) {
    if (name == "reverse") return Command::Reverse;
    if (name == "factorize") return Command::Factorize;
    if (name == "density") return Command::Density;
    if (name == "bm-erlang") return Command::BmErlang;
    if (name == "simulate") return Command::Simulate;
    if (name == "verify") return Command::Verify;
    return std::nullopt;
}

struct RunConfig {
    Command command = Command::Verify;
    JumpDiffusionModel model;
    std::optional<PhaseType> horizon;
    double delta = 0.0;
    ReversalChoice reversal;
    std::vector<double> xGrid;
    std::vector<double> yGrid;
    SimConfig sim;
    std::filesystem::path output = "out";
};

namespace detail {

using boost::property_tree::ptree;

[[noreturn]] inline void fail(const std::string& key, const std::string& why) {
    throw Error(ErrorCode::ConfigError, key + ": " + why);
}

inline double parse_double(std::string text, const std::string& key) {
    boost::algorithm::trim(text);
    if (!text.empty() && text.front() == '+') {
        text.erase(0, 1);
    }
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || text.empty()) {
        fail(key, "'" + text + "' is not a number");
    }
    return v;
}

inline std::vector<double> parse_list(const std::string& text, const std::string& key) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = text.find(',', pos);
        const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        out.push_back(parse_double(item, key));
        if (comma == std::string::npos) {
            break;
        }
        pos = comma + 1;
    }
    return out;
}

/// Either a comma-separated list or linspace(lo, hi, count).
inline std::vector<double> parse_grid(std::string text, const std::string& key) {
    boost::algorithm::trim(text);
    if (text.rfind("linspace(", 0) == 0 && text.back() == ')') {
        const auto args = parse_list(text.substr(9, text.size() - 10), key);
        if (args.size() != 3 || args[2] < 2 || args[2] != std::floor(args[2])) {
            fail(key, "linspace needs (lo, hi, count >= 2)");
        }
        const auto count = static_cast<std::size_t>(args[2]);
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) {
            out[i] = args[0] + (args[1] - args[0]) * static_cast<double>(i) / static_cast<double>(count - 1);
        }
        out.back() = args[1];
        return out;
    }
    return parse_list(text, key);
}

inline void require_increasing(const std::vector<double>& v, const std::string& key) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] > v[i - 1])) {
            fail(key, "values must be strictly increasing");
        }
    }
}

inline RowVector parse_row(const std::string& text, const std::string& key) {
    const auto v = parse_list(text, key);
    return Eigen::Map<const RowVector>(v.data(), static_cast<Index>(v.size()));
}

inline Matrix parse_matrix(const std::string& text, const std::string& key) {
    std::vector<std::vector<double>> rows;
    std::size_t pos = 0;
    while (true) {
        const std::size_t semi = text.find(';', pos);
        rows.push_back(parse_list(text.substr(pos, semi == std::string::npos ? std::string::npos : semi - pos), key));
        if (semi == std::string::npos) {
            break;
        }
        pos = semi + 1;
    }
    const auto cols = rows.front().size();
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) {
            fail(key, "rows have different lengths");
        }
        for (std::size_t j = 0; j < cols; ++j) {
            m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
        }
    }
    return m;
}

inline std::optional<std::string> get(const ptree& tree, const std::string& section, const std::string& key) {
    const auto child = tree.get_child_optional(section + "." + key);
    if (!child) {
        return std::nullopt;
    }
    return child->get_value<std::string>();
}

inline std::string require(const ptree& tree, const std::string& section, const std::string& key) {
    auto v = get(tree, section, key);
    if (!v) {
        fail("[" + section + "] " + key, "missing");
    }
    return *v;
}

inline PhaseType parse_phase_type(const ptree& tree, const std::string& section, const std::string& alphaKey,
                                  const std::string& matrixKey) {
    const std::string aName = "[" + section + "] " + alphaKey;
    const std::string tName = "[" + section + "] " + matrixKey;
    const RowVector alpha = parse_row(require(tree, section, alphaKey), aName);
    const Matrix T = parse_matrix(require(tree, section, matrixKey), tName);
    try {
        return validate({alpha, T});
    } catch (const Error& e) {
        fail(aName + " / " + matrixKey, e.what());
    }
}

} // namespace detail

/// Parses the configuration text. Errors are ConfigError naming the key.
inline RunConfig parse(const std::string& text) {
    using detail::fail;
    detail::ptree tree;
    try {
        std::istringstream in(text);
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        fail("config", e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    for (const auto& [section, body] : tree) {
        if (section != "model" && section != "horizon" && section != "run") {
            fail("[" + section + "]", "unknown section");
        }
        (void)body;
    }

    RunConfig cfg;
    const std::string cmd = detail::require(tree, "run", "command");
    const auto command = parse_command(boost::algorithm::trim_copy(cmd));
    if (!command) {
        fail("[run] command", "unknown command '" + cmd + "'");
    }
    cfg.command = *command;

    auto number = [&](const std::string& section, const std::string& key, double fallback) {
        const auto v = detail::get(tree, section, key);
        return v ? detail::parse_double(*v, "[" + section + "] " + key) : fallback;
    };

    cfg.model.mu = number("model", "mu", 0.0);
    cfg.model.sigma2 = number("model", "sigma2", 1.0);
    if (!(cfg.model.sigma2 > 0.0)) {
        fail("[model] sigma2", "must be positive");
    }
    cfg.model.lamPlus = number("model", "lam_plus", 0.0);
    cfg.model.lamMinus = number("model", "lam_minus", 0.0);
    if (cfg.model.lamPlus < 0.0) {
        fail("[model] lam_plus", "must be >= 0");
    }
    if (cfg.model.lamMinus < 0.0) {
        fail("[model] lam_minus", "must be >= 0");
    }
    if (cfg.model.lamPlus > 0.0) {
        cfg.model.phPlus = detail::parse_phase_type(tree, "model", "plus_alpha", "plus_T");
    }
    if (cfg.model.lamMinus > 0.0) {
        cfg.model.phMinus = detail::parse_phase_type(tree, "model", "minus_alpha", "minus_T");
    }
    cfg.horizon = detail::parse_phase_type(tree, "horizon", "alpha", "T");

    cfg.delta = number("run", "delta", 0.0);
    if (!(cfg.delta >= 0.0)) {
        fail("[run] delta", "must be >= 0");
    }

    const std::string reversal = boost::algorithm::trim_copy(detail::get(tree, "run", "reversal").value_or("standard"));
    if (reversal == "standard") {
        cfg.reversal = ReversalChoice::standard();
    } else if (reversal == "stationary") {
        cfg.reversal = ReversalChoice::stationary();
    } else if (reversal == "general") {
        const RowVector alphaHat = detail::parse_row(detail::require(tree, "run", "alpha_hat"), "[run] alpha_hat");
        if (alphaHat.size() != cfg.horizon->size()) {
            fail("[run] alpha_hat", "length differs from the horizon");
        }
        cfg.reversal = ReversalChoice::general(alphaHat);
    } else {
        fail("[run] reversal", "expected standard, general or stationary");
    }

    if (const auto v = detail::get(tree, "run", "x_grid")) {
        cfg.xGrid = detail::parse_grid(*v, "[run] x_grid");
        detail::require_increasing(cfg.xGrid, "[run] x_grid");
    }
    if (const auto v = detail::get(tree, "run", "y_grid")) {
        cfg.yGrid = detail::parse_grid(*v, "[run] y_grid");
        detail::require_increasing(cfg.yGrid, "[run] y_grid");
    }

    const double seed = number("run", "seed", 1.0);
    const double paths = number("run", "paths", 0.0);
    if (seed < 0.0 || seed != std::floor(seed)) {
        fail("[run] seed", "must be a nonnegative integer");
    }
    if (paths < 0.0 || paths != std::floor(paths)) {
        fail("[run] paths", "must be a nonnegative integer");
    }
    cfg.sim.seed = static_cast<std::uint64_t>(seed);
    cfg.sim.nPaths = static_cast<std::uint64_t>(paths);
    const auto defaultEdges = "linspace(0, 5, 11)";
    cfg.sim.binEdgesX = detail::parse_grid(detail::get(tree, "run", "x_edges").value_or(defaultEdges), "[run] x_edges");
    cfg.sim.binEdgesY = detail::parse_grid(detail::get(tree, "run", "y_edges").value_or(defaultEdges), "[run] y_edges");
    detail::require_increasing(cfg.sim.binEdgesX, "[run] x_edges");
    detail::require_increasing(cfg.sim.binEdgesY, "[run] y_edges");

    if ((cfg.command == Command::Density || cfg.command == Command::BmErlang) && cfg.xGrid.empty()) {
        fail("[run] x_grid", "required by this command");
    }
    if (cfg.command == Command::Density && cfg.yGrid.empty()) {
        fail("[run] y_grid", "required by this command");
    }
    if (cfg.command == Command::Simulate && cfg.sim.nPaths == 0) {
        fail("[run] paths", "simulate needs paths >= 1");
    }
    return cfg;
}

inline RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::ConfigError, "--config: cannot read " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

} // namespace phwh::config
