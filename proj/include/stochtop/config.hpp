#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stochtop/errors.hpp"
#include "stochtop/probing.hpp"
#include "stochtop/scenarios.hpp"

namespace stochtop {

enum class Objective { kMean, kMeanStd };
enum class Method { kExact, kTrace, kDiagCorrected };

/// Batch run configuration, read from a `key = value` text file
/// ('#' starts a comment). See the README for the full schema.
struct RunConfig {
    // mesh and material
    int nx = 60;
    int ny = 20;
    double youngs_modulus = 1.0; // MPa
    double poisson_ratio = 0.3;
    double thickness = 1.0; // mm

    // design chain
    double filter_radius = 2.0; // mm
    double x_min = 0.001;
    double volume_fraction = 0.4;
    double initial_density = -1.0; // < 0 means "use volume_fraction"

    // objective and evaluation method
    Objective objective = Objective::kMean;
    double std_multiplier = 2.0;
    Method method = Method::kExact;
    ProbeKind probe_kind = ProbeKind::kHadamard;
    int num_probes = 8;

    // scenarios
    int num_scenarios = 64; // L
    int rank = 10;          // R
    std::uint64_t seed = 42;
    std::string scenario_file;           // optional import path
    std::vector<PointLoad> base_loads;   // empty -> mesh defaults

    // optimizer
    int max_iters = 1000;
    double mma_move = 0.5;
    bool continuation = true;
    double penalty_from = 1.0;
    double penalty_to = 6.0;
    double penalty_step = 0.5;
    double projection_from = 0.0;
    double projection_to = 20.0;
    double projection_step = 4.0;
    double tol_from = 1e-3;
    double tol_to = 1e-4;

    std::string output_dir = "out";
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline double to_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double out = 0;
    try {
        out = std::stod(value, &used);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs a number, got '" + value + "'");
    }
    if (used != value.size())
        throw ConfigError("config: key '" + key + "' needs a number, got '" + value + "'");
    return out;
}

inline long long to_int(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(value, &used);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs an integer, got '" + value + "'");
    }
    if (used != value.size())
        throw ConfigError("config: key '" + key + "' needs an integer, got '" + value + "'");
    return out;
}

inline bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw ConfigError("config: key '" + key + "' needs true/false, got '" + value + "'");
}

/// "x,y,fx,fy; x,y,fx,fy; ..." -> point loads.
inline std::vector<PointLoad> parse_base_loads(const std::string& text) {
    std::vector<PointLoad> loads;
    std::istringstream groups(text);
    std::string group;
    while (std::getline(groups, group, ';')) {
        group = trim(group);
        if (group.empty()) continue;
        std::replace(group.begin(), group.end(), ',', ' ');
        std::istringstream fields(group);
        PointLoad load;
        if (!(fields >> load.x >> load.y >> load.fx >> load.fy))
            throw ConfigError("config: base_loads entries need four numbers (x,y,fx,fy)");
        loads.push_back(load);
    }
    return loads;
}

} // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    using detail::to_bool;
    using detail::to_double;
    using detail::to_int;
    if (key == "nx") cfg.nx = static_cast<int>(to_int(key, value));
    else if (key == "ny") cfg.ny = static_cast<int>(to_int(key, value));
    else if (key == "youngs_modulus") cfg.youngs_modulus = to_double(key, value);
    else if (key == "poisson_ratio") cfg.poisson_ratio = to_double(key, value);
    else if (key == "thickness") cfg.thickness = to_double(key, value);
    else if (key == "filter_radius") cfg.filter_radius = to_double(key, value);
    else if (key == "x_min") cfg.x_min = to_double(key, value);
    else if (key == "volume_fraction") cfg.volume_fraction = to_double(key, value);
    else if (key == "initial_density") cfg.initial_density = to_double(key, value);
    else if (key == "objective") {
        if (value == "mean") cfg.objective = Objective::kMean;
        else if (value == "mean_std") cfg.objective = Objective::kMeanStd;
        else throw ConfigError("config: objective must be mean or mean_std");
    } else if (key == "std_multiplier") cfg.std_multiplier = to_double(key, value);
    else if (key == "method") {
        if (value == "exact") cfg.method = Method::kExact;
        else if (value == "trace") cfg.method = Method::kTrace;
        else if (value == "diag_corrected") cfg.method = Method::kDiagCorrected;
        else throw ConfigError("config: method must be exact, trace or diag_corrected");
    } else if (key == "probe_kind") {
        if (value == "hadamard") cfg.probe_kind = ProbeKind::kHadamard;
        else if (value == "rademacher") cfg.probe_kind = ProbeKind::kRademacher;
        else throw ConfigError("config: probe_kind must be hadamard or rademacher");
    } else if (key == "num_probes") cfg.num_probes = static_cast<int>(to_int(key, value));
    else if (key == "num_scenarios") cfg.num_scenarios = static_cast<int>(to_int(key, value));
    else if (key == "rank") cfg.rank = static_cast<int>(to_int(key, value));
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "scenario_file") cfg.scenario_file = value;
    else if (key == "base_loads") cfg.base_loads = detail::parse_base_loads(value);
    else if (key == "max_iters") cfg.max_iters = static_cast<int>(to_int(key, value));
    else if (key == "mma_move") cfg.mma_move = to_double(key, value);
    else if (key == "continuation") cfg.continuation = to_bool(key, value);
    else if (key == "penalty_from") cfg.penalty_from = to_double(key, value);
    else if (key == "penalty_to") cfg.penalty_to = to_double(key, value);
    else if (key == "penalty_step") cfg.penalty_step = to_double(key, value);
    else if (key == "projection_from") cfg.projection_from = to_double(key, value);
    else if (key == "projection_to") cfg.projection_to = to_double(key, value);
    else if (key == "projection_step") cfg.projection_step = to_double(key, value);
    else if (key == "tol_from") cfg.tol_from = to_double(key, value);
    else if (key == "tol_to") cfg.tol_to = to_double(key, value);
    else if (key == "output_dir") cfg.output_dir = value;
    else throw ConfigError("config: unknown key '" + key + "'");
}

inline RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config: line " + std::to_string(lineno) + " is missing a key or value");
        apply_config_entry(cfg, key, value);
    }
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    return parse_config(in);
}

inline void validate(const RunConfig& cfg) {
    if (cfg.nx < 1 || cfg.ny < 1) throw ConfigError("config: mesh dimensions must be >= 1");
    if (!(cfg.youngs_modulus > 0.0)) throw ConfigError("config: youngs_modulus must be positive");
    if (!(cfg.poisson_ratio > -1.0 && cfg.poisson_ratio < 0.5))
        throw ConfigError("config: poisson_ratio must lie in (-1, 0.5)");
    if (!(cfg.thickness > 0.0)) throw ConfigError("config: thickness must be positive");
    if (cfg.filter_radius < 0.0) throw ConfigError("config: filter_radius must be nonnegative");
    if (!(cfg.x_min > 0.0 && cfg.x_min < 1.0)) throw ConfigError("config: x_min must lie in (0,1)");
    if (!(cfg.volume_fraction > 0.0 && cfg.volume_fraction <= 1.0))
        throw ConfigError("config: volume_fraction must lie in (0,1]");
    if (cfg.initial_density >= 0.0 &&
        !(cfg.initial_density > 0.0 && cfg.initial_density <= 1.0))
        throw ConfigError("config: initial_density must lie in (0,1]");
    if (!(cfg.std_multiplier >= 0.0)) throw ConfigError("config: std_multiplier must be nonnegative");
    if (cfg.num_probes < 1) throw ConfigError("config: num_probes must be >= 1");
    if (cfg.num_scenarios < 1) throw ConfigError("config: num_scenarios must be >= 1");
    if (cfg.rank < 4) throw ConfigError("config: rank must be >= 4");
    if (cfg.max_iters < 0) throw ConfigError("config: max_iters must be nonnegative");
    if (!(cfg.mma_move > 0.0)) throw ConfigError("config: mma_move must be positive");
    if (cfg.objective == Objective::kMeanStd && cfg.method == Method::kTrace)
        throw ConfigError("config: the mean_std objective needs per-scenario compliances; "
                          "use method = exact or diag_corrected");
    if (cfg.objective == Objective::kMeanStd && cfg.num_scenarios < 2)
        throw ConfigError("config: mean_std needs at least two scenarios");
    if (cfg.method != Method::kExact && cfg.probe_kind == ProbeKind::kHadamard) {
        const int order = hadamard_order(cfg.num_scenarios);
        if (cfg.num_probes > order)
            throw ConfigError("config: num_probes exceeds the Hadamard order for this L");
    }
    if (!(cfg.tol_from > 0.0 && cfg.tol_to > 0.0))
        throw ConfigError("config: tolerances must be positive");
}

} // namespace stochtop
