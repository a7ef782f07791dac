#pragma once

// Flat key = value experiment configuration with dotted section keys,
// '#' comments, duplicate detection, and collect-all validation.

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "smcf/errors.hpp"
#include "smcf/grid.hpp"

namespace smcf {

inline const std::set<std::string>& experiment_names() {
    static const std::set<std::string> names = {
        "circle_translation", "clifford_ode",     "volume_conservation",
        "residual_suite",     "euler_convergence", "willmore_smoothing",
        "coulomb_gauge",      "norm_equivalence",  "uniqueness",
        "scaling"};
    return names;
}

inline const std::set<std::string>& generator_names() {
    static const std::set<std::string> names = {"flat",       "circle",     "helix",
                                                "clifford",   "graph_bump", "graph_random"};
    return names;
}

struct ExperimentConfig {
    std::string experiment;

    int grid_dim = 2;
    int grid_n = 64;
    double grid_length = 2 * kPi;

    std::string initial_name = "graph_bump";
    double amplitude = 0.1;
    double radius = 1.0;
    double radius2 = 2.0;
    double pitch = 0.25;
    double decay = 1.0;
    int kmax = 26;
    double smoothness = 2.5;
    unsigned seed = 1;

    double flow_dt = 1e-3;
    double flow_t_end = 0.1;
    std::string flow_scheme = "rk4_direct";
    double cfl_safety = 0.6;
    bool allow_dt_override = false;

    double euler_epsilon = 1e-3;
    int willmore_substeps = 16;
    double splitting_constant = 0;

    double norms_s = 2.5;
    int norms_k = 2;
    double norms_h0 = 1.0;
    double norms_dh = 0.25;
    double norms_delta = 0.4;

    std::string output_dir = "out";
    int emit_snapshots_every = 0;  // 0: only endpoints
    int jobs = 1;
};

namespace detail {

struct RawConfig {
    std::map<std::string, std::string> kv;
    std::map<std::string, int> line_of;
};

inline RawConfig parse_raw(const std::string& text) {
    RawConfig raw;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::vector<std::string> errors;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string val = trim(t.substr(eq + 1));
        if (key.empty()) {
            errors.push_back("line " + std::to_string(lineno) + ": empty key");
            continue;
        }
        if (raw.kv.count(key)) {
            errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key +
                             "' (first at line " + std::to_string(raw.line_of[key]) + ")");
            continue;
        }
        raw.kv[key] = val;
        raw.line_of[key] = lineno;
    }
    if (!errors.empty()) {
        std::string msg = "config parse errors:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ParseError(msg);
    }
    return raw;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    detail::RawConfig raw = detail::parse_raw(text);
    ExperimentConfig cfg;
    std::vector<std::string> errors;

    auto take = [&](const char* key) -> const std::string* {
        auto it = raw.kv.find(key);
        if (it == raw.kv.end()) return nullptr;
        static thread_local std::string held;
        held = it->second;
        raw.kv.erase(it);  // mark consumed
        return &held;
    };
    auto get_str = [&](const char* key, std::string& out) {
        if (const auto* v = take(key)) out = *v;
    };
    auto get_num = [&](const char* key, auto& out) {
        if (const auto* v = take(key)) {
            try {
                if constexpr (std::is_same_v<std::decay_t<decltype(out)>, int>)
                    out = std::stoi(*v);
                else if constexpr (std::is_same_v<std::decay_t<decltype(out)>, unsigned>)
                    out = unsigned(std::stoul(*v));
                else
                    out = std::stod(*v);
            } catch (...) {
                errors.push_back(std::string(key) + ": not a number: '" + *v + "'");
            }
        }
    };
    auto get_bool = [&](const char* key, bool& out) {
        if (const auto* v = take(key)) {
            if (*v == "true" || *v == "1") out = true;
            else if (*v == "false" || *v == "0") out = false;
            else errors.push_back(std::string(key) + ": not a boolean: '" + *v + "'");
        }
    };

    get_str("experiment", cfg.experiment);
    get_num("grid.dim", cfg.grid_dim);
    get_num("grid.n", cfg.grid_n);
    get_num("grid.length", cfg.grid_length);
    get_str("initial_data.name", cfg.initial_name);
    get_num("initial_data.amplitude", cfg.amplitude);
    get_num("initial_data.radius", cfg.radius);
    get_num("initial_data.radius2", cfg.radius2);
    get_num("initial_data.pitch", cfg.pitch);
    get_num("initial_data.decay", cfg.decay);
    get_num("initial_data.kmax", cfg.kmax);
    get_num("initial_data.smoothness", cfg.smoothness);
    get_num("initial_data.seed", cfg.seed);
    get_num("flow.dt", cfg.flow_dt);
    get_num("flow.t_end", cfg.flow_t_end);
    get_str("flow.scheme", cfg.flow_scheme);
    get_num("flow.cfl_safety", cfg.cfl_safety);
    get_bool("flow.allow_dt_override", cfg.allow_dt_override);
    get_num("euler.epsilon", cfg.euler_epsilon);
    get_num("euler.willmore_substeps", cfg.willmore_substeps);
    get_num("euler.splitting_constant", cfg.splitting_constant);
    get_num("norms.s", cfg.norms_s);
    get_num("norms.k", cfg.norms_k);
    get_num("norms.h0", cfg.norms_h0);
    get_num("norms.dh", cfg.norms_dh);
    get_num("norms.delta", cfg.norms_delta);
    get_str("output_dir", cfg.output_dir);
    get_num("emit_snapshots_every", cfg.emit_snapshots_every);
    get_num("jobs", cfg.jobs);

    for (const auto& [key, val] : raw.kv)
        errors.push_back("unknown key '" + key + "' (line " +
                         std::to_string(raw.line_of.at(key)) + ")");

    // validation: collect every violated invariant
    if (cfg.experiment.empty()) errors.push_back("experiment: missing");
    else if (!experiment_names().count(cfg.experiment))
        errors.push_back("experiment: unknown '" + cfg.experiment + "'");
    if (!generator_names().count(cfg.initial_name))
        errors.push_back("initial_data.name: unknown '" + cfg.initial_name + "'");
    if (cfg.grid_dim < 1 || cfg.grid_dim > 2) errors.push_back("grid.dim: must be 1 or 2");
    if (cfg.grid_n < 4 || (cfg.grid_n & (cfg.grid_n - 1)) != 0)
        errors.push_back("grid.n: must be a power of two >= 4");
    if (!(cfg.grid_length > 0)) errors.push_back("grid.length: must be positive");
    if (!(cfg.flow_dt > 0)) errors.push_back("flow.dt: must be positive");
    if (!(cfg.flow_t_end >= 0)) errors.push_back("flow.t_end: must be nonnegative");
    if (cfg.flow_scheme != "rk4_direct" && cfg.flow_scheme != "regularized_euler")
        errors.push_back("flow.scheme: unknown '" + cfg.flow_scheme + "'");
    if (!(cfg.cfl_safety > 0) || cfg.cfl_safety > 1)
        errors.push_back("flow.cfl_safety: must be in (0, 1]");
    if (!(cfg.euler_epsilon > 0)) errors.push_back("euler.epsilon: must be positive");
    if (cfg.willmore_substeps < 4) errors.push_back("euler.willmore_substeps: must be >= 4");
    if (!(cfg.norms_s > 0.5 * cfg.grid_dim)) errors.push_back("norms.s: need s > d/2");
    if (cfg.norms_k < 0 || cfg.norms_k > 6) errors.push_back("norms.k: must be in [0, 6]");
    if (!(cfg.norms_dh > 0)) errors.push_back("norms.dh: must be positive");
    if (!(cfg.norms_delta > 0) || !(cfg.norms_delta < cfg.norms_s - 0.5 * cfg.grid_dim))
        errors.push_back("norms.delta: need 0 < delta < s - d/2");
    if (cfg.jobs < 1) errors.push_back("jobs: must be >= 1");
    if (cfg.amplitude < 0) errors.push_back("initial_data.amplitude: must be nonnegative");
    if (!(cfg.radius > 0)) errors.push_back("initial_data.radius: must be positive");
    if (!(cfg.radius2 > 0)) errors.push_back("initial_data.radius2: must be positive");
    if (cfg.kmax < 1) errors.push_back("initial_data.kmax: must be >= 1");

    if (!errors.empty()) {
        std::string msg = "config validation errors:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ValidationError(msg);
    }
    return cfg;
}

}  // namespace smcf
