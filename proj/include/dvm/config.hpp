#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dvm/algos.hpp"
#include "dvm/common.hpp"
#include "dvm/distill.hpp"
#include "dvm/env.hpp"

namespace dvm {

enum class Condition { none, distill, value_match, dvm };

inline DvmMode condition_mode(Condition c) {
    switch (c) {
        case Condition::none: return DvmMode::none;
        case Condition::distill: return DvmMode::distill_only;
        case Condition::value_match: return DvmMode::value_match_only;
        case Condition::dvm: return DvmMode::dvm;
    }
    return DvmMode::none;
}

struct ExperimentConfig {
    Domain domain = Domain::spread2;
    Condition condition = Condition::none;
    std::vector<uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    int phase1_episodes = 4000;
    int phase2_episodes = 4000;
    int eval_interval = 10;   // episodes between evaluation points
    int eval_episodes = 10;   // exploration-free episodes per point
    int update_every = 1;     // environment steps between update rounds
    size_t replay_capacity = 1000000;
    std::vector<size_t> hidden = {256, 256};
    bool eps_reset_phase2 = true;   // restart the MADDPG schedule in phase II
    bool phase2_learning = true;    // false evaluates the fixed post-DVM policy
    int parallel_seeds = 1;
    std::string out_dir = "out";
    EnvParams env;
    AlgoConfig algo;
    DvmConfig dvm;

    void finalize() {
        dvm.mode = condition_mode(condition);
        // Seed sweeps shift all seeds through the environment.
        if (const char* off = std::getenv("DVM_SEED_OFFSET")) {
            char* end = nullptr;
            long v = std::strtol(off, &end, 10);
            if (end == off || *end != '\0') throw ConfigError("DVM_SEED_OFFSET must be an integer");
            for (uint64_t& s : seeds) s += static_cast<uint64_t>(v);
        }
    }

    void validate() const {
        if (seeds.empty()) throw ConfigError("at least one seed required");
        if (phase1_episodes < 0 || phase2_episodes < 0) throw ConfigError("negative phase length");
        if (eval_interval <= 0) throw ConfigError("eval interval must be positive");
        if (eval_episodes <= 0) throw ConfigError("eval episodes must be positive");
        if (update_every <= 0) throw ConfigError("update_every must be positive");
        if (hidden.empty()) throw ConfigError("at least one hidden layer required");
        if (parallel_seeds <= 0) throw ConfigError("parallel_seeds must be positive");
        if (env.episode_length <= 0) throw ConfigError("episode length must be positive");
        algo.validate();
        if (condition != Condition::none) dvm.validate();
    }
};

// ---------------------------------------------------------------------------
// Flat key = value config files ('#' starts a comment)
// ---------------------------------------------------------------------------

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::map<std::string, std::string> parse_config_text(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        kv[key] = val;
    }
    return kv;
}

inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    return parse_config_text(in);
}

inline Domain parse_domain(const std::string& s) {
    if (s == "spread1") return Domain::spread1;
    if (s == "spread2") return Domain::spread2;
    if (s == "spread3") return Domain::spread3;
    if (s == "spread4") return Domain::spread4;
    if (s == "pushbox") return Domain::pushbox;
    throw ConfigError("unknown domain: " + s);
}

inline Algo parse_algo(const std::string& s) {
    if (s == "maddpg" || s == "maddpg_discrete") return Algo::maddpg_discrete;
    if (s == "masac") return Algo::masac;
    throw ConfigError("unknown algorithm: " + s);
}

inline Condition parse_condition(const std::string& s) {
    if (s == "none") return Condition::none;
    if (s == "distill") return Condition::distill;
    if (s == "value_match") return Condition::value_match;
    if (s == "dvm") return Condition::dvm;
    throw ConfigError("unknown condition: " + s);
}

inline const char* domain_name(Domain d) {
    switch (d) {
        case Domain::spread1: return "spread1";
        case Domain::spread2: return "spread2";
        case Domain::spread3: return "spread3";
        case Domain::spread4: return "spread4";
        case Domain::pushbox: return "pushbox";
    }
    return "?";
}

inline const char* algo_name(Algo a) { return a == Algo::maddpg_discrete ? "maddpg" : "masac"; }

inline const char* condition_name(Condition c) {
    switch (c) {
        case Condition::none: return "none";
        case Condition::distill: return "distill";
        case Condition::value_match: return "value_match";
        case Condition::dvm: return "dvm";
    }
    return "?";
}

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true/false");
}

inline double parse_double(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

inline long parse_long(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& v, const std::string& key, F item) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        if (!part.empty()) out.push_back(item(part, key));
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

}  // namespace detail

// Applies key/value pairs onto a config; unknown keys are errors.
inline void apply_config(ExperimentConfig& cfg, const std::map<std::string, std::string>& kv) {
    using namespace detail;
    for (const auto& [key, val] : kv) {
        if (key == "domain") cfg.domain = parse_domain(val);
        else if (key == "algo" || key == "algorithm") cfg.algo.algo = parse_algo(val);
        else if (key == "condition") cfg.condition = parse_condition(val);
        else if (key == "seeds")
            cfg.seeds = parse_list<uint64_t>(val, key, [](const std::string& s, const std::string& k) {
                return static_cast<uint64_t>(parse_long(s, k));
            });
        else if (key == "phase1_episodes") cfg.phase1_episodes = static_cast<int>(parse_long(val, key));
        else if (key == "phase2_episodes") cfg.phase2_episodes = static_cast<int>(parse_long(val, key));
        else if (key == "eval_interval") cfg.eval_interval = static_cast<int>(parse_long(val, key));
        else if (key == "eval_episodes") cfg.eval_episodes = static_cast<int>(parse_long(val, key));
        else if (key == "update_every") cfg.update_every = static_cast<int>(parse_long(val, key));
        else if (key == "replay_capacity") cfg.replay_capacity = static_cast<size_t>(parse_long(val, key));
        else if (key == "hidden")
            cfg.hidden = parse_list<size_t>(val, key, [](const std::string& s, const std::string& k) {
                return static_cast<size_t>(parse_long(s, k));
            });
        else if (key == "eps_reset_phase2") cfg.eps_reset_phase2 = parse_bool(val, key);
        else if (key == "phase2_learning") cfg.phase2_learning = parse_bool(val, key);
        else if (key == "parallel_seeds") cfg.parallel_seeds = static_cast<int>(parse_long(val, key));
        else if (key == "out_dir") cfg.out_dir = val;
        else if (key == "episode_length") cfg.env.episode_length = static_cast<int>(parse_long(val, key));
        else if (key == "gamma") cfg.algo.gamma = parse_double(val, key);
        else if (key == "actor_lr") cfg.algo.actor_lr = parse_double(val, key);
        else if (key == "critic_lr") cfg.algo.critic_lr = parse_double(val, key);
        else if (key == "batch_size") cfg.algo.batch_size = static_cast<int>(parse_long(val, key));
        else if (key == "alpha") cfg.algo.alpha = parse_double(val, key);
        else if (key == "rho") cfg.algo.rho = parse_double(val, key);
        else if (key == "gumbel_temperature") cfg.algo.gumbel_temperature = parse_double(val, key);
        else if (key == "eps_start") cfg.algo.eps.start = parse_double(val, key);
        else if (key == "eps_end") cfg.algo.eps.end = parse_double(val, key);
        else if (key == "eps_decay_fraction") cfg.algo.eps.decay_fraction = parse_double(val, key);
        else if (key == "dvm_iterations") cfg.dvm.iterations = static_cast<int>(parse_long(val, key));
        else if (key == "dvm_batch_size") cfg.dvm.batch_size = static_cast<int>(parse_long(val, key));
        else if (key == "dvm_tau") cfg.dvm.tau = parse_double(val, key);
        else if (key == "dvm_lr") cfg.dvm.lr = parse_double(val, key);
        else if (key == "dvm_fresh_init") cfg.dvm.fresh_init = parse_bool(val, key);
        else if (key == "dvm_interleave") cfg.dvm.interleave = parse_bool(val, key);
        else throw ConfigError("unknown config key: " + key);
    }
}

// Paper-scale learning rates differ per algorithm; call after the algorithm is
// known but before explicit lr keys are applied.
inline void apply_algo_lr_defaults(ExperimentConfig& cfg) {
    if (cfg.algo.algo == Algo::masac) {
        cfg.algo.actor_lr = 3e-4;
        cfg.algo.critic_lr = 3e-4;
    } else {
        cfg.algo.actor_lr = 0.01;
        cfg.algo.critic_lr = 0.01;
    }
    cfg.dvm.lr = cfg.algo.critic_lr;
}

// Builds a config from a file and CLI overrides. The algorithm is resolved
// first so its learning-rate defaults apply before any explicit lr keys.
inline ExperimentConfig build_config(const std::map<std::string, std::string>& file_kv,
                                     const std::map<std::string, std::string>& overrides = {}) {
    ExperimentConfig cfg;
    auto lookup = [&](const std::string& key) -> std::string {
        if (auto it = overrides.find(key); it != overrides.end()) return it->second;
        if (auto it = file_kv.find(key); it != file_kv.end()) return it->second;
        return "";
    };
    std::string a = lookup("algo");
    if (a.empty()) a = lookup("algorithm");
    if (!a.empty()) cfg.algo.algo = parse_algo(a);
    apply_algo_lr_defaults(cfg);
    apply_config(cfg, file_kv);
    apply_config(cfg, overrides);
    cfg.finalize();
    cfg.validate();
    return cfg;
}

}  // namespace dvm
