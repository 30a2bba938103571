#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "collab/env.hpp"
#include "collab/errors.hpp"
#include "collab/harness.hpp"
#include "collab/llm_client.hpp"
#include "collab/policies.hpp"
#include "collab/retrieval.hpp"

namespace collab {

// --- Minimal TOML subset ------------------------------------------------------
//
// Supported: comments, [section] and [section.sub] headers, key = value with
// quoted strings, integers, floats, booleans, and single-line arrays of
// scalars. That covers the whole config schema; no TOML library is vendored.

namespace toml {

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::string parse_quoted(const std::string& raw) {
    std::string out;
    for (size_t i = 1; i < raw.size(); ++i) {
        char c = raw[i];
        if (c == '"') {
            if (trim(raw.substr(i + 1)).empty()) return out;
            throw ConfigInvalid("trailing characters after string: " + raw);
        }
        if (c == '\\' && i + 1 < raw.size()) {
            char n = raw[++i];
            switch (n) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: throw ConfigInvalid(std::string("unknown escape \\") + n);
            }
        } else {
            out += c;
        }
    }
    throw ConfigInvalid("unterminated string: " + raw);
}

inline nlohmann::json parse_scalar(const std::string& raw_in) {
    std::string raw = trim(raw_in);
    if (raw.empty()) throw ConfigInvalid("empty value");
    if (raw.front() == '"') return parse_quoted(raw);
    if (raw == "true") return true;
    if (raw == "false") return false;
    bool integral = true;
    for (size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (i == 0 && (c == '+' || c == '-')) continue;
        if (!std::isdigit(static_cast<unsigned char>(c))) integral = false;
    }
    if (integral) {
        try {
            return static_cast<std::int64_t>(std::stoll(raw));
        } catch (...) {
            throw ConfigInvalid("bad integer: " + raw);
        }
    }
    char* end = nullptr;
    double d = std::strtod(raw.c_str(), &end);
    if (end == raw.c_str() + raw.size()) return d;
    throw ConfigInvalid("cannot parse value: " + raw);
}

inline nlohmann::json parse_value(const std::string& raw_in) {
    std::string raw = trim(raw_in);
    if (!raw.empty() && raw.front() == '[') {
        if (raw.back() != ']') throw ConfigInvalid("unterminated array: " + raw);
        nlohmann::json arr = nlohmann::json::array();
        std::string inner = raw.substr(1, raw.size() - 2);
        std::string item;
        bool in_string = false;
        for (size_t i = 0; i < inner.size(); ++i) {
            char c = inner[i];
            if (c == '"' && (i == 0 || inner[i - 1] != '\\')) in_string = !in_string;
            if (c == ',' && !in_string) {
                if (!trim(item).empty()) arr.push_back(parse_scalar(item));
                item.clear();
            } else {
                item += c;
            }
        }
        if (!trim(item).empty()) arr.push_back(parse_scalar(item));
        return arr;
    }
    return parse_scalar(raw);
}

inline void set_dotted(nlohmann::json& root, const std::string& dotted, nlohmann::json value) {
    nlohmann::json* node = &root;
    std::string rest = dotted;
    for (size_t dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
        std::string head = rest.substr(0, dot);
        rest = rest.substr(dot + 1);
        if (head.empty()) throw ConfigInvalid("bad key: " + dotted);
        node = &(*node)[head];
        if (!node->is_object() && !node->is_null()) throw ConfigInvalid("key clash at " + head);
    }
    if (rest.empty()) throw ConfigInvalid("bad key: " + dotted);
    (*node)[rest] = std::move(value);
}

inline nlohmann::json parse(const std::string& text) {
    nlohmann::json root = nlohmann::json::object();
    std::istringstream in(text);
    std::string line, prefix;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigInvalid("line " + std::to_string(lineno) +
                                                     ": bad section header: " + t);
            prefix = trim(t.substr(1, t.size() - 2));
            if (prefix.empty()) throw ConfigInvalid("empty section header");
            continue;
        }
        size_t eq = std::string::npos;
        bool in_string = false;
        for (size_t i = 0; i < t.size(); ++i) {
            if (t[i] == '"') in_string = !in_string;
            if (t[i] == '=' && !in_string) {
                eq = i;
                break;
            }
        }
        if (eq == std::string::npos)
            throw ConfigInvalid("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string raw = t.substr(eq + 1);
        // trailing comments after complete values
        size_t hash = std::string::npos;
        in_string = false;
        for (size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] == '"') in_string = !in_string;
            if (raw[i] == '#' && !in_string) {
                hash = i;
                break;
            }
        }
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        if (key.empty()) throw ConfigInvalid("line " + std::to_string(lineno) + ": empty key");
        set_dotted(root, prefix.empty() ? key : prefix + "." + key, parse_value(raw));
    }
    return root;
}

}  // namespace toml

// --- Run configuration -----------------------------------------------------------

struct RunConfig {
    std::string run_id;  // derived from the config hash when left empty

    EnvConfig env;
    int policy_commitment = 6;

    int bins = 8;
    int top_r = 12;

    EmbeddingMode embedding_mode = EmbeddingMode::FeatureZScore;
    int retrieval_k = 5;
    int db_episodes_per_type = 10;
    std::uint64_t db_seed_base = 0;

    LlmConfig llm;
    LogRegOptions logreg;

    std::vector<std::string> methods{"random",  "static", "oracle", "prototype",
                                     "logreg",  "plastic", "collab", "recollab"};
    std::vector<std::string> layouts{"cramped_room", "asymmetric_advantage",
                                     "coordination_ring"};
    EvalOptions eval;

    std::vector<int> ablation_probe_lengths{5, 10, 20, 40, 80};
    std::vector<int> ablation_k_values{1, 3, 5, 10};
    std::string ablation_layout = "coordination_ring";

    std::string layout_dir = "data/layouts";
    std::string db_file = "out/db.jsonl";
    std::string rubric_file = "out/rubric.json";
    std::string output_dir = "out";

    nlohmann::json raw;  // parsed config, used for the run-id hash
};

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* section, const char* key, T& out) {
    if (!j.contains(section)) return;
    const auto& s = j.at(section);
    if (!s.is_object()) throw ConfigInvalid(std::string("section ") + section + " is not a table");
    if (!s.contains(key)) return;
    try {
        out = s.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigInvalid(std::string(section) + "." + key + " has the wrong type");
    }
}

}  // namespace detail

inline PolicyProfile profile_from_json(PolicyProfile base, const nlohmann::json& j) {
    const char* subtask_keys[kNumSubtasks] = {"fetch_onion", "fill_pot",  "fetch_plate",
                                              "plate_soup",  "deliver",   "idle"};
    for (int s = 0; s < kNumSubtasks; ++s) {
        if (j.contains(subtask_keys[s]))
            base.weights[static_cast<size_t>(s)] = j.at(subtask_keys[s]).get<double>();
    }
    if (j.contains("commitment")) base.commitment = j.at("commitment").get<int>();
    if (j.contains("cycle_period")) base.cycle_period = j.at("cycle_period").get<int>();
    if (j.contains("cycle_boost")) base.cycle_boost = j.at("cycle_boost").get<double>();
    return base;
}

// Calibration overrides for the scripted profiles, applied by the CLI once at
// startup. Tests and library callers that bypass the CLI see the shipped
// defaults.
struct ProfileOverrides {
    std::array<std::optional<PolicyProfile>, kNumTypes> teammate;
    std::array<std::optional<PolicyProfile>, kNumTypes> best_response;
};

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    c.raw = j;
    if (j.contains("run_id")) c.run_id = j.at("run_id").get<std::string>();

    detail::read_field(j, "env", "horizon", c.env.horizon);
    detail::read_field(j, "env", "reward_per_delivery", c.env.reward_per_delivery);
    detail::read_field(j, "env", "cook_time", c.env.cook_time);
    detail::read_field(j, "env", "gamma", c.env.gamma);
    detail::read_field(j, "env", "handoff_window", c.env.handoff_window);

    detail::read_field(j, "policies", "commitment", c.policy_commitment);

    detail::read_field(j, "fingerprint", "bins", c.bins);
    detail::read_field(j, "fingerprint", "top_r", c.top_r);

    std::string mode = "feature_zscore";
    detail::read_field(j, "retrieval", "mode", mode);
    c.embedding_mode = embedding_mode_from_string(mode);
    detail::read_field(j, "retrieval", "k", c.retrieval_k);
    detail::read_field(j, "retrieval", "episodes_per_type", c.db_episodes_per_type);
    detail::read_field(j, "retrieval", "seed_base", c.db_seed_base);

    detail::read_field(j, "llm", "base_url", c.llm.base_url);
    detail::read_field(j, "llm", "model_id", c.llm.model_id);
    detail::read_field(j, "llm", "api_key_env", c.llm.api_key_env);
    detail::read_field(j, "llm", "timeout_seconds", c.llm.timeout_seconds);
    detail::read_field(j, "llm", "max_retries", c.llm.max_retries);
    detail::read_field(j, "llm", "max_in_flight", c.llm.max_in_flight);
    detail::read_field(j, "llm", "backoff_initial_seconds", c.llm.backoff_initial_seconds);
    std::string llm_mode = "mock";
    detail::read_field(j, "llm", "mode", llm_mode);
    if (llm_mode == "mock") {
        c.llm.mode = LlmMode::Mock;
    } else if (llm_mode == "live") {
        c.llm.mode = LlmMode::Live;
    } else {
        throw ConfigInvalid("llm.mode must be 'mock' or 'live'");
    }

    detail::read_field(j, "logreg", "epochs", c.logreg.epochs);
    detail::read_field(j, "logreg", "lr", c.logreg.lr);
    detail::read_field(j, "logreg", "l2", c.logreg.l2);

    detail::read_field(j, "evaluation", "methods", c.methods);
    detail::read_field(j, "evaluation", "layouts", c.layouts);
    detail::read_field(j, "evaluation", "probe_length", c.eval.probe_length);
    detail::read_field(j, "evaluation", "seed_base", c.eval.seed_base);
    detail::read_field(j, "evaluation", "seed_groups", c.eval.seed_groups);
    detail::read_field(j, "evaluation", "episodes_per_type_per_group",
                       c.eval.episodes_per_type_per_group);

    detail::read_field(j, "ablation", "probe_lengths", c.ablation_probe_lengths);
    detail::read_field(j, "ablation", "k_values", c.ablation_k_values);
    detail::read_field(j, "ablation", "layout", c.ablation_layout);

    detail::read_field(j, "paths", "layout_dir", c.layout_dir);
    detail::read_field(j, "paths", "db_file", c.db_file);
    detail::read_field(j, "paths", "rubric_file", c.rubric_file);
    detail::read_field(j, "paths", "output_dir", c.output_dir);
    return c;
}

inline ProfileOverrides profile_overrides_from_json(const nlohmann::json& j) {
    ProfileOverrides out;
    if (!j.contains("policies")) return out;
    const auto& p = j.at("policies");
    for (int t = 0; t < kNumTypes; ++t) {
        auto type = static_cast<TeammateType>(t);
        if (p.contains("teammate") && p.at("teammate").contains(to_string(type)))
            out.teammate[static_cast<size_t>(t)] = profile_from_json(
                teammate_profile(type), p.at("teammate").at(to_string(type)));
        if (p.contains("best_response") && p.at("best_response").contains(to_string(type)))
            out.best_response[static_cast<size_t>(t)] = profile_from_json(
                best_response_profile(type), p.at("best_response").at(to_string(type)));
    }
    return out;
}

inline RunConfig load_config(const std::string& path,
                             const std::vector<std::string>& set_overrides = {}) {
    std::ifstream f(path);
    if (!f) throw ConfigInvalid("cannot open config file: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    nlohmann::json j = toml::parse(buf.str());
    for (const auto& kv : set_overrides) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigInvalid("--set expects section.key=value, got: " + kv);
        std::string key = kv.substr(0, eq);
        std::string raw = kv.substr(eq + 1);
        nlohmann::json value;
        try {
            value = toml::parse_value(raw);
        } catch (const ConfigInvalid&) {
            value = raw;  // bare words become strings
        }
        toml::set_dotted(j, key, std::move(value));
    }
    return config_from_json(j);
}

// Evaluation seeds must never collide with database collection seeds.
inline void validate_seed_hygiene(const RunConfig& c) {
    std::uint64_t db_lo = c.db_seed_base;
    std::uint64_t db_hi = c.db_seed_base + static_cast<std::uint64_t>(c.db_episodes_per_type);
    std::uint64_t ev_lo = c.eval.seed_base;
    std::uint64_t ev_hi =
        c.eval.seed_base + static_cast<std::uint64_t>(c.eval.seed_groups * kNumTypes *
                                                      c.eval.episodes_per_type_per_group);
    bool overlap = db_lo < ev_hi && ev_lo < db_hi;
    if (overlap)
        throw ConfigInvalid("evaluation seeds [" + std::to_string(ev_lo) + ", " +
                            std::to_string(ev_hi) + ") overlap database seeds [" +
                            std::to_string(db_lo) + ", " + std::to_string(db_hi) + ")");
}

inline void validate_config(const RunConfig& c) {
    if (c.env.horizon < 1) throw ConfigInvalid("env.horizon must be >= 1");
    if (c.env.reward_per_delivery <= 0)
        throw ConfigInvalid("env.reward_per_delivery must be > 0");
    if (c.env.cook_time < 1) throw ConfigInvalid("env.cook_time must be >= 1");
    if (c.env.gamma <= 0.0 || c.env.gamma > 1.0)
        throw ConfigInvalid("env.gamma must be in (0, 1]");
    if (c.eval.probe_length < 1 || c.eval.probe_length >= c.env.horizon)
        throw ConfigInvalid("evaluation.probe_length must be in [1, horizon)");
    if (c.bins < 2) throw ConfigInvalid("fingerprint.bins must be >= 2");
    if (c.top_r < 1) throw ConfigInvalid("fingerprint.top_r must be >= 1");
    if (c.retrieval_k < 1) throw ConfigInvalid("retrieval.k must be >= 1");
    if (c.layouts.empty()) throw ConfigInvalid("evaluation.layouts must not be empty");
    for (const auto& m : c.methods) {
        const auto& known = known_methods();
        if (std::find(known.begin(), known.end(), m) == known.end())
            throw ConfigInvalid("unknown method in evaluation.methods: " + m);
    }
    validate_seed_hygiene(c);
}

inline std::string derived_run_id(const RunConfig& c, const std::string& command) {
    if (!c.run_id.empty()) return c.run_id;
    return command + "-" + hex64(fnv1a64(command + "\n" + c.raw.dump()));
}

inline void apply_policy_config(const RunConfig& c) {
    set_default_commitment(c.policy_commitment);
    auto overrides = profile_overrides_from_json(c.raw);
    for (int t = 0; t < kNumTypes; ++t) {
        auto type = static_cast<TeammateType>(t);
        if (overrides.teammate[static_cast<size_t>(t)])
            set_teammate_profile_override(type, overrides.teammate[static_cast<size_t>(t)]);
        if (overrides.best_response[static_cast<size_t>(t)])
            set_best_response_profile_override(type,
                                               overrides.best_response[static_cast<size_t>(t)]);
    }
}

}  // namespace collab
