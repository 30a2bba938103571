#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "collab/fingerprint.hpp"
#include "collab/types.hpp"

namespace collab {

inline std::string fixed3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

struct PrototypeEntry {
    std::string feature;
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation
};

struct Rubric {
    std::string version = "1";
    std::vector<std::string> selected_features;  // MI rank order
    std::array<std::vector<PrototypeEntry>, kNumTypes> prototypes;
    std::array<int, kNumTypes> source_episode_count{};
};

inline Rubric build_rubric(const LabeledFingerprints& dataset,
                           const std::vector<std::string>& selected) {
    Rubric rubric;
    rubric.selected_features = selected;

    std::array<std::vector<const Fingerprint*>, kNumTypes> by_type;
    for (const auto& [fp, type] : dataset)
        by_type[static_cast<size_t>(type)].push_back(&fp);
    for (int t = 0; t < kNumTypes; ++t) {
        const auto& group = by_type[static_cast<size_t>(t)];
        if (group.size() < 2)
            throw InsufficientSamples(std::string("build_rubric: type '") +
                                      to_string(static_cast<TeammateType>(t)) + "' has " +
                                      std::to_string(group.size()) + " samples, need >= 2");
        rubric.source_episode_count[static_cast<size_t>(t)] = static_cast<int>(group.size());
        for (const auto& feature : selected) {
            double sum = 0.0;
            for (const auto* fp : group) sum += fp->value_of(feature);
            double mean = sum / static_cast<double>(group.size());
            double sq = 0.0;
            for (const auto* fp : group) {
                double d = fp->value_of(feature) - mean;
                sq += d * d;
            }
            double stddev = std::sqrt(sq / static_cast<double>(group.size()));
            rubric.prototypes[static_cast<size_t>(t)].push_back({feature, mean, stddev});
        }
    }
    return rubric;
}

// One-sentence behavioral gloss per type. Versioned constants: classification
// prompts must be bit-stable across runs.
inline const char* type_gloss(TeammateType t) {
    switch (t) {
        case TeammateType::Default:
            return "no strong bias; works whichever subtask is available.";
        case TeammateType::PotFocused:
            return "prioritizes placing onions in the pot.";
        case TeammateType::PlateFocused:
            return "prioritizes picking up plates and lingers near the plate pile.";
        case TeammateType::ServeFocused:
            return "prioritizes plating and delivering completed soups.";
        case TeammateType::Mixed:
            return "rotates its effort across all subtasks over time.";
    }
    return "";
}

// Deterministic template: probe length line, then one line per catalog
// feature, in catalog order.
inline std::string describe(const Fingerprint& fp) {
    std::string out = "Probe window: " + std::to_string(fp.probe_length) + " steps.\n";
    const auto& cat = feature_catalog();
    for (const auto& def : cat)
        out += def.human + ": " + fixed3(fp.value_of(def.id)) + " (" + def.unit + ")\n";
    return out;
}

inline std::string rubric_to_text(const Rubric& rubric) {
    std::string out;
    for (int t = 0; t < kNumTypes; ++t) {
        auto type = static_cast<TeammateType>(t);
        out += std::string("Type ") + to_string(type) + ": " + type_gloss(type) + "\n";
        for (const auto& entry : rubric.prototypes[static_cast<size_t>(t)]) {
            const auto& def = feature_catalog()[static_cast<size_t>(catalog_index(entry.feature))];
            out += "  " + def.human + ": mu=" + fixed3(entry.mean) +
                   ", sigma=" + fixed3(entry.stddev) + "\n";
        }
    }
    return out;
}

// --- JSON codecs ------------------------------------------------------------

inline nlohmann::json rubric_to_json(const Rubric& rubric) {
    nlohmann::json prototypes = nlohmann::json::object();
    nlohmann::json counts = nlohmann::json::object();
    for (int t = 0; t < kNumTypes; ++t) {
        auto type = static_cast<TeammateType>(t);
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& e : rubric.prototypes[static_cast<size_t>(t)])
            rows.push_back({{"feature", e.feature}, {"mean", e.mean}, {"std", e.stddev}});
        prototypes[to_string(type)] = rows;
        counts[to_string(type)] = rubric.source_episode_count[static_cast<size_t>(t)];
    }
    return {{"version", rubric.version},
            {"selected_features", rubric.selected_features},
            {"episode_counts", counts},
            {"prototypes", prototypes}};
}

inline Rubric rubric_from_json(const nlohmann::json& j) {
    Rubric rubric;
    rubric.version = j.at("version").get<std::string>();
    rubric.selected_features = j.at("selected_features").get<std::vector<std::string>>();
    for (int t = 0; t < kNumTypes; ++t) {
        auto type = static_cast<TeammateType>(t);
        rubric.source_episode_count[static_cast<size_t>(t)] =
            j.at("episode_counts").at(to_string(type)).get<int>();
        for (const auto& row : j.at("prototypes").at(to_string(type))) {
            rubric.prototypes[static_cast<size_t>(t)].push_back(
                {row.at("feature").get<std::string>(), row.at("mean").get<double>(),
                 row.at("std").get<double>()});
        }
    }
    return rubric;
}

}  // namespace collab
