#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "collab/env.hpp"
#include "collab/policies.hpp"
#include "collab/types.hpp"

namespace collab {

// Agent 0 is the teammate under observation; agent 1 is the controlled agent.
inline constexpr int kTeammateAgent = 0;
inline constexpr int kControlledAgent = 1;

struct ProbeStep {
    Observation obs;  // state before the actions of this step
    Action teammate_action = Action::Stay;
    Action controlled_action = Action::Stay;
    double reward = 0.0;
    std::array<StepEvents, 2> events{};
};

struct ProbeHistory {
    std::vector<ProbeStep> steps;
    int length() const { return static_cast<int>(steps.size()); }
};

struct Fingerprint {
    std::vector<std::pair<std::string, double>> features;  // catalog order
    int probe_length = 0;

    double value_of(const std::string& name) const {
        for (const auto& [id, v] : features)
            if (id == name) return v;
        throw UnknownFeature("fingerprint has no feature '" + name + "'");
    }
    bool operator==(const Fingerprint&) const = default;
};

struct FeatureDef {
    std::string id;
    std::string human;
    std::string unit;
};

// The fixed computable-feature catalog. Every fingerprint carries exactly
// these entries, in this order.
inline const std::vector<FeatureDef>& feature_catalog() {
    static const std::vector<FeatureDef> catalog = [] {
        std::vector<FeatureDef> c;
        const char* station_human[] = {"onion pile", "pot", "plate pile", "serve window"};
        for (int k = 0; k < kNumStations; ++k) {
            auto kind = static_cast<StationKind>(k);
            c.push_back({std::string("dwell_near_") + to_string(kind),
                         std::string("time spent adjacent to ") + station_human[k], "steps"});
        }
        for (int a = 0; a < kNumActions; ++a) {
            auto act = static_cast<Action>(a);
            c.push_back({std::string("action_frac_") + to_string(act),
                         std::string("fraction of ") + to_string(act) + " actions", "fraction"});
        }
        for (int k = 0; k < kNumStations; ++k) {
            auto kind = static_cast<StationKind>(k);
            c.push_back({std::string("interact_count_") + to_string(kind),
                         std::string("interactions with ") + station_human[k], "count"});
        }
        c.push_back({"handoff_count", "counter handoffs", "count"});
        c.push_back({"blocked_count", "blocked movements", "count"});
        c.push_back({"cumulative_reward", "team reward collected", "points"});
        const char* held_human[] = {"nothing", "an onion", "a plate", "a soup"};
        for (int h = 0; h < kNumHeldItems; ++h) {
            auto item = static_cast<HeldItem>(h);
            c.push_back({std::string("held_frac_") + to_string(item),
                         std::string("fraction of time holding ") + held_human[h], "fraction"});
        }
        return c;
    }();
    return catalog;
}

inline int catalog_index(const std::string& id) {
    const auto& cat = feature_catalog();
    for (size_t i = 0; i < cat.size(); ++i)
        if (cat[i].id == id) return static_cast<int>(i);
    return -1;
}

inline Fingerprint extract_features(const ProbeHistory& history) {
    if (history.steps.empty()) throw EmptyHistory("cannot fingerprint an empty probe history");
    const int P = history.length();
    const Layout& L = *history.steps.front().obs.state.layout;

    std::array<int, kNumStations> dwell{};
    std::array<int, kNumActions> action_count{};
    std::array<int, kNumStations> interact_count{};
    std::array<int, kNumHeldItems> held_count{};
    int handoffs = 0, blocked = 0;
    double reward = 0.0;

    std::array<std::vector<Cell>, kNumStations> station_cells;
    for (int k = 0; k < kNumStations; ++k)
        station_cells[static_cast<size_t>(k)] = L.cells_of(tile_of(static_cast<StationKind>(k)));

    for (const auto& step : history.steps) {
        const auto& teammate = step.obs.state.agents[kTeammateAgent];
        for (int k = 0; k < kNumStations; ++k) {
            const auto& cells = station_cells[static_cast<size_t>(k)];
            if (std::any_of(cells.begin(), cells.end(),
                            [&](Cell c) { return chebyshev_adjacent(teammate.pos, c); }))
                ++dwell[static_cast<size_t>(k)];
        }
        ++action_count[static_cast<size_t>(step.teammate_action)];
        if (step.teammate_action == Action::Interact) {
            Cell faced = faced_cell(step.obs.state, kTeammateAgent);
            if (L.in_bounds(faced)) {
                for (int k = 0; k < kNumStations; ++k) {
                    if (L.at(faced) == tile_of(static_cast<StationKind>(k)))
                        ++interact_count[static_cast<size_t>(k)];
                }
            }
        }
        if (step.events[kTeammateAgent].handoff) ++handoffs;
        if (step.events[kTeammateAgent].blocked) ++blocked;
        reward += step.reward;
        ++held_count[static_cast<size_t>(teammate.held)];
    }

    Fingerprint fp;
    fp.probe_length = P;
    const auto& cat = feature_catalog();
    std::vector<double> values;
    for (int k = 0; k < kNumStations; ++k) values.push_back(dwell[static_cast<size_t>(k)]);
    for (int a = 0; a < kNumActions; ++a)
        values.push_back(static_cast<double>(action_count[static_cast<size_t>(a)]) / P);
    for (int k = 0; k < kNumStations; ++k)
        values.push_back(interact_count[static_cast<size_t>(k)]);
    values.push_back(handoffs);
    values.push_back(blocked);
    values.push_back(reward);
    for (int h = 0; h < kNumHeldItems; ++h)
        values.push_back(static_cast<double>(held_count[static_cast<size_t>(h)]) / P);

    for (size_t i = 0; i < cat.size(); ++i) fp.features.emplace_back(cat[i].id, values[i]);
    return fp;
}

using LabeledFingerprints = std::vector<std::pair<Fingerprint, TeammateType>>;

// Equal-frequency cut points: the k*n/B-th order statistics, k = 1..B-1.
// A value's bin is the number of cut points <= it; duplicate cuts collapse
// bins, so constant features land in a single bin.
inline std::vector<double> equal_frequency_cuts(std::vector<double> values, int bins) {
    std::sort(values.begin(), values.end());
    const auto n = static_cast<long long>(values.size());
    std::vector<double> cuts;
    for (int k = 1; k < bins; ++k)
        cuts.push_back(values[static_cast<size_t>(k * n / bins)]);
    return cuts;
}

inline int bin_of(double value, const std::vector<double>& cuts) {
    return static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), value) - cuts.begin());
}

// Plug-in mutual information, in nats, between a discretized feature and the
// teammate type over the empirical joint distribution.
inline double estimate_mi(const LabeledFingerprints& dataset, const std::string& feature,
                          int bins) {
    if (dataset.empty()) throw Error("estimate_mi: empty dataset");
    if (bins < 2) throw Error("estimate_mi: need at least 2 bins");
    if (catalog_index(feature) < 0) throw UnknownFeature("estimate_mi: '" + feature + "'");

    const auto n = static_cast<double>(dataset.size());
    std::vector<double> values;
    values.reserve(dataset.size());
    for (const auto& [fp, type] : dataset) values.push_back(fp.value_of(feature));
    const auto cuts = equal_frequency_cuts(values, bins);

    std::vector<std::vector<double>> joint(static_cast<size_t>(bins),
                                           std::vector<double>(kNumTypes, 0.0));
    std::vector<double> p_bin(static_cast<size_t>(bins), 0.0);
    std::array<double, kNumTypes> p_type{};
    for (size_t i = 0; i < dataset.size(); ++i) {
        int b = bin_of(values[i], cuts);
        int t = static_cast<int>(dataset[i].second);
        joint[static_cast<size_t>(b)][static_cast<size_t>(t)] += 1.0;
        p_bin[static_cast<size_t>(b)] += 1.0;
        p_type[static_cast<size_t>(t)] += 1.0;
    }

    double mi = 0.0;
    for (int b = 0; b < bins; ++b) {
        for (int t = 0; t < kNumTypes; ++t) {
            double nbt = joint[static_cast<size_t>(b)][static_cast<size_t>(t)];
            if (nbt <= 0.0) continue;
            mi += (nbt / n) * std::log(nbt * n / (p_bin[static_cast<size_t>(b)] *
                                                  p_type[static_cast<size_t>(t)]));
        }
    }
    return mi;
}

// Top-r features by MI, descending, ties broken by catalog order.
inline std::vector<std::string> select_features(const LabeledFingerprints& dataset, int r,
                                                int bins) {
    const auto& cat = feature_catalog();
    if (r < 1) throw Error("select_features: r must be >= 1");
    r = std::min(r, static_cast<int>(cat.size()));

    std::vector<std::pair<double, size_t>> ranked;
    for (size_t i = 0; i < cat.size(); ++i)
        ranked.emplace_back(estimate_mi(dataset, cat[i].id, bins), i);
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    std::vector<std::string> out;
    for (int i = 0; i < r; ++i) out.push_back(cat[ranked[static_cast<size_t>(i)].second].id);
    return out;
}

// --- JSON codecs ------------------------------------------------------------

inline nlohmann::json fingerprint_to_json(const Fingerprint& fp) {
    nlohmann::json features = nlohmann::json::object();
    for (const auto& [id, v] : fp.features) features[id] = v;
    return {{"probe_length", fp.probe_length}, {"features", features}};
}

inline Fingerprint fingerprint_from_json(const nlohmann::json& j) {
    Fingerprint fp;
    fp.probe_length = j.at("probe_length").get<int>();
    const auto& features = j.at("features");
    for (const auto& def : feature_catalog()) {
        if (!features.contains(def.id))
            throw UnknownFeature("fingerprint JSON missing feature '" + def.id + "'");
        fp.features.emplace_back(def.id, features.at(def.id).get<double>());
    }
    return fp;
}

}  // namespace collab
