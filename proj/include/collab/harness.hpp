#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "collab/classify.hpp"
#include "collab/env.hpp"
#include "collab/fingerprint.hpp"
#include "collab/retrieval.hpp"
#include "collab/rollout.hpp"
#include "collab/rubric.hpp"

namespace collab {

struct ClassifierContext {
    const ProbeHistory& history;
    const Fingerprint& fingerprint;  // empty when the probe window is empty
    TeammateType true_type;          // consumed only by the oracle
    std::uint64_t seed;
};

using Classifier = std::function<ClassificationResult(const ClassifierContext&)>;

struct EpisodeEvent {
    int t = 0;
    std::string kind;  // "classify" | "switch" | "delivery"
    int agent = -1;
};

struct EpisodeResult {
    std::string method;
    std::string layout;
    TeammateType true_type = TeammateType::Default;
    TeammateType predicted_type = TeammateType::Default;
    double confidence = 0.0;
    bool fallback_used = false;
    std::string source;
    std::string prompt_hash;
    int switch_step = 0;
    double episodic_return = 0.0;
    int deliveries = 0;
    std::uint64_t seed = 0;
    std::vector<EpisodeEvent> events;
};

struct MethodSummary {
    std::string method;
    std::string layout;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    double return_mean = 0.0;
    double return_std = 0.0;
    int episodes = 0;
    std::array<std::array<int, kNumTypes>, kNumTypes> confusion{};  // [true][predicted]
};

inline const std::vector<std::string>& known_methods() {
    static const std::vector<std::string> names{
        "random", "static", "oracle", "prototype", "logreg", "plastic", "collab", "recollab"};
    return names;
}

// The oracle knows the type at t=0, so its probe window is empty and it is
// routed immediately.
inline bool method_routes_at_zero(const std::string& method) { return method == "oracle"; }

// Everything layout-specific a classifier can depend on. The database is
// already filtered to this layout; the rubric, regression model and
// likelihoods are fit from it.
struct LayoutArtifacts {
    Layout layout;
    Rubric rubric;
    TrajectoryDB db;
    LogRegModel logreg;
    PlasticLikelihoods plastic;
    LlmClient* llm = nullptr;
    int retrieval_k = 5;
};

inline Classifier make_classifier(const std::string& method, const LayoutArtifacts& art) {
    if (method == "random") {
        return [](const ClassifierContext& ctx) {
            std::mt19937_64 rng(ctx.seed);
            return classify_random(rng);
        };
    }
    if (method == "static") {
        return [](const ClassifierContext&) {
            ClassificationResult res;
            res.predicted = TeammateType::Default;
            res.confidence = 1.0;
            res.source = "static";
            res.rationale = "default policy kept for the whole episode";
            return res;
        };
    }
    if (method == "oracle") {
        return [](const ClassifierContext& ctx) { return classify_oracle(ctx.true_type); };
    }
    if (method == "prototype") {
        return [&art](const ClassifierContext& ctx) {
            return classify_prototype(ctx.fingerprint, art.rubric);
        };
    }
    if (method == "logreg") {
        return [&art](const ClassifierContext& ctx) {
            return predict_logreg(art.logreg, ctx.fingerprint);
        };
    }
    if (method == "plastic") {
        return [&art](const ClassifierContext& ctx) {
            Belief belief = Belief::uniform();
            for (const auto& step : ctx.history.steps) {
                auto abs_state = abstract_state(step.obs.state, kTeammateAgent);
                belief = plastic_update(belief, abs_state, step.teammate_action, art.plastic);
            }
            int best = 0;
            for (int t = 1; t < kNumTypes; ++t)
                if (belief.probs[static_cast<size_t>(t)] > belief.probs[static_cast<size_t>(best)])
                    best = t;
            ClassificationResult res;
            res.predicted = static_cast<TeammateType>(best);
            res.confidence = belief.probs[static_cast<size_t>(best)];
            res.source = "plastic";
            res.rationale = "posterior after " + std::to_string(ctx.history.length()) +
                            " belief updates";
            return res;
        };
    }
    if (method == "collab") {
        return [&art](const ClassifierContext& ctx) {
            return classify_collab(ctx.fingerprint, art.rubric, *art.llm);
        };
    }
    if (method == "recollab") {
        return [&art](const ClassifierContext& ctx) {
            return classify_recollab(ctx.fingerprint, art.rubric, art.db, art.retrieval_k,
                                     *art.llm);
        };
    }
    throw Error("unknown method: " + method);
}

// Probe with the default best response, classify exactly once, route to the
// predicted type's best response, play out the horizon.
inline EpisodeResult run_episode(const Layout& layout, TeammateType true_type,
                                 const std::string& method, const Classifier& classifier,
                                 int probe_length, const EnvConfig& cfg, std::uint64_t seed) {
    if (probe_length >= cfg.horizon)
        throw Error("run_episode: probe length must be shorter than the horizon");
    const int effective_probe = method_routes_at_zero(method) ? 0 : probe_length;

    EpisodeResult out;
    out.method = method;
    out.layout = layout.name;
    out.true_type = true_type;
    out.seed = seed;
    out.switch_step = effective_probe;

    auto probe = run_probe(layout, true_type, effective_probe, cfg, seed);
    out.episodic_return = probe.reward;
    out.deliveries = probe.deliveries;
    for (int t = 0; t < effective_probe; ++t)
        for (int agent = 0; agent < 2; ++agent)
            if (probe.history.steps[static_cast<size_t>(t)].events[static_cast<size_t>(agent)]
                    .delivered)
                out.events.push_back({t, "delivery", agent});

    Fingerprint fp;
    if (effective_probe > 0) fp = extract_features(probe.history);
    ClassifierContext ctx{probe.history, fp, true_type, derive_seed(seed, kClassifierSalt)};
    ClassificationResult cls = classifier(ctx);
    out.predicted_type = cls.predicted;
    out.confidence = cls.confidence;
    out.fallback_used = cls.fallback_used;
    out.source = cls.source;
    out.prompt_hash = cls.prompt_hash;
    out.events.push_back({effective_probe, "classify", kControlledAgent});
    out.events.push_back({effective_probe, "switch", kControlledAgent});

    SubtaskPolicy routed = make_best_response_policy(
        cls.predicted, kControlledAgent, derive_seed(seed, kRoutedControllerSalt));
    GridState state = probe.state;
    while (state.t < cfg.horizon) {
        Action a0 = probe.teammate.act(observe(state, kTeammateAgent));
        Action a1 = routed.act(observe(state, kControlledAgent));
        StepResult res = step(state, a0, a1, cfg);
        out.episodic_return += res.reward;
        for (int agent = 0; agent < 2; ++agent) {
            if (res.events[static_cast<size_t>(agent)].delivered) {
                ++out.deliveries;
                out.events.push_back({state.t, "delivery", agent});
            }
        }
        state = res.state;
    }
    return out;
}

// --- Evaluation ----------------------------------------------------------------

struct EvalOptions {
    int probe_length = 20;
    std::uint64_t seed_base = 100;
    int seed_groups = 5;
    int episodes_per_type_per_group = 1;
};

// Episode seeds depend only on (group, type, repeat), so every method faces
// the identical set of episodes.
inline std::uint64_t evaluation_seed(const EvalOptions& opts, int group, int type, int repeat) {
    return opts.seed_base +
           static_cast<std::uint64_t>(
               (group * kNumTypes + type) * opts.episodes_per_type_per_group + repeat);
}

struct EvaluationOutput {
    std::vector<MethodSummary> summaries;
    std::vector<EpisodeResult> episodes;
};

namespace detail {

inline std::pair<double, double> mean_and_population_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(var)};
}

}  // namespace detail

inline MethodSummary summarize(const std::string& method, const std::string& layout,
                               const std::vector<EpisodeResult>& episodes,
                               const EvalOptions& opts) {
    MethodSummary s;
    s.method = method;
    s.layout = layout;
    std::vector<std::vector<const EpisodeResult*>> groups(
        static_cast<size_t>(opts.seed_groups));
    for (const auto& ep : episodes) {
        if (ep.method != method || ep.layout != layout) continue;
        ++s.episodes;
        ++s.confusion[static_cast<size_t>(ep.true_type)][static_cast<size_t>(ep.predicted_type)];
        auto group = static_cast<size_t>(
            (ep.seed - opts.seed_base) /
            static_cast<std::uint64_t>(kNumTypes * opts.episodes_per_type_per_group));
        groups[group].push_back(&ep);
    }
    std::vector<double> acc, ret;
    for (const auto& group : groups) {
        if (group.empty()) continue;
        double correct = 0.0, total_return = 0.0;
        for (const auto* ep : group) {
            if (ep->predicted_type == ep->true_type) correct += 1.0;
            total_return += ep->episodic_return;
        }
        acc.push_back(correct / static_cast<double>(group.size()));
        ret.push_back(total_return / static_cast<double>(group.size()));
    }
    std::tie(s.accuracy_mean, s.accuracy_std) = detail::mean_and_population_std(acc);
    std::tie(s.return_mean, s.return_std) = detail::mean_and_population_std(ret);
    return s;
}

inline EvaluationOutput evaluate(const std::vector<LayoutArtifacts>& layouts,
                                 const std::vector<std::string>& methods,
                                 const EvalOptions& opts, const EnvConfig& cfg) {
    EvaluationOutput out;
    for (const auto& method : methods) {
        for (const auto& art : layouts) {
            Classifier classifier = make_classifier(method, art);
            for (int group = 0; group < opts.seed_groups; ++group) {
                for (int type = 0; type < kNumTypes; ++type) {
                    for (int rep = 0; rep < opts.episodes_per_type_per_group; ++rep) {
                        std::uint64_t seed = evaluation_seed(opts, group, type, rep);
                        out.episodes.push_back(run_episode(
                            art.layout, static_cast<TeammateType>(type), method, classifier,
                            opts.probe_length, cfg, seed));
                    }
                }
            }
            out.summaries.push_back(summarize(method, art.layout.name, out.episodes, opts));
        }
    }
    return out;
}

// --- Pareto frontier -------------------------------------------------------------

struct ParetoPoint {
    double accuracy = 0.0;
    double episodic_return = 0.0;
    std::string label;
    bool operator==(const ParetoPoint&) const = default;
};

// Maximize both coordinates; equal points are never dominated, so duplicates
// all survive. Input order is preserved.
inline std::vector<ParetoPoint> pareto_frontier(const std::vector<ParetoPoint>& points) {
    auto dominates = [](const ParetoPoint& a, const ParetoPoint& b) {
        return a.accuracy >= b.accuracy && a.episodic_return >= b.episodic_return &&
               (a.accuracy > b.accuracy || a.episodic_return > b.episodic_return);
    };
    std::vector<ParetoPoint> out;
    for (const auto& p : points) {
        bool dominated = false;
        for (const auto& q : points) {
            if (dominates(q, p)) {
                dominated = true;
                break;
            }
        }
        if (!dominated) out.push_back(p);
    }
    return out;
}

// --- Ablations --------------------------------------------------------------------

struct AblationRow {
    int value = 0;  // probe length, or retrieval k
    MethodSummary summary;
};

// Per probe length, the whole pipeline is rebuilt at that length (database,
// rubric, regression, likelihoods) so prototypes match the feature scale.
struct AblationPipelineOptions {
    int episodes_per_type = 10;
    std::uint64_t db_seed_base = 0;
    int bins = 8;
    int top_r = 12;
    int retrieval_k = 5;
    LogRegOptions logreg;
};

inline LayoutArtifacts prepare_layout_artifacts(const Layout& layout, const TrajectoryDB& full_db,
                                                const EnvConfig& cfg,
                                                const AblationPipelineOptions& opts,
                                                LlmClient* llm) {
    LayoutArtifacts art;
    art.layout = layout;
    art.db = filter_by_layout(full_db, layout.name);
    if (art.db.empty()) throw Error("no database records for layout " + layout.name);
    LabeledFingerprints dataset;
    for (const auto& r : art.db.records) dataset.emplace_back(r.fingerprint, r.true_type);
    auto selected = select_features(dataset, opts.top_r, opts.bins);
    art.rubric = build_rubric(dataset, selected);
    art.logreg = fit_logreg(dataset, selected, opts.logreg);
    art.plastic = fit_plastic_likelihoods(art.db, {layout}, cfg);
    art.llm = llm;
    art.retrieval_k = opts.retrieval_k;
    return art;
}

inline std::vector<AblationRow> ablate_probe(const Layout& layout, const std::string& method,
                                             const std::vector<int>& probe_lengths,
                                             const EnvConfig& cfg, const EvalOptions& eval_opts,
                                             const AblationPipelineOptions& pipe_opts,
                                             LlmClient* llm) {
    std::vector<AblationRow> rows;
    for (int probe_length : probe_lengths) {
        TrajectoryDB db = collect_database({layout}, pipe_opts.episodes_per_type, probe_length,
                                           cfg, pipe_opts.db_seed_base,
                                           EmbeddingMode::FeatureZScore, llm, pipe_opts.bins,
                                           pipe_opts.top_r);
        LayoutArtifacts art = prepare_layout_artifacts(layout, db, cfg, pipe_opts, llm);
        EvalOptions opts = eval_opts;
        opts.probe_length = probe_length;
        auto result = evaluate({art}, {method}, opts, cfg);
        rows.push_back({probe_length, result.summaries.front()});
    }
    return rows;
}

inline std::vector<AblationRow> ablate_k(const Layout& layout, const TrajectoryDB& full_db,
                                         const std::vector<int>& k_values, const EnvConfig& cfg,
                                         const EvalOptions& eval_opts,
                                         const AblationPipelineOptions& pipe_opts,
                                         LlmClient* llm) {
    std::vector<AblationRow> rows;
    for (int k : k_values) {
        AblationPipelineOptions opts = pipe_opts;
        opts.retrieval_k = k;
        LayoutArtifacts art = prepare_layout_artifacts(layout, full_db, cfg, opts, llm);
        auto result = evaluate({art}, {"recollab"}, eval_opts, cfg);
        rows.push_back({k, result.summaries.front()});
    }
    return rows;
}

// --- Persistence --------------------------------------------------------------------

inline nlohmann::json episode_to_json(const EpisodeResult& ep) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : ep.events)
        events.push_back({{"t", e.t}, {"kind", e.kind}, {"agent", e.agent}});
    return {{"method", ep.method},
            {"layout", ep.layout},
            {"true_type", to_string(ep.true_type)},
            {"predicted_type", to_string(ep.predicted_type)},
            {"confidence", ep.confidence},
            {"fallback_used", ep.fallback_used},
            {"source", ep.source},
            {"prompt_hash", ep.prompt_hash},
            {"switch_step", ep.switch_step},
            {"episodic_return", ep.episodic_return},
            {"deliveries", ep.deliveries},
            {"seed", ep.seed},
            {"events", events}};
}

inline EpisodeResult episode_from_json(const nlohmann::json& j) {
    EpisodeResult ep;
    ep.method = j.at("method").get<std::string>();
    ep.layout = j.at("layout").get<std::string>();
    ep.true_type = teammate_type_from_string(j.at("true_type").get<std::string>());
    ep.predicted_type = teammate_type_from_string(j.at("predicted_type").get<std::string>());
    ep.confidence = j.at("confidence").get<double>();
    ep.fallback_used = j.at("fallback_used").get<bool>();
    ep.source = j.at("source").get<std::string>();
    ep.prompt_hash = j.at("prompt_hash").get<std::string>();
    ep.switch_step = j.at("switch_step").get<int>();
    ep.episodic_return = j.at("episodic_return").get<double>();
    ep.deliveries = j.at("deliveries").get<int>();
    ep.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("events"))
        ep.events.push_back({e.at("t").get<int>(), e.at("kind").get<std::string>(),
                             e.at("agent").get<int>()});
    return ep;
}

inline std::string format_mean_std(double mean, double stddev) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f±%.2f", mean, stddev);
    return buf;
}

// Aligned-text tables, one row per method, one column per layout.
inline std::string summary_table(const std::vector<MethodSummary>& summaries,
                                 const std::vector<std::string>& layouts, bool accuracy) {
    std::string out = accuracy ? "Classification accuracy (mean±std over seed groups)\n"
                               : "Episodic return (mean±std over seed groups)\n";
    size_t method_width = 8;
    std::vector<std::string> methods;
    for (const auto& s : summaries) {
        if (std::find(methods.begin(), methods.end(), s.method) == methods.end())
            methods.push_back(s.method);
        method_width = std::max(method_width, s.method.size());
    }
    auto pad = [](std::string s, size_t w) {
        while (s.size() < w) s += ' ';
        return s;
    };
    out += pad("method", method_width + 2);
    for (const auto& l : layouts) out += pad(l, std::max<size_t>(l.size() + 2, 18));
    out += "\n";
    for (const auto& m : methods) {
        out += pad(m, method_width + 2);
        for (const auto& l : layouts) {
            std::string cell = "-";
            for (const auto& s : summaries) {
                if (s.method == m && s.layout == l)
                    cell = accuracy ? format_mean_std(s.accuracy_mean, s.accuracy_std)
                                    : format_mean_std(s.return_mean, s.return_std);
            }
            out += pad(cell, std::max<size_t>(l.size() + 2, 18));
        }
        out += "\n";
    }
    return out;
}

inline std::string summary_csv(const std::vector<MethodSummary>& summaries) {
    std::string out =
        "method,layout,accuracy_mean,accuracy_std,return_mean,return_std,episodes\n";
    for (const auto& s : summaries) {
        out += s.method + "," + s.layout + "," + fixed3(s.accuracy_mean) + "," +
               fixed3(s.accuracy_std) + "," + fixed3(s.return_mean) + "," +
               fixed3(s.return_std) + "," + std::to_string(s.episodes) + "\n";
    }
    return out;
}

inline std::string pareto_csv(const std::vector<ParetoPoint>& points,
                              const std::vector<ParetoPoint>& frontier) {
    std::string out = "label,accuracy,return,on_frontier\n";
    for (const auto& p : points) {
        bool on = std::find(frontier.begin(), frontier.end(), p) != frontier.end();
        out += p.label + "," + fixed3(p.accuracy) + "," + fixed3(p.episodic_return) + "," +
               (on ? "1" : "0") + "\n";
    }
    return out;
}

}  // namespace collab
