#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "collab/fingerprint.hpp"
#include "collab/llm_client.hpp"
#include "collab/retrieval.hpp"
#include "collab/rollout.hpp"
#include "collab/rubric.hpp"

namespace collab {

inline constexpr const char* kPromptVersion = "prompt-v1";
inline constexpr double kSigmaFloor = 1e-3;

struct ClassificationResult {
    TeammateType predicted = TeammateType::Default;
    double confidence = 0.0;  // in [0, 1]
    std::string rationale;
    std::string source;
    bool fallback_used = false;
    std::string prompt_hash;  // audit trail; empty for non-prompt classifiers
};

// --- Prototype distance classifier (offline stand-in and fallback) ----------

inline std::array<double, kNumTypes> prototype_distances(const Fingerprint& fp,
                                                         const Rubric& rubric) {
    std::array<double, kNumTypes> dist{};
    const double r = static_cast<double>(rubric.selected_features.size());
    for (int t = 0; t < kNumTypes; ++t) {
        double sum = 0.0;
        for (const auto& entry : rubric.prototypes[static_cast<size_t>(t)]) {
            double sigma = std::max(entry.stddev, kSigmaFloor);
            sum += std::abs(fp.value_of(entry.feature) - entry.mean) / sigma;
        }
        dist[static_cast<size_t>(t)] = sum / r;
    }
    return dist;
}

inline ClassificationResult classify_prototype(const Fingerprint& fp, const Rubric& rubric) {
    auto dist = prototype_distances(fp, rubric);
    int best = 0;
    for (int t = 1; t < kNumTypes; ++t)
        if (dist[static_cast<size_t>(t)] < dist[static_cast<size_t>(best)]) best = t;

    double denom = 0.0;
    for (double d : dist) denom += std::exp(-d);
    double confidence = std::exp(-dist[static_cast<size_t>(best)]) / denom;

    int runner = best == 0 ? 1 : 0;
    for (int t = 0; t < kNumTypes; ++t)
        if (t != best && dist[static_cast<size_t>(t)] < dist[static_cast<size_t>(runner)])
            runner = t;

    ClassificationResult res;
    res.predicted = static_cast<TeammateType>(best);
    res.confidence = confidence;
    res.source = "prototype";
    res.rationale = std::string("closest prototype ") + to_string(res.predicted) +
                    " (mean z-distance " + fixed3(dist[static_cast<size_t>(best)]) +
                    ", runner-up " + to_string(static_cast<TeammateType>(runner)) + " at " +
                    fixed3(dist[static_cast<size_t>(runner)]) + ")";
    return res;
}

// --- Prompt assembly and strict response parsing -----------------------------

inline std::string type_choices_line() {
    std::string out;
    for (int t = 0; t < kNumTypes; ++t) {
        if (t) out += "|";
        out += to_string(static_cast<TeammateType>(t));
    }
    return out;
}

inline std::string build_collab_prompt(const Fingerprint& fp, const Rubric& rubric) {
    std::string p;
    p += "You are analyzing the behavior of an unknown teammate in a two-agent\n";
    p += "cooperative cooking gridworld. Exactly one of five behavior types applies:\n";
    p += type_choices_line() + ".\n\n";
    p += "=== Behavior rubric (per-type feature means and standard deviations) ===\n";
    p += rubric_to_text(rubric);
    p += "\n=== Observed teammate behavior ===\n";
    p += describe(fp);
    p += "\nReply with exactly one JSON object and nothing else:\n";
    p += "{\"type\":\"<" + type_choices_line() +
         ">\",\"confidence\":<number 0..1>,\"rationale\":\"<one sentence>\"}\n";
    return p;
}

inline std::string build_recollab_prompt(const Fingerprint& fp, const Rubric& rubric,
                                         const std::vector<RetrievalHit>& hits) {
    std::string p;
    p += "You are analyzing the behavior of an unknown teammate in a two-agent\n";
    p += "cooperative cooking gridworld. Exactly one of five behavior types applies:\n";
    p += type_choices_line() + ".\n\n";
    p += "=== Behavior rubric (per-type feature means and standard deviations) ===\n";
    p += rubric_to_text(rubric);
    p += "\n=== Retrieved exemplars (labeled probes of known teammates) ===\n";
    for (size_t i = 0; i < hits.size(); ++i) {
        p += "Exemplar " + std::to_string(i + 1) + ": true type = " +
             to_string(hits[i].record.true_type) + ", similarity = " + fixed3(hits[i].score) +
             "\n";
        p += hits[i].record.description;
    }
    p += "\n=== Observed teammate behavior ===\n";
    p += describe(fp);
    p += "\nReply with exactly one JSON object and nothing else:\n";
    p += "{\"type\":\"<" + type_choices_line() +
         ">\",\"confidence\":<number 0..1>,\"rationale\":\"<one sentence>\"}\n";
    return p;
}

struct ParsedResponse {
    TeammateType type;
    double confidence;
    std::string rationale;
};

// Strict parse: the whole trimmed response must be one JSON object carrying
// the three required fields with the canonical type string.
inline std::optional<ParsedResponse> parse_llm_response(const std::string& text) {
    size_t begin = text.find_first_not_of(" \t\r\n");
    size_t end = text.find_last_not_of(" \t\r\n");
    if (begin == std::string::npos) return std::nullopt;
    auto j = nlohmann::json::parse(text.substr(begin, end - begin + 1), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    if (!j.contains("type") || !j["type"].is_string()) return std::nullopt;
    if (!j.contains("confidence") || !j["confidence"].is_number()) return std::nullopt;
    if (!j.contains("rationale") || !j["rationale"].is_string()) return std::nullopt;
    std::string type_str = j["type"].get<std::string>();
    double conf = j["confidence"].get<double>();
    if (conf < 0.0 || conf > 1.0) return std::nullopt;
    for (int t = 0; t < kNumTypes; ++t) {
        if (type_str == to_string(static_cast<TeammateType>(t)))
            return ParsedResponse{static_cast<TeammateType>(t), conf,
                                  j["rationale"].get<std::string>()};
    }
    return std::nullopt;
}

inline std::string render_result_json(const ClassificationResult& r) {
    nlohmann::json j = {{"type", to_string(r.predicted)},
                        {"confidence", r.confidence},
                        {"rationale", r.rationale}};
    return j.dump();
}

namespace detail {

inline ClassificationResult classify_via_prompt(const Fingerprint& fp, const Rubric& rubric,
                                                LlmClient& llm, const std::string& prompt,
                                                const std::string& source,
                                                const MockResponder& mock_responder) {
    ClassificationResult out;
    out.source = source;
    out.prompt_hash = hex64(fnv1a64(prompt));

    std::optional<ParsedResponse> parsed;
    std::string failure;
    try {
        parsed = parse_llm_response(llm.chat(prompt, mock_responder));
        if (!parsed) failure = "unparseable response";
    } catch (const Error& e) {
        failure = e.what();
    }

    if (parsed) {
        out.predicted = parsed->type;
        out.confidence = parsed->confidence;
        out.rationale = parsed->rationale;
        return out;
    }
    auto fb = classify_prototype(fp, rubric);
    out.predicted = fb.predicted;
    out.confidence = fb.confidence;
    out.rationale = "fallback (" + failure + "): " + fb.rationale;
    out.fallback_used = true;
    return out;
}

}  // namespace detail

// Rubric-prompt classifier. In mock mode the transport-level responder answers
// with the prototype classification rendered as the expected JSON.
inline ClassificationResult classify_collab(const Fingerprint& fp, const Rubric& rubric,
                                            LlmClient& llm) {
    auto prompt = build_collab_prompt(fp, rubric);
    MockResponder mock = [&fp, &rubric](const std::string&) {
        return render_result_json(classify_prototype(fp, rubric));
    };
    return detail::classify_via_prompt(fp, rubric, llm, prompt, "collab", mock);
}

// Retrieval-augmented variant. In mock mode the responder answers with the
// similarity-weighted majority label of the retrieved exemplars, breaking
// ties by prototype distance then type index.
inline ClassificationResult classify_recollab(const Fingerprint& fp, const Rubric& rubric,
                                              const TrajectoryDB& db, int k, LlmClient& llm) {
    if (db.empty()) throw EmptyDatabase("classify_recollab: empty trajectory database");
    auto query = embed(describe(fp), fp, db.metadata.mode, db.metadata, &llm);
    auto hits = topk(db, query, k);
    auto prompt = build_recollab_prompt(fp, rubric, hits);

    MockResponder mock = [&fp, &rubric, &hits](const std::string&) {
        std::array<double, kNumTypes> votes{};
        double total = 0.0;
        for (const auto& hit : hits) {
            double w = std::max(hit.score, 0.0);
            votes[static_cast<size_t>(hit.record.true_type)] += w;
            total += w;
        }
        double best_vote = *std::max_element(votes.begin(), votes.end());
        std::vector<int> tied;
        for (int t = 0; t < kNumTypes; ++t)
            if (votes[static_cast<size_t>(t)] == best_vote) tied.push_back(t);

        ClassificationResult res;
        if (total > 0.0 && tied.size() == 1) {
            res.predicted = static_cast<TeammateType>(tied.front());
            res.confidence = std::clamp(best_vote / total, 0.0, 1.0);
            int count = 0;
            for (const auto& hit : hits)
                if (hit.record.true_type == res.predicted) ++count;
            res.rationale = std::to_string(count) + " of " + std::to_string(hits.size()) +
                            " retrieved exemplars are " + to_string(res.predicted);
        } else {
            auto dist = prototype_distances(fp, rubric);
            int best = tied.empty() ? 0 : tied.front();
            for (int t : tied)
                if (dist[static_cast<size_t>(t)] < dist[static_cast<size_t>(best)]) best = t;
            res.predicted = static_cast<TeammateType>(best);
            res.confidence = total > 0.0 ? std::clamp(best_vote / total, 0.0, 1.0) : 0.2;
            res.rationale = std::string("retrieval tie resolved by prototype distance to ") +
                            to_string(res.predicted);
        }
        return render_result_json(res);
    };
    return detail::classify_via_prompt(fp, rubric, llm, prompt, "recollab", mock);
}

// --- Multinomial logistic regression -----------------------------------------

struct LogRegOptions {
    int epochs = 500;
    double lr = 0.1;
    double l2 = 1e-4;
};

struct LogRegModel {
    std::vector<std::string> feature_order;     // kept features, in rubric order
    std::vector<std::string> dropped_features;  // zero variance in training data
    std::vector<double> means;
    std::vector<double> stds;
    // kNumTypes rows of (kept + 1) weights, bias last.
    std::vector<std::vector<double>> weights;
    std::vector<double> loss_history;  // [0] = loss at init, then one per epoch
};

struct LogRegProblem {
    std::vector<std::vector<double>> x;  // n rows of (d + 1), bias last
    std::vector<int> y;
    double l2 = 0.0;
};

inline std::vector<std::vector<double>> logreg_probs(const LogRegProblem& prob,
                                                     const std::vector<std::vector<double>>& w) {
    const size_t n = prob.x.size();
    std::vector<std::vector<double>> probs(n, std::vector<double>(kNumTypes, 0.0));
    for (size_t i = 0; i < n; ++i) {
        std::array<double, kNumTypes> logits{};
        for (int t = 0; t < kNumTypes; ++t) {
            double z = 0.0;
            for (size_t d = 0; d < prob.x[i].size(); ++d)
                z += w[static_cast<size_t>(t)][d] * prob.x[i][d];
            logits[static_cast<size_t>(t)] = z;
        }
        double mx = *std::max_element(logits.begin(), logits.end());
        double denom = 0.0;
        for (double z : logits) denom += std::exp(z - mx);
        for (int t = 0; t < kNumTypes; ++t)
            probs[i][static_cast<size_t>(t)] = std::exp(logits[static_cast<size_t>(t)] - mx) / denom;
    }
    return probs;
}

// Mean cross-entropy plus an L2 penalty on the non-bias weights.
inline double logreg_loss(const LogRegProblem& prob, const std::vector<std::vector<double>>& w) {
    auto probs = logreg_probs(prob, w);
    double loss = 0.0;
    for (size_t i = 0; i < prob.x.size(); ++i)
        loss -= std::log(std::max(probs[i][static_cast<size_t>(prob.y[i])], 1e-300));
    loss /= static_cast<double>(prob.x.size());
    double reg = 0.0;
    for (const auto& row : w)
        for (size_t d = 0; d + 1 < row.size(); ++d) reg += row[d] * row[d];
    return loss + 0.5 * prob.l2 * reg;
}

inline std::vector<std::vector<double>> logreg_gradient(
    const LogRegProblem& prob, const std::vector<std::vector<double>>& w) {
    const size_t n = prob.x.size();
    const size_t cols = prob.x.front().size();
    auto probs = logreg_probs(prob, w);
    std::vector<std::vector<double>> grad(kNumTypes, std::vector<double>(cols, 0.0));
    for (size_t i = 0; i < n; ++i) {
        for (int t = 0; t < kNumTypes; ++t) {
            double delta = probs[i][static_cast<size_t>(t)] -
                           (prob.y[i] == t ? 1.0 : 0.0);
            for (size_t d = 0; d < cols; ++d)
                grad[static_cast<size_t>(t)][d] += delta * prob.x[i][d];
        }
    }
    for (auto& row : grad)
        for (double& g : row) g /= static_cast<double>(n);
    for (int t = 0; t < kNumTypes; ++t)
        for (size_t d = 0; d + 1 < cols; ++d)
            grad[static_cast<size_t>(t)][d] += prob.l2 * w[static_cast<size_t>(t)][d];
    return grad;
}

// Deterministic full-batch gradient descent from zero init. Steps that would
// increase the loss are halved until they do not, which keeps the per-epoch
// loss sequence non-increasing at any nominal learning rate.
inline LogRegModel fit_logreg(const LabeledFingerprints& train,
                              const std::vector<std::string>& selected,
                              const LogRegOptions& opts = {}) {
    if (train.empty()) throw Error("fit_logreg: empty training set");
    std::array<int, kNumTypes> per_type{};
    for (const auto& [fp, type] : train) ++per_type[static_cast<size_t>(type)];
    for (int t = 0; t < kNumTypes; ++t)
        if (per_type[static_cast<size_t>(t)] == 0)
            throw Error(std::string("fit_logreg: no samples for type ") +
                        to_string(static_cast<TeammateType>(t)));

    LogRegModel model;
    for (const auto& feature : selected) {
        double mean = 0.0;
        for (const auto& [fp, type] : train) mean += fp.value_of(feature);
        mean /= static_cast<double>(train.size());
        double var = 0.0;
        for (const auto& [fp, type] : train) {
            double d = fp.value_of(feature) - mean;
            var += d * d;
        }
        var /= static_cast<double>(train.size());
        if (var <= 0.0) {
            model.dropped_features.push_back(feature);
        } else {
            model.feature_order.push_back(feature);
            model.means.push_back(mean);
            model.stds.push_back(std::sqrt(var));
        }
    }
    if (model.feature_order.empty())
        throw DegenerateData("fit_logreg: every selected feature has zero variance");

    const size_t d = model.feature_order.size();
    LogRegProblem prob;
    prob.l2 = opts.l2;
    for (const auto& [fp, type] : train) {
        std::vector<double> row(d + 1, 1.0);  // bias last
        for (size_t j = 0; j < d; ++j)
            row[j] = (fp.value_of(model.feature_order[j]) - model.means[j]) / model.stds[j];
        prob.x.push_back(std::move(row));
        prob.y.push_back(static_cast<int>(type));
    }

    model.weights.assign(kNumTypes, std::vector<double>(d + 1, 0.0));
    double loss = logreg_loss(prob, model.weights);
    model.loss_history.push_back(loss);
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        auto grad = logreg_gradient(prob, model.weights);
        double step = opts.lr;
        auto candidate = model.weights;
        double new_loss = loss;
        for (int tries = 0; tries < 30; ++tries) {
            for (int t = 0; t < kNumTypes; ++t)
                for (size_t j = 0; j <= d; ++j)
                    candidate[static_cast<size_t>(t)][j] =
                        model.weights[static_cast<size_t>(t)][j] -
                        step * grad[static_cast<size_t>(t)][j];
            new_loss = logreg_loss(prob, candidate);
            if (new_loss <= loss) break;
            step *= 0.5;
        }
        if (new_loss > loss) break;  // converged to numerical precision
        model.weights = candidate;
        loss = new_loss;
        model.loss_history.push_back(loss);
    }
    return model;
}

inline ClassificationResult predict_logreg(const LogRegModel& model, const Fingerprint& fp) {
    if (model.weights.empty()) throw Error("predict_logreg: model not trained");
    const size_t d = model.feature_order.size();
    std::vector<double> row(d + 1, 1.0);
    for (size_t j = 0; j < d; ++j)
        row[j] = (fp.value_of(model.feature_order[j]) - model.means[j]) / model.stds[j];

    std::array<double, kNumTypes> logits{};
    for (int t = 0; t < kNumTypes; ++t) {
        double z = 0.0;
        for (size_t j = 0; j <= d; ++j) z += model.weights[static_cast<size_t>(t)][j] * row[j];
        logits[static_cast<size_t>(t)] = z;
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z - mx);

    ClassificationResult res;
    res.source = "logreg";
    int best = 0;
    double best_p = -1.0;
    for (int t = 0; t < kNumTypes; ++t) {
        double p = std::exp(logits[static_cast<size_t>(t)] - mx) / denom;
        if (p > best_p) {
            best_p = p;
            best = t;
        }
    }
    res.predicted = static_cast<TeammateType>(best);
    res.confidence = best_p;
    res.rationale = "softmax probability " + fixed3(best_p);
    return res;
}

// --- PLASTIC-style Bayesian belief over types --------------------------------

inline constexpr double kPlasticEpsilon = 1e-3;
inline constexpr int kNumAbstractStates = kNumStations * kNumHeldItems;

struct Belief {
    std::array<double, kNumTypes> probs{};
    static Belief uniform() {
        Belief b;
        b.probs.fill(1.0 / kNumTypes);
        return b;
    }
};

struct AbstractState {
    StationKind nearest = StationKind::OnionPile;
    HeldItem held = HeldItem::Nothing;
};

inline int abstract_index(const AbstractState& s) {
    return static_cast<int>(s.nearest) * kNumHeldItems + static_cast<int>(s.held);
}

inline AbstractState abstract_state(const GridState& state, int agent) {
    return {nearest_station_kind(state, agent),
            state.agents[static_cast<size_t>(agent)].held};
}

// Empirical action frequencies per (type, abstract state).
struct PlasticLikelihoods {
    std::array<std::array<std::array<double, kNumActions>, kNumAbstractStates>, kNumTypes> table{};

    double prob(TeammateType type, int abstract, Action action) const {
        return table[static_cast<size_t>(type)][static_cast<size_t>(abstract)]
                    [static_cast<size_t>(action)];
    }
};

// The database stores (layout, type, seed, P) per record; probes are
// deterministic, so the underlying histories are recovered by replay.
inline PlasticLikelihoods fit_plastic_likelihoods(const TrajectoryDB& db,
                                                  const std::vector<Layout>& layouts,
                                                  const EnvConfig& cfg) {
    std::array<std::array<std::array<double, kNumActions>, kNumAbstractStates>, kNumTypes>
        counts{};
    for (const auto& record : db.records) {
        const Layout* layout = nullptr;
        for (const auto& l : layouts)
            if (l.name == record.layout) layout = &l;
        if (layout == nullptr)
            throw Error("fit_plastic_likelihoods: unknown layout " + record.layout);
        auto probe = run_probe(*layout, record.true_type, record.probe_length, cfg, record.seed);
        for (const auto& step : probe.history.steps) {
            int abs_idx = abstract_index(abstract_state(step.obs.state, kTeammateAgent));
            counts[static_cast<size_t>(record.true_type)][static_cast<size_t>(abs_idx)]
                  [static_cast<size_t>(step.teammate_action)] += 1.0;
        }
    }
    PlasticLikelihoods out;
    for (int t = 0; t < kNumTypes; ++t) {
        for (int s = 0; s < kNumAbstractStates; ++s) {
            double total = 0.0;
            for (int a = 0; a < kNumActions; ++a)
                total += counts[static_cast<size_t>(t)][static_cast<size_t>(s)]
                               [static_cast<size_t>(a)];
            if (total <= 0.0) continue;
            for (int a = 0; a < kNumActions; ++a)
                out.table[static_cast<size_t>(t)][static_cast<size_t>(s)]
                         [static_cast<size_t>(a)] =
                    counts[static_cast<size_t>(t)][static_cast<size_t>(s)]
                          [static_cast<size_t>(a)] /
                    total;
        }
    }
    return out;
}

inline Belief plastic_update(const Belief& belief, const AbstractState& obs_abstract,
                             Action teammate_action, const PlasticLikelihoods& likelihoods,
                             double epsilon = kPlasticEpsilon) {
    double sum = 0.0;
    for (double p : belief.probs) {
        if (p < 0.0 || !std::isfinite(p)) throw InvalidBelief("negative or non-finite belief");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw InvalidBelief("belief does not sum to 1");

    Belief out;
    int abs_idx = abstract_index(obs_abstract);
    double total = 0.0;
    for (int t = 0; t < kNumTypes; ++t) {
        double like = likelihoods.prob(static_cast<TeammateType>(t), abs_idx, teammate_action);
        out.probs[static_cast<size_t>(t)] = belief.probs[static_cast<size_t>(t)] * (like + epsilon);
        total += out.probs[static_cast<size_t>(t)];
    }
    for (double& p : out.probs) p /= total;
    return out;
}

// --- Trivial baselines --------------------------------------------------------

inline ClassificationResult classify_random(std::mt19937_64& rng) {
    ClassificationResult res;
    res.predicted = static_cast<TeammateType>(
        static_cast<int>(u64_to_unit(rng()) * kNumTypes));
    res.confidence = 1.0 / kNumTypes;
    res.source = "random";
    res.rationale = "uniform draw over types";
    return res;
}

inline ClassificationResult classify_oracle(TeammateType true_type) {
    ClassificationResult res;
    res.predicted = true_type;
    res.confidence = 1.0;
    res.source = "oracle";
    res.rationale = "ground-truth type";
    return res;
}

}  // namespace collab
