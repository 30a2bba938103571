// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit code is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "collab/config.hpp"
#include "collab/harness.hpp"

using namespace collab;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void criterion(int number, const std::string& name, const std::function<bool(std::string&)>& fn) {
    auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
        ok = fn(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %2d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", number, name.c_str(),
                secs, detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::vector<Layout> shipped_layouts() {
    std::vector<Layout> out;
    for (const char* name : {"cramped_room", "asymmetric_advantage", "coordination_ring"})
        out.push_back(load_layout_file(std::string(COLLAB_SOURCE_DIR) + "/data/layouts/" + name +
                                       ".txt"));
    return out;
}

LlmClient& mock_llm() {
    static LlmClient client = [] {
        LlmConfig cfg;
        cfg.mode = LlmMode::Mock;
        return LlmClient(cfg);
    }();
    return client;
}

struct Pipeline {
    std::vector<LayoutArtifacts> artifacts;
    EvaluationOutput evaluation;
};

// Shared full pipeline at the spec defaults: database seeds 0..9, evaluation
// seeds 100+, P=20, 25 episodes per (method, layout) cell.
const Pipeline& default_pipeline() {
    static Pipeline p = [] {
        Pipeline out;
        EnvConfig cfg;
        auto layouts = shipped_layouts();
        TrajectoryDB db = collect_database(layouts, 10, 20, cfg, 0,
                                           EmbeddingMode::FeatureZScore, &mock_llm());
        AblationPipelineOptions opts;
        for (const auto& layout : layouts)
            out.artifacts.push_back(prepare_layout_artifacts(layout, db, cfg, opts, &mock_llm()));
        EvalOptions eval_opts;  // seed_base 100
        eval_opts.seed_groups = 10;  // 50 episodes per cell for stable means
        out.evaluation = evaluate(out.artifacts,
                                  {"random", "static", "oracle", "prototype", "logreg",
                                   "plastic", "collab", "recollab"},
                                  eval_opts, cfg);
        return out;
    }();
    return p;
}

double summary_value(const EvaluationOutput& ev, const std::string& method,
                     const std::string& layout, bool accuracy) {
    for (const auto& s : ev.summaries)
        if (s.method == method && s.layout == layout)
            return accuracy ? s.accuracy_mean : s.return_mean;
    throw Error("no summary for " + method + "/" + layout);
}

// Independent double-loop contingency-table oracle for criterion 3.
double mi_reference(const std::vector<double>& values, const std::vector<int>& labels,
                    int bins) {
    const size_t n = values.size();
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> cuts;
    for (int k = 1; k < bins; ++k)
        cuts.push_back(sorted[static_cast<size_t>(
            static_cast<long long>(k) * static_cast<long long>(n) / bins)]);
    std::vector<std::vector<double>> table(static_cast<size_t>(bins),
                                           std::vector<double>(kNumTypes, 0.0));
    for (size_t i = 0; i < n; ++i) {
        int b = 0;
        for (double cut : cuts)
            if (values[i] >= cut) ++b;
        table[static_cast<size_t>(b)][static_cast<size_t>(labels[i])] += 1.0;
    }
    double mi = 0.0;
    for (int b = 0; b < bins; ++b) {
        for (int t = 0; t < kNumTypes; ++t) {
            double joint = table[static_cast<size_t>(b)][static_cast<size_t>(t)];
            if (joint <= 0.0) continue;
            double pb = 0.0, pt = 0.0;
            for (int tt = 0; tt < kNumTypes; ++tt)
                pb += table[static_cast<size_t>(b)][static_cast<size_t>(tt)];
            for (int bb = 0; bb < bins; ++bb)
                pt += table[static_cast<size_t>(bb)][static_cast<size_t>(t)];
            mi += (joint / n) * std::log(joint * n / (pb * pt));
        }
    }
    return mi;
}

Fingerprint feature_fp(const std::string& feature, double value) {
    Fingerprint fp;
    fp.probe_length = 20;
    for (const auto& def : feature_catalog())
        fp.features.emplace_back(def.id, def.id == feature ? value : 0.0);
    return fp;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

int main() {
    criterion(1, "random baseline accuracy 0.20 +/- 0.03 over 1000 episodes", [](std::string& d) {
        EnvConfig cfg;
        Layout l = shipped_layouts()[0];
        LayoutArtifacts art;
        art.layout = l;
        EvalOptions opts;
        opts.seed_base = 100;
        opts.seed_groups = 40;
        opts.episodes_per_type_per_group = 5;  // 40 x 5 x 5 = 1000 episodes
        auto out = evaluate({art}, {"random"}, opts, cfg);
        double acc = out.summaries.front().accuracy_mean;
        d = "accuracy " + fixed3(acc);
        return out.episodes.size() == 1000 && std::abs(acc - 0.20) <= 0.03;
    });

    criterion(2, "oracle dominates every method and static on every layout", [](std::string& d) {
        const auto& p = default_pipeline();
        bool ok = true;
        for (const auto& layout : {"cramped_room", "asymmetric_advantage", "coordination_ring"}) {
            double oracle = summary_value(p.evaluation, "oracle", layout, false);
            double stat = summary_value(p.evaluation, "static", layout, false);
            for (const auto& method : {"random", "static", "prototype", "logreg", "plastic",
                                       "collab", "recollab"}) {
                double m = summary_value(p.evaluation, method, layout, false);
                if (m > oracle) {
                    ok = false;
                    d += std::string(layout) + ":" + method + "=" + fixed3(m) + ">oracle=" +
                         fixed3(oracle) + " ";
                }
            }
            if (stat > oracle) ok = false;
        }
        return ok;
    });

    criterion(3, "plug-in MI equals the double-loop oracle; log5 and permutation checks",
              [](std::string& d) {
                  std::mt19937_64 rng(2025);
                  for (int trial = 0; trial < 50; ++trial) {
                      int n = 40 + static_cast<int>(rng() % 120);
                      int bins = 2 + static_cast<int>(rng() % 10);
                      std::vector<double> values;
                      std::vector<int> labels;
                      LabeledFingerprints ds;
                      for (int i = 0; i < n; ++i) {
                          double v = (rng() % 2) ? u64_to_unit(rng()) * 5.0
                                                 : static_cast<double>(rng() % 5);
                          int label = static_cast<int>(rng() % kNumTypes);
                          values.push_back(v);
                          labels.push_back(label);
                          ds.emplace_back(feature_fp("dwell_near_pot", v),
                                          static_cast<TeammateType>(label));
                      }
                      double got = estimate_mi(ds, "dwell_near_pot", bins);
                      double want = mi_reference(values, labels, bins);
                      if (std::abs(got - want) > 1e-12) {
                          d = "trial " + std::to_string(trial) + " diff " +
                              std::to_string(std::abs(got - want));
                          return false;
                      }
                  }
                  LabeledFingerprints copy;
                  for (int i = 0; i < 50; ++i)
                      copy.emplace_back(feature_fp("cumulative_reward",
                                                   static_cast<double>(i % kNumTypes)),
                                        static_cast<TeammateType>(i % kNumTypes));
                  if (std::abs(estimate_mi(copy, "cumulative_reward", 8) - std::log(5.0)) > 1e-9) {
                      d = "label copy off log5";
                      return false;
                  }
                  LabeledFingerprints shuffled;
                  std::vector<int> labels;
                  for (int i = 0; i < 2000; ++i) labels.push_back(static_cast<int>(rng() % 5));
                  std::vector<double> values;
                  for (int label : labels) values.push_back(label * 3.0 + u64_to_unit(rng()));
                  std::shuffle(labels.begin(), labels.end(), rng);
                  for (size_t i = 0; i < labels.size(); ++i)
                      shuffled.emplace_back(feature_fp("dwell_near_pot", values[i]),
                                            static_cast<TeammateType>(labels[i]));
                  double mi = estimate_mi(shuffled, "dwell_near_pot", 8);
                  d = "permuted MI " + fixed3(mi);
                  return mi < 0.1;
              });

    criterion(4, "top-k equals brute force on 200 random instances; self-query rank 1",
              [](std::string& d) {
                  std::mt19937_64 rng(99);
                  for (int trial = 0; trial < 200; ++trial) {
                      size_t count = 1 + rng() % 50;
                      size_t dim = 2 + rng() % 16;
                      TrajectoryDB db;
                      db.metadata.dimension = dim;
                      for (size_t i = 0; i < dim; ++i) {
                          db.metadata.feature_names.push_back(feature_catalog()[i].id);
                          db.metadata.global_means.push_back(0.0);
                          db.metadata.global_stds.push_back(1.0);
                      }
                      for (size_t i = 0; i < count; ++i) {
                          TrajectoryRecord r;
                          r.id = "r" + std::to_string(i);
                          r.layout = "x";
                          r.true_type = static_cast<TeammateType>(rng() % kNumTypes);
                          r.probe_length = 20;
                          std::vector<double> v;
                          for (size_t k = 0; k < dim; ++k)
                              v.push_back(u64_to_unit(rng()) * 2.0 - 1.0);
                          r.embedding = l2_normalize(std::move(v));
                          r.seed = i;
                          insert_record(db, std::move(r));
                      }
                      std::vector<double> q;
                      for (size_t k = 0; k < dim; ++k) q.push_back(u64_to_unit(rng()) * 2.0 - 1.0);
                      q = l2_normalize(std::move(q));
                      int k = 1 + static_cast<int>(rng() % 15);

                      auto hits = topk(db, q, k);
                      std::vector<std::pair<double, size_t>> scored;
                      for (size_t i = 0; i < db.records.size(); ++i)
                          scored.emplace_back(cosine(q, db.records[i].embedding), i);
                      std::stable_sort(scored.begin(), scored.end(), [](const auto& a,
                                                                        const auto& b) {
                          return a.first > b.first;
                      });
                      if (hits.size() != std::min(static_cast<size_t>(k), count)) return false;
                      for (size_t i = 0; i < hits.size(); ++i) {
                          if (hits[i].record.id != db.records[scored[i].second].id ||
                              hits[i].score != scored[i].first) {
                              d = "mismatch in trial " + std::to_string(trial);
                              return false;
                          }
                      }
                      for (const auto& r : db.records) {
                          auto self = topk(db, r.embedding, 1);
                          if (self.front().record.id != r.id ||
                              std::abs(self.front().score - 1.0) > 1e-6) {
                              d = "self-query failed for " + r.id;
                              return false;
                          }
                      }
                  }
                  // and on a real collected database
                  EnvConfig cfg;
                  auto layouts = shipped_layouts();
                  TrajectoryDB db = collect_database(layouts, 10, 20, cfg, 0,
                                                     EmbeddingMode::FeatureZScore);
                  for (const auto& r : db.records) {
                      auto self = topk(db, r.embedding, 1);
                      // records with byte-identical embeddings are
                      // indistinguishable to cosine retrieval; the earliest
                      // duplicate wins the tie
                      bool same = self.front().record.id == r.id ||
                                  self.front().record.embedding == r.embedding;
                      if (!same || std::abs(self.front().score - 1.0) > 1e-6) {
                          d = "collected self-query failed for " + r.id;
                          return false;
                      }
                  }
                  return true;
              });

    criterion(5, "belief sequences match the log-domain oracle; normalization holds",
              [](std::string& d) {
                  std::mt19937_64 rng(7);
                  PlasticLikelihoods like{};
                  for (int t = 0; t < kNumTypes; ++t)
                      for (int s = 0; s < kNumAbstractStates; ++s) {
                          double total = 0.0;
                          std::array<double, kNumActions> row{};
                          for (int a = 0; a < kNumActions; ++a) {
                              row[static_cast<size_t>(a)] = u64_to_unit(rng());
                              total += row[static_cast<size_t>(a)];
                          }
                          for (int a = 0; a < kNumActions; ++a)
                              like.table[static_cast<size_t>(t)][static_cast<size_t>(s)]
                                        [static_cast<size_t>(a)] =
                                  row[static_cast<size_t>(a)] / total;
                      }
                  for (int trial = 0; trial < 30; ++trial) {
                      Belief b = Belief::uniform();
                      std::array<double, kNumTypes> logp{};
                      for (auto& lp : logp) lp = std::log(1.0 / kNumTypes);
                      for (int step = 0; step < 20; ++step) {
                          AbstractState abs_state{
                              static_cast<StationKind>(rng() % kNumStations),
                              static_cast<HeldItem>(rng() % kNumHeldItems)};
                          auto action = static_cast<Action>(rng() % kNumActions);
                          b = plastic_update(b, abs_state, action, like);
                          for (int t = 0; t < kNumTypes; ++t)
                              logp[static_cast<size_t>(t)] += std::log(
                                  like.prob(static_cast<TeammateType>(t),
                                            abstract_index(abs_state), action) +
                                  kPlasticEpsilon);
                      }
                      double mx = *std::max_element(logp.begin(), logp.end());
                      double denom = 0.0;
                      for (double lp : logp) denom += std::exp(lp - mx);
                      for (int t = 0; t < kNumTypes; ++t) {
                          double want = std::exp(logp[static_cast<size_t>(t)] - mx) / denom;
                          if (std::abs(b.probs[static_cast<size_t>(t)] - want) > 1e-9) {
                              d = "trial " + std::to_string(trial);
                              return false;
                          }
                      }
                  }
                  Belief b = Belief::uniform();
                  for (int i = 0; i < 100000; ++i) {
                      AbstractState abs_state{static_cast<StationKind>(rng() % kNumStations),
                                              static_cast<HeldItem>(rng() % kNumHeldItems)};
                      b = plastic_update(b, abs_state, static_cast<Action>(rng() % kNumActions),
                                         like);
                      double sum = 0.0;
                      for (double p : b.probs) {
                          if (p < 0.0) return false;
                          sum += p;
                      }
                      if (std::abs(sum - 1.0) > 1e-9) {
                          d = "normalization drift at update " + std::to_string(i);
                          return false;
                      }
                  }
                  return true;
              });

    criterion(6, "logistic regression gradient, separability and monotone loss",
              [](std::string& d) {
                  std::mt19937_64 rng(15);
                  LabeledFingerprints train;
                  for (int t = 0; t < kNumTypes; ++t)
                      for (int i = 0; i < 20; ++i) {
                          Fingerprint fp = feature_fp("dwell_near_pot",
                                                      t * 4.0 + u64_to_unit(rng()) * 0.5);
                          fp.features[static_cast<size_t>(catalog_index("blocked_count"))]
                              .second = (kNumTypes - t) * 4.0 + u64_to_unit(rng()) * 0.5;
                          train.emplace_back(std::move(fp), static_cast<TeammateType>(t));
                      }
                  std::vector<std::string> features{"dwell_near_pot", "blocked_count"};
                  LogRegModel model = fit_logreg(train, features);
                  int correct = 0;
                  for (const auto& [fp, type] : train)
                      if (predict_logreg(model, fp).predicted == type) ++correct;
                  double acc = static_cast<double>(correct) / static_cast<double>(train.size());
                  if (acc < 0.99) {
                      d = "training accuracy " + fixed3(acc);
                      return false;
                  }
                  for (size_t i = 1; i < model.loss_history.size(); ++i)
                      if (model.loss_history[i] > model.loss_history[i - 1]) {
                          d = "loss increased at epoch " + std::to_string(i);
                          return false;
                      }

                  LogRegProblem prob;
                  prob.l2 = 1e-4;
                  for (const auto& [fp, type] : train) {
                      std::vector<double> row;
                      for (size_t j = 0; j < model.feature_order.size(); ++j)
                          row.push_back((fp.value_of(model.feature_order[j]) - model.means[j]) /
                                        model.stds[j]);
                      row.push_back(1.0);
                      prob.x.push_back(std::move(row));
                      prob.y.push_back(static_cast<int>(type));
                  }
                  for (int point = 0; point < 10; ++point) {
                      std::vector<std::vector<double>> w(
                          kNumTypes, std::vector<double>(prob.x.front().size(), 0.0));
                      for (auto& row : w)
                          for (double& x : row) x = (u64_to_unit(rng()) - 0.5) * 2.0;
                      auto grad = logreg_gradient(prob, w);
                      const double h = 1e-6;
                      for (int t = 0; t < kNumTypes; ++t)
                          for (size_t j = 0; j < w.front().size(); ++j) {
                              auto wp = w, wm = w;
                              wp[static_cast<size_t>(t)][j] += h;
                              wm[static_cast<size_t>(t)][j] -= h;
                              double fd =
                                  (logreg_loss(prob, wp) - logreg_loss(prob, wm)) / (2.0 * h);
                              double g = grad[static_cast<size_t>(t)][j];
                              double scale = std::max({std::abs(fd), std::abs(g), 1e-8});
                              if (std::abs(fd - g) / scale > 1e-5) {
                                  d = "gradient mismatch at point " + std::to_string(point);
                                  return false;
                              }
                          }
                  }
                  return true;
              });

    criterion(7, "pareto frontier equals the pairwise oracle and is idempotent",
              [](std::string& d) {
                  std::mt19937_64 rng(31);
                  for (int trial = 0; trial < 100; ++trial) {
                      std::vector<ParetoPoint> pts;
                      for (int i = 0; i < 100; ++i)
                          pts.push_back({std::round(u64_to_unit(rng()) * 20.0) / 20.0,
                                         std::round(u64_to_unit(rng()) * 15.0) * 20.0,
                                         "p" + std::to_string(i)});
                      auto frontier = pareto_frontier(pts);
                      std::vector<ParetoPoint> expected;
                      for (const auto& p : pts) {
                          bool dominated = false;
                          for (const auto& q : pts) {
                              bool geq = q.accuracy >= p.accuracy &&
                                         q.episodic_return >= p.episodic_return;
                              bool gt = q.accuracy > p.accuracy ||
                                        q.episodic_return > p.episodic_return;
                              if (geq && gt) dominated = true;
                          }
                          if (!dominated) expected.push_back(p);
                      }
                      if (!(frontier == expected) ||
                          !(pareto_frontier(frontier) == frontier)) {
                          d = "trial " + std::to_string(trial);
                          return false;
                      }
                  }
                  return true;
              });

    criterion(8, "mock retrieval grounding holds up: recollab >= collab - 0.05, both beat random",
              [](std::string& d) {
                  const auto& p = default_pipeline();
                  bool ok = true;
                  for (const auto& layout :
                       {"cramped_room", "asymmetric_advantage", "coordination_ring"}) {
                      double collab_acc = summary_value(p.evaluation, "collab", layout, true);
                      double recollab_acc = summary_value(p.evaluation, "recollab", layout, true);
                      double random_acc = summary_value(p.evaluation, "random", layout, true);
                      d += std::string(layout) + " c=" + fixed3(collab_acc) +
                           " r=" + fixed3(recollab_acc) + " rnd=" + fixed3(random_acc) + " ";
                      if (recollab_acc < collab_acc - 0.05) ok = false;
                      if (!(collab_acc > random_acc) || !(recollab_acc > random_acc)) ok = false;
                  }
                  return ok;
              });

    criterion(9, "prototype accuracy at P=40 is no worse than at P=5", [](std::string& d) {
        EnvConfig cfg;
        EvalOptions opts;  // 25 episodes per cell
        AblationPipelineOptions pipe;
        bool ok = true;
        for (const auto& layout : shipped_layouts()) {
            auto rows = ablate_probe(layout, "prototype", {5, 40}, cfg, opts, pipe, &mock_llm());
            double at5 = rows[0].summary.accuracy_mean;
            double at40 = rows[1].summary.accuracy_mean;
            d += layout.name + " P5=" + fixed3(at5) + " P40=" + fixed3(at40) + " ";
            if (at40 < at5) ok = false;
        }
        return ok;
    });

    criterion(10, "the mock pipeline is byte-identical across two runs", [](std::string& d) {
        auto run_once = [](const fs::path& root) {
            fs::create_directories(root);
            EnvConfig cfg;
            auto layouts = shipped_layouts();
            TrajectoryDB db = collect_database(layouts, 10, 20, cfg, 0,
                                               EmbeddingMode::FeatureZScore);
            save_db(db, (root / "db.jsonl").string(), (root / "db.meta.json").string());

            nlohmann::json rubrics = nlohmann::json::object();
            AblationPipelineOptions opts;
            std::vector<LayoutArtifacts> artifacts;
            for (const auto& layout : layouts) {
                auto art = prepare_layout_artifacts(layout, db, cfg, opts, &mock_llm());
                rubrics[layout.name] = rubric_to_json(art.rubric);
                artifacts.push_back(std::move(art));
            }
            std::ofstream(root / "rubric.json") << rubrics.dump(2) << "\n";

            EvalOptions eval_opts;
            auto out = evaluate(artifacts, {"random", "prototype", "collab", "recollab"},
                                eval_opts, cfg);
            std::ofstream episodes(root / "episodes.jsonl");
            for (const auto& ep : out.episodes) episodes << episode_to_json(ep).dump() << "\n";
            std::ofstream(root / "summary.csv") << summary_csv(out.summaries);
        };
        fs::path a = fs::temp_directory_path() / "collab_acc_det_a";
        fs::path b = fs::temp_directory_path() / "collab_acc_det_b";
        fs::remove_all(a);
        fs::remove_all(b);
        run_once(a);
        run_once(b);
        bool ok = true;
        for (const char* f : {"db.jsonl", "db.meta.json", "rubric.json", "episodes.jsonl",
                              "summary.csv"}) {
            if (slurp(a / f) != slurp(b / f)) {
                ok = false;
                d += std::string(f) + " differs ";
            }
        }
        fs::remove_all(a);
        fs::remove_all(b);
        return ok;
    });

    criterion(11, "return equals 20 x deliveries on 1000 random-action episodes",
              [](std::string& d) {
                  EnvConfig cfg;
                  auto layouts = shipped_layouts();
                  std::mt19937_64 rng(1);
                  for (int episode = 0; episode < 1000; ++episode) {
                      const Layout& l = layouts[static_cast<size_t>(episode) % layouts.size()];
                      GridState s = reset(l, cfg, static_cast<std::uint64_t>(episode));
                      double total = 0.0;
                      int deliveries = 0;
                      while (s.t < cfg.horizon) {
                          StepResult r = step(s, static_cast<Action>(rng() % 6),
                                              static_cast<Action>(rng() % 6), cfg);
                          total += r.reward;
                          for (const auto& ev : r.events)
                              if (ev.delivered) ++deliveries;
                          s = r.state;
                          for (const auto& [cell, pot] : s.pots) {
                              if (pot.onion_count < 0 || pot.onion_count > 3 ||
                                  pot.cook_timer < 0 || (pot.ready && pot.cook_timer != 0) ||
                                  (pot.cook_timer > 0 && pot.onion_count != 3)) {
                                  d = "pot invariant violated";
                                  return false;
                              }
                          }
                          if (s.agents[0].pos == s.agents[1].pos ||
                              !s.layout->is_floor(s.agents[0].pos) ||
                              !s.layout->is_floor(s.agents[1].pos)) {
                              d = "occupancy invariant violated";
                              return false;
                          }
                      }
                      if (total != cfg.reward_per_delivery * deliveries) {
                          d = "conservation violated on episode " + std::to_string(episode);
                          return false;
                      }
                  }
                  return true;
              });

    std::printf("%d of 11 criteria failed\n", failures);
    return failures;
}
