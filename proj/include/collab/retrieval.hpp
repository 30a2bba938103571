#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "collab/fingerprint.hpp"
#include "collab/llm_client.hpp"
#include "collab/rollout.hpp"
#include "collab/rubric.hpp"

namespace collab {

enum class EmbeddingMode { FeatureZScore, ExternalService };

inline const char* to_string(EmbeddingMode m) {
    return m == EmbeddingMode::FeatureZScore ? "feature_zscore" : "external_service";
}

inline EmbeddingMode embedding_mode_from_string(const std::string& s) {
    if (s == "feature_zscore") return EmbeddingMode::FeatureZScore;
    if (s == "external_service") return EmbeddingMode::ExternalService;
    throw Error("unknown embedding mode: " + s);
}

struct TrajectoryRecord {
    std::string id;
    std::string layout;
    TeammateType true_type = TeammateType::Default;
    int probe_length = 0;
    Fingerprint fingerprint;
    std::string description;
    std::vector<double> embedding;  // unit norm
    std::uint64_t seed = 0;
};

struct DbMetadata {
    std::string schema_version = "1";
    EmbeddingMode mode = EmbeddingMode::FeatureZScore;
    size_t dimension = 0;
    std::string rubric_version = "1";
    // Dataset-wide feature statistics, needed so queries embed in the same
    // z-score frame the database was built in.
    std::vector<std::string> feature_names;
    std::vector<double> global_means;
    std::vector<double> global_stds;
};

struct TrajectoryDB {
    DbMetadata metadata;
    std::vector<TrajectoryRecord> records;

    bool empty() const { return records.empty(); }
    size_t size() const { return records.size(); }
};

// Zero vectors normalize to e1 so the embedding map stays total.
inline std::vector<double> l2_normalize(std::vector<double> v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    double norm = std::sqrt(sq);
    if (norm <= 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        if (!v.empty()) v[0] = 1.0;
        return v;
    }
    for (double& x : v) x /= norm;
    return v;
}

inline std::vector<double> embed(const std::string& description, const Fingerprint& fp,
                                 EmbeddingMode mode, const DbMetadata& meta,
                                 LlmClient* llm = nullptr) {
    if (mode == EmbeddingMode::ExternalService && llm != nullptr &&
        llm->mode() == LlmMode::Live) {
        auto v = l2_normalize(llm->embed_remote(description));
        if (meta.dimension != 0 && v.size() != meta.dimension)
            throw DimensionMismatch("service embedding dimension " + std::to_string(v.size()) +
                                    " != database dimension " + std::to_string(meta.dimension));
        return v;
    }
    // FeatureZScore, and the mock-mode fallback for ExternalService.
    std::vector<double> v;
    v.reserve(meta.feature_names.size());
    for (size_t i = 0; i < meta.feature_names.size(); ++i) {
        double x = fp.value_of(meta.feature_names[i]);
        double sd = meta.global_stds[i];
        v.push_back(sd > 0.0 ? (x - meta.global_means[i]) / sd : 0.0);
    }
    return l2_normalize(v);
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size())
        throw DimensionMismatch("cosine: " + std::to_string(u.size()) + " vs " +
                                std::to_string(v.size()));
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu <= 0.0 || nv <= 0.0) throw ZeroVector("cosine of a zero vector");
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

struct RetrievalHit {
    TrajectoryRecord record;
    double score = 0.0;
};

// Exact scan: scores every record, sorts descending, ties keep insertion order.
inline std::vector<RetrievalHit> topk(const TrajectoryDB& db, const std::vector<double>& query,
                                      int k) {
    if (db.empty()) throw EmptyDatabase("topk on an empty database");
    if (k < 1) throw Error("topk: k must be >= 1");
    if (query.size() != db.metadata.dimension)
        throw DimensionMismatch("query dimension " + std::to_string(query.size()) +
                                " != database dimension " +
                                std::to_string(db.metadata.dimension));
    std::vector<std::pair<double, size_t>> scored;
    scored.reserve(db.size());
    for (size_t i = 0; i < db.records.size(); ++i)
        scored.emplace_back(cosine(query, db.records[i].embedding), i);
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<RetrievalHit> out;
    const size_t take = std::min(static_cast<size_t>(k), scored.size());
    out.reserve(take);
    for (size_t i = 0; i < take; ++i)
        out.push_back({db.records[scored[i].second], scored[i].first});
    return out;
}

inline void insert_record(TrajectoryDB& db, TrajectoryRecord record) {
    if (record.embedding.size() != db.metadata.dimension)
        throw DimensionMismatch("record embedding dimension " +
                                std::to_string(record.embedding.size()) +
                                " != database dimension " +
                                std::to_string(db.metadata.dimension));
    double sq = 0.0;
    for (double x : record.embedding) sq += x * x;
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-6)
        throw Error("record embedding is not unit norm: " + record.id);
    for (const auto& r : db.records)
        if (r.id == record.id) throw Error("duplicate record id: " + record.id);
    db.records.push_back(std::move(record));
}

// Build the offline probe database: for each (layout, type, seed) run the
// probe window with the controlled agent playing the best response to the
// default type, fingerprint it, describe it, embed it. Feature-space
// embeddings cover the top-r features by mutual information over the
// collected set itself, so retrieval distances live in the same frame the
// rubric is built in.
inline TrajectoryDB collect_database(const std::vector<Layout>& layouts, int episodes_per_type,
                                     int probe_length, const EnvConfig& cfg,
                                     std::uint64_t seed_base, EmbeddingMode mode,
                                     LlmClient* llm = nullptr, int bins = 8, int top_r = 12) {
    struct Pending {
        std::string id;
        std::string layout;
        TeammateType type;
        Fingerprint fp;
        std::string description;
        std::uint64_t seed;
    };
    std::vector<Pending> pending;
    for (const auto& layout : layouts) {
        for (TeammateType type : all_teammate_types()) {
            for (int ep = 0; ep < episodes_per_type; ++ep) {
                std::uint64_t seed = seed_base + static_cast<std::uint64_t>(ep);
                auto probe = run_probe(layout, type, probe_length, cfg, seed);
                Fingerprint fp = extract_features(probe.history);
                std::string description = describe(fp);
                std::string id = layout.name + "/" + to_string(type) + "/" +
                                 std::to_string(seed);
                pending.push_back({id, layout.name, type, std::move(fp),
                                   std::move(description), seed});
            }
        }
    }

    if (pending.empty()) throw Error("collect_database: nothing to collect");
    LabeledFingerprints dataset;
    for (const auto& p : pending) dataset.emplace_back(p.fp, p.type);

    TrajectoryDB db;
    db.metadata.mode = mode;
    db.metadata.feature_names = select_features(dataset, top_r, bins);
    const size_t m = db.metadata.feature_names.size();
    db.metadata.global_means.assign(m, 0.0);
    db.metadata.global_stds.assign(m, 0.0);
    const double n = static_cast<double>(pending.size());
    for (const auto& p : pending)
        for (size_t i = 0; i < m; ++i)
            db.metadata.global_means[i] += p.fp.value_of(db.metadata.feature_names[i]);
    for (size_t i = 0; i < m; ++i) db.metadata.global_means[i] /= n;
    for (const auto& p : pending) {
        for (size_t i = 0; i < m; ++i) {
            double d = p.fp.value_of(db.metadata.feature_names[i]) - db.metadata.global_means[i];
            db.metadata.global_stds[i] += d * d;
        }
    }
    for (size_t i = 0; i < m; ++i) db.metadata.global_stds[i] = std::sqrt(db.metadata.global_stds[i] / n);

    // Dimension: feature-space for the offline mode, probed from the service
    // for the external mode.
    if (mode == EmbeddingMode::FeatureZScore || llm == nullptr || llm->mode() == LlmMode::Mock) {
        db.metadata.dimension = m;
    } else {
        auto first = embed(pending.front().description, pending.front().fp, mode, db.metadata, llm);
        db.metadata.dimension = first.size();
    }

    for (auto& p : pending) {
        TrajectoryRecord rec;
        rec.id = std::move(p.id);
        rec.layout = std::move(p.layout);
        rec.true_type = p.type;
        rec.probe_length = probe_length;
        rec.description = std::move(p.description);
        rec.seed = p.seed;
        rec.embedding = embed(rec.description, p.fp, mode, db.metadata, llm);
        rec.fingerprint = std::move(p.fp);
        insert_record(db, std::move(rec));
    }
    return db;
}

inline TrajectoryDB filter_by_layout(const TrajectoryDB& db, const std::string& layout_name) {
    TrajectoryDB out;
    out.metadata = db.metadata;
    for (const auto& r : db.records)
        if (r.layout == layout_name) out.records.push_back(r);
    return out;
}

// --- Persistence: JSON Lines records + JSON metadata header ------------------

inline nlohmann::json record_to_json(const TrajectoryRecord& r) {
    return {{"id", r.id},
            {"layout", r.layout},
            {"true_type", to_string(r.true_type)},
            {"probe_length", r.probe_length},
            {"fingerprint", fingerprint_to_json(r.fingerprint)},
            {"description", r.description},
            {"embedding", r.embedding},
            {"seed", r.seed}};
}

inline TrajectoryRecord record_from_json(const nlohmann::json& j) {
    TrajectoryRecord r;
    r.id = j.at("id").get<std::string>();
    r.layout = j.at("layout").get<std::string>();
    r.true_type = teammate_type_from_string(j.at("true_type").get<std::string>());
    r.probe_length = j.at("probe_length").get<int>();
    r.fingerprint = fingerprint_from_json(j.at("fingerprint"));
    r.description = j.at("description").get<std::string>();
    r.embedding = j.at("embedding").get<std::vector<double>>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
}

inline nlohmann::json metadata_to_json(const DbMetadata& m) {
    return {{"schema_version", m.schema_version},
            {"mode", to_string(m.mode)},
            {"dimension", m.dimension},
            {"rubric_version", m.rubric_version},
            {"feature_names", m.feature_names},
            {"global_means", m.global_means},
            {"global_stds", m.global_stds}};
}

inline DbMetadata metadata_from_json(const nlohmann::json& j) {
    DbMetadata m;
    m.schema_version = j.at("schema_version").get<std::string>();
    m.mode = embedding_mode_from_string(j.at("mode").get<std::string>());
    m.dimension = j.at("dimension").get<size_t>();
    m.rubric_version = j.at("rubric_version").get<std::string>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.global_means = j.at("global_means").get<std::vector<double>>();
    m.global_stds = j.at("global_stds").get<std::vector<double>>();
    return m;
}

inline void save_db(const TrajectoryDB& db, const std::string& jsonl_path,
                    const std::string& meta_path) {
    std::ofstream meta(meta_path);
    if (!meta) throw Error("cannot write " + meta_path);
    meta << metadata_to_json(db.metadata).dump(2) << "\n";
    std::ofstream out(jsonl_path);
    if (!out) throw Error("cannot write " + jsonl_path);
    for (const auto& r : db.records) out << record_to_json(r).dump() << "\n";
}

inline TrajectoryDB load_db(const std::string& jsonl_path, const std::string& meta_path) {
    std::ifstream meta(meta_path);
    if (!meta) throw Error("cannot open " + meta_path);
    nlohmann::json mj;
    meta >> mj;
    TrajectoryDB db;
    db.metadata = metadata_from_json(mj);
    std::ifstream in(jsonl_path);
    if (!in) throw Error("cannot open " + jsonl_path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        insert_record(db, record_from_json(nlohmann::json::parse(line)));
    }
    return db;
}

}  // namespace collab
