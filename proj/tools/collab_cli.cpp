#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "collab/config.hpp"
#include "collab/harness.hpp"

namespace fs = std::filesystem;
using namespace collab;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::vector<std::string> methods;
    std::string layout;
    std::optional<std::uint64_t> seed_base;
    bool mock = false;
    bool live = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "TOML config file")->required();
    cmd->add_option("--set", args.sets, "Override a config value: section.key=value");
    cmd->add_option("--method", args.methods, "Restrict evaluation methods");
    cmd->add_option("--layout", args.layout, "Restrict to a single layout");
    cmd->add_option("--seed-base", args.seed_base, "Override evaluation.seed_base");
    cmd->add_flag("--mock", args.mock, "Force mock LLM mode");
    cmd->add_flag("--live", args.live, "Force live LLM mode");
}

RunConfig make_config(const CommonArgs& args) {
    RunConfig c = load_config(args.config_path, args.sets);
    if (!args.methods.empty()) c.methods = args.methods;
    if (!args.layout.empty()) {
        c.layouts = {args.layout};
        c.ablation_layout = args.layout;
    }
    if (args.seed_base) c.eval.seed_base = *args.seed_base;
    if (args.mock && args.live) throw ConfigInvalid("--mock and --live are exclusive");
    if (args.mock) c.llm.mode = LlmMode::Mock;
    if (args.live) c.llm.mode = LlmMode::Live;
    validate_config(c);
    apply_policy_config(c);
    return c;
}

std::vector<Layout> load_layouts(const RunConfig& c) {
    std::vector<Layout> layouts;
    for (const auto& name : c.layouts) {
        fs::path path = fs::path(c.layout_dir) / (name + ".txt");
        if (!fs::exists(path)) throw ConfigInvalid("layout file not found: " + path.string());
        layouts.push_back(load_layout_file(path.string()));
    }
    return layouts;
}

std::string db_meta_path(const std::string& db_file) {
    std::string base = db_file;
    if (base.size() > 6 && base.substr(base.size() - 6) == ".jsonl")
        base = base.substr(0, base.size() - 6);
    return base + ".meta.json";
}

void refuse_overwrite(const fs::path& path) {
    if (fs::exists(path))
        throw Error("refusing to overwrite existing file: " + path.string() +
                    " (remove it or point the config elsewhere)");
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
}

fs::path make_run_dir(const RunConfig& c, const std::string& command) {
    fs::path dir = fs::path(c.output_dir) / derived_run_id(c, command);
    if (fs::exists(dir))
        throw Error("run directory already exists: " + dir.string() +
                    " (set run_id or clean the output dir)");
    fs::create_directories(dir);
    return dir;
}

int cmd_collect(const CommonArgs& args) {
    RunConfig c = make_config(args);
    auto layouts = load_layouts(c);
    refuse_overwrite(c.db_file);
    refuse_overwrite(db_meta_path(c.db_file));

    LlmClient llm(c.llm);
    TrajectoryDB db =
        collect_database(layouts, c.db_episodes_per_type, c.eval.probe_length, c.env,
                         c.db_seed_base, c.embedding_mode, &llm, c.bins, c.top_r);
    fs::path db_path(c.db_file);
    if (db_path.has_parent_path()) fs::create_directories(db_path.parent_path());
    save_db(db, c.db_file, db_meta_path(c.db_file));
    std::cout << db.size() << " records written to " << c.db_file << "\n";
    return 0;
}

int cmd_build_rubric(const CommonArgs& args) {
    RunConfig c = make_config(args);
    if (!fs::exists(c.db_file) || !fs::exists(db_meta_path(c.db_file)))
        throw MissingArtifact("retrieval: database not found at " + c.db_file +
                              " (run collect first)");
    refuse_overwrite(c.rubric_file);

    TrajectoryDB db = load_db(c.db_file, db_meta_path(c.db_file));
    nlohmann::json out = {{"version", "1"}, {"layouts", nlohmann::json::object()}};
    for (const auto& name : c.layouts) {
        TrajectoryDB sub = filter_by_layout(db, name);
        if (sub.empty()) throw MissingArtifact("retrieval: no records for layout " + name);
        LabeledFingerprints dataset;
        for (const auto& r : sub.records) dataset.emplace_back(r.fingerprint, r.true_type);
        auto selected = select_features(dataset, c.top_r, c.bins);
        Rubric rubric = build_rubric(dataset, selected);
        out["layouts"][name] = rubric_to_json(rubric);

        std::cout << "layout " << name << ": top-" << selected.size()
                  << " features by mutual information (nats)\n";
        for (const auto& feature : selected) {
            std::cout << "  " << feature << "  " << fixed3(estimate_mi(dataset, feature, c.bins))
                      << "\n";
        }
    }
    write_file(c.rubric_file, out.dump(2) + "\n");
    std::cout << "rubric written to " << c.rubric_file << "\n";
    return 0;
}

std::map<std::string, Rubric> load_rubric_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw MissingArtifact("rubric: cannot open " + path);
    nlohmann::json j;
    f >> j;
    std::map<std::string, Rubric> out;
    for (const auto& [name, rj] : j.at("layouts").items()) out[name] = rubric_from_json(rj);
    return out;
}

bool any_method_of(const std::vector<std::string>& methods,
                   const std::vector<std::string>& wanted) {
    for (const auto& m : methods)
        if (std::find(wanted.begin(), wanted.end(), m) != wanted.end()) return true;
    return false;
}

int cmd_eval(const CommonArgs& args) {
    RunConfig c = make_config(args);
    auto layouts = load_layouts(c);
    const bool need_db = any_method_of(c.methods, {"recollab", "plastic", "logreg"});
    const bool need_rubric = any_method_of(c.methods, {"prototype", "collab", "recollab", "logreg"});

    if (need_db && !fs::exists(c.db_file))
        throw MissingArtifact("retrieval: database not found at " + c.db_file +
                              " (run collect first)");
    if (need_rubric && !fs::exists(c.rubric_file))
        throw MissingArtifact("rubric: rubric file not found at " + c.rubric_file +
                              " (run build-rubric first)");

    TrajectoryDB db;
    if (need_db) db = load_db(c.db_file, db_meta_path(c.db_file));
    std::map<std::string, Rubric> rubrics;
    if (need_rubric) rubrics = load_rubric_file(c.rubric_file);

    LlmClient llm(c.llm);
    std::vector<LayoutArtifacts> artifacts;
    for (const auto& layout : layouts) {
        LayoutArtifacts art;
        art.layout = layout;
        art.llm = &llm;
        art.retrieval_k = c.retrieval_k;
        if (need_rubric) {
            auto it = rubrics.find(layout.name);
            if (it == rubrics.end())
                throw MissingArtifact("rubric: no rubric for layout " + layout.name);
            art.rubric = it->second;
        }
        if (need_db) {
            art.db = filter_by_layout(db, layout.name);
            if (art.db.empty())
                throw MissingArtifact("retrieval: no records for layout " + layout.name);
            LabeledFingerprints dataset;
            for (const auto& r : art.db.records) dataset.emplace_back(r.fingerprint, r.true_type);
            if (any_method_of(c.methods, {"logreg"}))
                art.logreg = fit_logreg(dataset, art.rubric.selected_features, c.logreg);
            if (any_method_of(c.methods, {"plastic"}))
                art.plastic = fit_plastic_likelihoods(art.db, {layout}, c.env);
        }
        artifacts.push_back(std::move(art));
    }

    auto result = evaluate(artifacts, c.methods, c.eval, c.env);

    fs::path run_dir = make_run_dir(c, "eval");
    std::string episodes;
    for (const auto& ep : result.episodes) episodes += episode_to_json(ep).dump() + "\n";
    write_file(run_dir / "episodes.jsonl", episodes);
    write_file(run_dir / "summary.csv", summary_csv(result.summaries));
    std::string acc_table = summary_table(result.summaries, c.layouts, true);
    std::string ret_table = summary_table(result.summaries, c.layouts, false);
    write_file(run_dir / "accuracy_table.txt", acc_table);
    write_file(run_dir / "returns_table.txt", ret_table);

    for (const auto& layout : c.layouts) {
        std::vector<ParetoPoint> points;
        for (const auto& s : result.summaries)
            if (s.layout == layout) points.push_back({s.accuracy_mean, s.return_mean, s.method});
        auto frontier = pareto_frontier(points);
        write_file(run_dir / ("pareto_" + layout + ".csv"), pareto_csv(points, frontier));
    }

    std::cout << acc_table << "\n" << ret_table << "\n";
    std::cout << "outputs written to " << run_dir.string() << "\n";
    return 0;
}

int cmd_ablate(const CommonArgs& args, const std::string& which) {
    RunConfig c = make_config(args);
    fs::path layout_path = fs::path(c.layout_dir) / (c.ablation_layout + ".txt");
    if (!fs::exists(layout_path))
        throw ConfigInvalid("layout file not found: " + layout_path.string());
    Layout layout = load_layout_file(layout_path.string());

    LlmClient llm(c.llm);
    AblationPipelineOptions pipe;
    pipe.episodes_per_type = c.db_episodes_per_type;
    pipe.db_seed_base = c.db_seed_base;
    pipe.bins = c.bins;
    pipe.top_r = c.top_r;
    pipe.retrieval_k = c.retrieval_k;
    pipe.logreg = c.logreg;

    std::vector<AblationRow> rows;
    std::string value_name;
    if (which == "probe") {
        value_name = "probe_length";
        std::string method = c.methods.size() == 1 ? c.methods.front() : "prototype";
        rows = ablate_probe(layout, method, c.ablation_probe_lengths, c.env, c.eval, pipe, &llm);
    } else if (which == "k") {
        value_name = "k";
        if (!fs::exists(c.db_file))
            throw MissingArtifact("retrieval: database not found at " + c.db_file +
                                  " (run collect first)");
        TrajectoryDB db = load_db(c.db_file, db_meta_path(c.db_file));
        rows = ablate_k(layout, db, c.ablation_k_values, c.env, c.eval, pipe, &llm);
    } else {
        throw ConfigInvalid("ablate expects 'probe' or 'k', got: " + which);
    }

    std::string csv = value_name + ",method,accuracy_mean,accuracy_std,return_mean,return_std\n";
    for (const auto& row : rows) {
        csv += std::to_string(row.value) + "," + row.summary.method + "," +
               fixed3(row.summary.accuracy_mean) + "," + fixed3(row.summary.accuracy_std) + "," +
               fixed3(row.summary.return_mean) + "," + fixed3(row.summary.return_std) + "\n";
    }
    fs::path run_dir = make_run_dir(c, "ablate-" + which);
    write_file(run_dir / ("ablate_" + which + ".csv"), csv);
    std::cout << csv;
    std::cout << "outputs written to " << run_dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Teammate-type inference and policy routing pipeline"};
    app.require_subcommand(1);

    CommonArgs collect_args, rubric_args, eval_args, ablate_args;
    std::string ablate_which;

    auto* collect = app.add_subcommand("collect", "Collect the offline probe database");
    add_common(collect, collect_args);
    auto* rubric = app.add_subcommand("build-rubric", "Select features and build rubrics");
    add_common(rubric, rubric_args);
    auto* eval = app.add_subcommand("eval", "Evaluate classifiers and policy routing");
    add_common(eval, eval_args);
    auto* ablate = app.add_subcommand("ablate", "Probe-length or retrieval-count ablation");
    ablate->add_option("which", ablate_which, "probe|k")->required();
    add_common(ablate, ablate_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (collect->parsed()) return cmd_collect(collect_args);
        if (rubric->parsed()) return cmd_build_rubric(rubric_args);
        if (eval->parsed()) return cmd_eval(eval_args);
        if (ablate->parsed()) return cmd_ablate(ablate_args, ablate_which);
    } catch (const ConfigInvalid& e) {
        std::cerr << "error: invalid config: " << e.what() << "\n";
        return 2;
    } catch (const MissingArtifact& e) {
        std::cerr << "error: missing artifact: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
