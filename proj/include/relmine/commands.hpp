#pragma once

// The work behind the CLI subcommands, kept out of main() so tests can call
// commands in-process.

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "relmine/data.hpp"
#include "relmine/manifest.hpp"
#include "relmine/metrics.hpp"
#include "relmine/mining.hpp"
#include "relmine/report.hpp"
#include "relmine/trainer.hpp"

namespace relmine {

namespace fs = std::filesystem;

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open config file " + path);
    try {
        return nlohmann::json::parse(f);
    } catch (const std::exception& e) {
        throw std::invalid_argument("malformed JSON in " + path + ": " + e.what());
    }
}

/// Applies one `--set dotted.key=value` override; values parse as JSON when
/// possible and fall back to plain strings.
inline void apply_override(nlohmann::json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("--set expects dotted.key=value, got '" + assignment + "'");
    std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    for (char& c : key)
        if (c == '.') c = '/';
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const std::exception&) {
        value = raw;
    }
    config[nlohmann::json::json_pointer("/" + key)] = value;
}

// --- synthetic config (de)serialization -------------------------------------

inline nlohmann::json synthetic_config_to_json(const SyntheticConfig& c) {
    return {{"num_images", c.num_images},
            {"num_test_images", c.num_test_images},
            {"objects_per_image", {c.objects_per_image.min, c.objects_per_image.max}},
            {"num_object_classes", c.num_object_classes},
            {"vocabulary", c.vocabulary.to_json()},
            {"pairs_per_image", {c.pairs_per_image.min, c.pairs_per_image.max}},
            {"annotator_bias", c.annotator_bias},
            {"latent_dim", c.latent_dim},
            {"latent_noise_sigma", c.latent_noise_sigma},
            {"class_embedding_dim", c.class_embedding_dim},
            {"zero_shot_holdout_fraction", c.zero_shot_holdout_fraction},
            {"seed", c.seed},
            {"fallback_explicit", c.fallback_explicit}};
}

inline SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
    SyntheticConfig c;
    c.vocabulary = default_synthetic_partition();
    auto field = [&](const char* key, auto& dst) {
        if (!j.contains(key)) return;
        try {
            dst = j.at(key).get<std::decay_t<decltype(dst)>>();
        } catch (const std::exception&) {
            throw std::invalid_argument(std::string("synthetic config: bad value for '") + key +
                                        "'");
        }
    };
    auto range = [&](const char* key, IndexRange& dst) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_array() || v.size() != 2)
            throw std::invalid_argument(std::string("synthetic config: '") + key +
                                        "' must be [min, max]");
        dst.min = v[0].get<std::size_t>();
        dst.max = v[1].get<std::size_t>();
    };
    field("num_images", c.num_images);
    field("num_test_images", c.num_test_images);
    range("objects_per_image", c.objects_per_image);
    field("num_object_classes", c.num_object_classes);
    if (j.contains("vocabulary")) {
        try {
            c.vocabulary = RelationVocabulary::from_json(j.at("vocabulary"));
        } catch (const std::exception& e) {
            throw std::invalid_argument(std::string("synthetic config: vocabulary: ") + e.what());
        }
    }
    range("pairs_per_image", c.pairs_per_image);
    field("annotator_bias", c.annotator_bias);
    field("latent_dim", c.latent_dim);
    field("latent_noise_sigma", c.latent_noise_sigma);
    field("class_embedding_dim", c.class_embedding_dim);
    field("zero_shot_holdout_fraction", c.zero_shot_holdout_fraction);
    field("seed", c.seed);
    field("fallback_explicit", c.fallback_explicit);
    try {
        c.validate();
    } catch (const std::exception& e) {
        throw std::invalid_argument(e.what());
    }
    return c;
}

// --- gen ---------------------------------------------------------------------

struct GenArgs {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
};

inline void cmd_gen(const GenArgs& args) {
    WallClock clock;
    nlohmann::json j = args.config_path.empty() ? nlohmann::json::object()
                                                : load_json_file(args.config_path);
    for (const auto& ov : args.overrides) apply_override(j, ov);
    const SyntheticConfig cfg = synthetic_config_from_json(j);
    auto [train, test] = generate_synthetic(cfg);

    const std::string train_prefix = (fs::path(args.out_dir) / "train").string();
    const std::string test_prefix = (fs::path(args.out_dir) / "test").string();
    save_dataset(train, train_prefix);
    save_dataset(test, test_prefix);

    RunManifest m;
    m.command = "gen";
    m.config_path = args.config_path;
    m.resolved_config = synthetic_config_to_json(cfg);
    m.seed = cfg.seed;
    for (const auto& prefix : {train_prefix, test_prefix})
        for (const char* suffix : {".header.json", ".jsonl", ".emb", ".oracle.jsonl"}) {
            const std::string p = prefix + suffix;
            if (fs::exists(p)) {
                m.outputs.push_back(p);
                m.dataset_hashes[p] = hex64(file_fnv64(p));
            }
        }
    m.wall_ms = clock.elapsed_ms();
    write_manifest(m, (fs::path(args.out_dir) / "gen.manifest.json").string());
}

// --- train -------------------------------------------------------------------

inline TrainConfig resolve_train_config(const std::string& profile,
                                        const std::string& config_path,
                                        const std::vector<std::string>& overrides) {
    TrainConfig base;
    if (profile == "paper")
        base = TrainConfig::paper_profile();
    else if (profile == "desk")
        base = TrainConfig::desk_profile();
    else
        throw std::invalid_argument("unknown profile '" + profile + "' (expected paper|desk)");
    nlohmann::json j = base.to_json();
    if (!config_path.empty()) j.merge_patch(load_json_file(config_path));
    for (const auto& ov : overrides) apply_override(j, ov);
    return TrainConfig::from_json(j);
}

struct TrainArgs {
    std::string config_path;
    std::string profile = "desk";
    std::string data_dir;
    std::string out_dir;
    std::vector<std::string> overrides;
};

inline void cmd_train(const TrainArgs& args) {
    WallClock clock;
    const TrainConfig cfg = resolve_train_config(args.profile, args.config_path, args.overrides);
    const std::string train_prefix = (fs::path(args.data_dir) / "train").string();
    const std::string val_prefix = (fs::path(args.data_dir) / "test").string();
    const Dataset train_ds = load_dataset(train_prefix);
    const Dataset val_ds = load_dataset(val_prefix);

    TrainOutput out = train(train_ds, val_ds, cfg);

    fs::create_directories(args.out_dir);
    const std::string ck_path = (fs::path(args.out_dir) / "checkpoint.ckpt").string();
    const std::string log_path = (fs::path(args.out_dir) / "train_log.csv").string();
    save_checkpoint(out.checkpoint, ck_path);
    {
        std::ofstream f(log_path);
        if (!f) throw std::runtime_error("cmd_train: cannot write " + log_path);
        f << out.log.to_csv();
    }

    RunManifest m;
    m.command = "train";
    m.config_path = args.config_path;
    m.resolved_config = cfg.to_json();
    m.seed = cfg.seed;
    m.outputs = {ck_path, log_path};
    for (const auto& prefix : {train_prefix, val_prefix})
        for (const char* suffix : {".header.json", ".jsonl", ".emb"}) {
            const std::string p = prefix + suffix;
            if (fs::exists(p)) m.dataset_hashes[p] = hex64(file_fnv64(p));
        }
    m.wall_ms = clock.elapsed_ms();
    write_manifest(m, (fs::path(args.out_dir) / "train.manifest.json").string());
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string data_dir;
    std::string split = "test";
    std::string out_dir;
    std::string dump_imputed;  // optional JSONL path
    std::string export_dot;    // optional image id
};

inline void cmd_eval(const EvalArgs& args) {
    WallClock clock;
    const Checkpoint ck = load_checkpoint(args.checkpoint);
    const std::string eval_prefix = (fs::path(args.data_dir) / args.split).string();
    const Dataset ds = load_dataset(eval_prefix);
    if (ck.vocabulary_hash != ds.vocabulary.hash())
        throw std::runtime_error("cmd_eval: checkpoint vocabulary hash does not match dataset");

    std::set<TripletType> zs;
    const std::string train_prefix = (fs::path(args.data_dir) / "train").string();
    if (args.split != "train" && fs::exists(train_prefix + ".header.json"))
        zs = zero_shot_triplets(load_dataset(train_prefix), ds);

    const EvalResult res = evaluate(ck.params, ds, zs);

    fs::create_directories(args.out_dir);
    const std::string eval_csv = (fs::path(args.out_dir) / "eval.csv").string();
    const std::string class_csv = (fs::path(args.out_dir) / "per_class.csv").string();
    const std::string subset_csv = (fs::path(args.out_dir) / "subset.csv").string();
    {
        std::ofstream f(eval_csv);
        f << eval_csv_header() << "\n" << eval_csv_row(res) << "\n";
    }
    {
        std::ofstream f(class_csv);
        f << per_class_csv(res, ds.vocabulary);
    }
    {
        std::ofstream f(subset_csv);
        f << "subset,mR@50,mR@100\n";
        f << "explicit," << format_metric(res.explicit_mr50) << ","
          << format_metric(res.explicit_mr100) << "\n";
        f << "implicit," << format_metric(res.implicit_mr50) << ","
          << format_metric(res.implicit_mr100) << "\n";
    }

    RunManifest m;
    m.command = "eval";
    m.resolved_config = ck.config_snapshot;
    m.outputs = {eval_csv, class_csv, subset_csv};

    if (!args.dump_imputed.empty()) {
        ImputeMode mode = ImputeMode::Hard;
        if (ck.config_snapshot.contains("impute_mode") &&
            ck.config_snapshot.at("impute_mode") == "soft")
            mode = ImputeMode::Soft;
        std::ofstream f(args.dump_imputed);
        if (!f) throw std::runtime_error("cmd_eval: cannot write " + args.dump_imputed);
        auto [implicit_refs, explicit_refs] = partition_by_annotation(ds, ds.vocabulary);
        const auto refined = impute_batch(ck.params, ds, explicit_refs, ds.vocabulary, mode);
        std::vector<double> wide;
        for (const auto& [ref, dist] : refined) {
            const auto& pr = resolve(ds, ref);
            wide.assign(pr.embedding.begin(), pr.embedding.end());
            const auto logits = forward(ck.params, wide);
            const std::size_t imputed = argmax_over(logits, ds.vocabulary.implicit_ids());
            f << nlohmann::json{{"image_id", ds.images[ref.image].image_id},
                                {"pair_index", ref.pair},
                                {"imputed", imputed},
                                {"refined", dist.probs}}
                     .dump()
              << "\n";
        }
        m.outputs.push_back(args.dump_imputed);
    }

    if (!args.export_dot.empty()) {
        const ImageRecord* img = nullptr;
        for (const auto& im : ds.images)
            if (im.image_id == args.export_dot) img = &im;
        if (!img) throw std::runtime_error("cmd_eval: no image with id " + args.export_dot);
        const std::string dot_path =
            (fs::path(args.out_dir) / ("scene_" + args.export_dot + ".dot")).string();
        std::ofstream f(dot_path);
        f << "digraph scene {\n";
        for (const auto& ob : img->objects)
            f << "  n" << ob.id << " [label=\"" << ds.object_class_names[ob.class_id] << "\"];\n";
        std::vector<double> wide;
        for (const auto& pr : img->pairs) {
            wide.assign(pr.embedding.begin(), pr.embedding.end());
            const auto logits = forward(ck.params, wide);
            std::size_t best = 0;
            for (std::size_t k = 1; k < logits.size(); ++k)
                if (logits[k] > logits[best]) best = k;
            f << "  n" << pr.subject_id << " -> n" << pr.object_id << " [label=\""
              << ds.vocabulary.name(best) << "\"];\n";
        }
        f << "}\n";
        m.outputs.push_back(dot_path);
    }

    m.dataset_hashes[args.checkpoint] = hex64(file_fnv64(args.checkpoint));
    m.wall_ms = clock.elapsed_ms();
    write_manifest(m, (fs::path(args.out_dir) / "eval.manifest.json").string());
}

// --- ablate ------------------------------------------------------------------

inline nlohmann::json eval_result_to_json(const EvalResult& r) {
    auto num = [](double v) -> nlohmann::json {
        if (std::isnan(v)) return nullptr;
        return v;
    };
    nlohmann::json pc = nlohmann::json::object();
    for (const auto& [c, v] : r.per_class_recall100) pc[std::to_string(c)] = v;
    return {{"recall", {num(r.recall[0]), num(r.recall[1]), num(r.recall[2])}},
            {"mean_recall", {num(r.mean_recall[0]), num(r.mean_recall[1]), num(r.mean_recall[2])}},
            {"zero_shot",
             {num(r.zero_shot_recall[0]), num(r.zero_shot_recall[1]), num(r.zero_shot_recall[2])}},
            {"per_class_recall100", pc},
            {"explicit_mr50", num(r.explicit_mr50)},
            {"explicit_mr100", num(r.explicit_mr100)},
            {"implicit_mr50", num(r.implicit_mr50)},
            {"implicit_mr100", num(r.implicit_mr100)}};
}

inline EvalResult eval_result_from_json(const nlohmann::json& j) {
    EvalResult r;
    auto num = [](const nlohmann::json& v) { return v.is_null() ? nan_value() : v.get<double>(); };
    for (int i = 0; i < 3; ++i) {
        r.recall[i] = num(j.at("recall")[i]);
        r.mean_recall[i] = num(j.at("mean_recall")[i]);
        r.zero_shot_recall[i] = num(j.at("zero_shot")[i]);
    }
    for (const auto& [k, v] : j.at("per_class_recall100").items())
        r.per_class_recall100[std::stoul(k)] = v.get<double>();
    r.explicit_mr50 = num(j.at("explicit_mr50"));
    r.explicit_mr100 = num(j.at("explicit_mr100"));
    r.implicit_mr50 = num(j.at("implicit_mr50"));
    r.implicit_mr100 = num(j.at("implicit_mr100"));
    return r;
}

struct AblateArgs {
    std::string grid_path;
    std::string data_dir;
    std::string out_dir;
    bool resume = false;
    std::string profile = "desk";
};

inline void cmd_ablate(const AblateArgs& args) {
    WallClock clock;
    const nlohmann::json grid_json = load_json_file(args.grid_path);
    if (!grid_json.is_array())
        throw std::invalid_argument("ablation grid must be a JSON array of config overrides");

    TrainConfig base = resolve_train_config(args.profile, "", {});
    std::vector<TrainConfig> grid;
    for (const auto& row : grid_json) {
        nlohmann::json j = base.to_json();
        j.merge_patch(row);
        grid.push_back(TrainConfig::from_json(j));
    }

    const Dataset train_ds = load_dataset((fs::path(args.data_dir) / "train").string());
    const Dataset test_ds = load_dataset((fs::path(args.data_dir) / "test").string());

    const fs::path rows_dir = fs::path(args.out_dir) / "rows";
    fs::create_directories(rows_dir);

    std::vector<AblationRow> rows;
    for (const TrainConfig& cfg : grid) {
        const std::string row_path = (rows_dir / (hex64(cfg.hash()) + ".json")).string();
        if (args.resume && fs::exists(row_path)) {
            const nlohmann::json cached = load_json_file(row_path);
            AblationRow row;
            row.config = TrainConfig::from_json(cached.at("config"));
            row.config_hash = cfg.hash();
            row.ok = cached.at("ok").get<bool>();
            if (row.ok)
                row.test_result = eval_result_from_json(cached.at("result"));
            else
                row.error = cached.at("error").get<std::string>();
            rows.push_back(std::move(row));
            continue;
        }
        auto computed = run_ablation(std::vector<TrainConfig>{cfg}, train_ds, test_ds, test_ds);
        AblationRow row = std::move(computed.front());
        nlohmann::json cache{{"config", row.config.to_json()}, {"ok", row.ok}};
        if (row.ok)
            cache["result"] = eval_result_to_json(row.test_result);
        else
            cache["error"] = row.error;
        std::ofstream f(row_path);
        f << cache.dump(2) << "\n";
        rows.push_back(std::move(row));
    }

    const std::string csv_path = (fs::path(args.out_dir) / "ablation.csv").string();
    {
        std::ofstream f(csv_path);
        f << ablation_csv(rows);
    }

    RunManifest m;
    m.command = "ablate";
    m.config_path = args.grid_path;
    m.resolved_config = grid_json;
    m.outputs = {csv_path};
    m.wall_ms = clock.elapsed_ms();
    write_manifest(m, (fs::path(args.out_dir) / "ablate.manifest.json").string());
}

// --- report ------------------------------------------------------------------

struct ReportArgs {
    std::vector<std::string> run_dirs;
    std::string out_dir;
};

inline void cmd_report(const ReportArgs& args) {
    WallClock clock;
    if (args.run_dirs.empty()) throw std::invalid_argument("report: no run directories given");
    std::vector<PerClassSeries> series;
    std::vector<CurveSeries> curves;
    std::vector<std::pair<std::string, CsvTable>> finals;
    for (const auto& dir : args.run_dirs) {
        const std::string label = fs::path(dir).filename().string();
        const std::string class_csv = (fs::path(dir) / "per_class.csv").string();
        if (fs::exists(class_csv)) series.push_back(read_per_class_csv(class_csv, label));
        const std::string log_csv = (fs::path(dir) / "train_log.csv").string();
        if (fs::exists(log_csv)) curves.push_back(read_curve(log_csv, label));
        const std::string eval_csv = (fs::path(dir) / "eval.csv").string();
        if (fs::exists(eval_csv)) finals.emplace_back(label, read_csv(eval_csv));
    }
    if (series.empty() && curves.empty() && finals.empty())
        throw std::runtime_error("report: no usable CSVs under the given run directories");

    fs::create_directories(args.out_dir);
    RunManifest m;
    m.command = "report";
    if (!series.empty()) {
        const std::string p = (fs::path(args.out_dir) / "per_class_recall.svg").string();
        std::ofstream f(p);
        f << per_class_bar_chart(series);
        m.outputs.push_back(p);
    }
    if (!curves.empty()) {
        const std::string p = (fs::path(args.out_dir) / "mr_curve.svg").string();
        std::ofstream f(p);
        f << mr_curve_chart(curves);
        m.outputs.push_back(p);
    }
    {
        const std::string p = (fs::path(args.out_dir) / "summary.md").string();
        std::ofstream f(p);
        f << summary_markdown(finals);
        m.outputs.push_back(p);
    }
    m.wall_ms = clock.elapsed_ms();
    write_manifest(m, (fs::path(args.out_dir) / "report.manifest.json").string());
}

}  // namespace relmine
