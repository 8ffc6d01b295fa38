#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "relmine/commands.hpp"

using namespace relmine;
namespace tfs = std::filesystem;

namespace {

tfs::path fresh_dir(const std::string& name) {
    const auto dir = tfs::temp_directory_path() / "relmine_test_cli" / name;
    tfs::remove_all(dir);
    tfs::create_directories(dir);
    return dir;
}

std::string slurp(const tfs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), {});
}

void write_file(const tfs::path& p, const std::string& content) {
    std::ofstream f(p);
    f << content;
}

// Small generation config so CLI tests stay fast.
std::string small_gen_config() {
    return R"({"num_images": 24, "num_test_images": 10, "pairs_per_image": [6, 8],
               "num_object_classes": 6, "seed": 42})";
}

}  // namespace

TEST_CASE("overrides parse dotted keys and JSON values") {
    nlohmann::json j{{"mixup", {{"enabled", true}, {"alpha", 4.0}}}, {"seed", 1}};
    apply_override(j, "mixup.enabled=false");
    apply_override(j, "seed=99");
    apply_override(j, "note=plain-string");
    REQUIRE(j["mixup"]["enabled"] == false);
    REQUIRE(j["seed"] == 99);
    REQUIRE(j["note"] == "plain-string");
    REQUIRE_THROWS_AS(apply_override(j, "no-equals-sign"), std::invalid_argument);
}

TEST_CASE("profiles resolve with file and --set precedence") {
    const auto dir = fresh_dir("profiles");
    write_file(dir / "cfg.json", R"({"batch_size": 8})");

    auto paper = resolve_train_config("paper", "", {});
    REQUIRE(paper.batch_size == 12);
    REQUIRE(paper.warmup_iterations == 30000);

    auto from_file = resolve_train_config("desk", (dir / "cfg.json").string(), {});
    REQUIRE(from_file.batch_size == 8);
    REQUIRE(from_file.warmup_iterations == 3000);

    auto with_set = resolve_train_config("desk", (dir / "cfg.json").string(),
                                         {"batch_size=4", "mixup.enabled=false"});
    REQUIRE(with_set.batch_size == 4);
    REQUIRE_FALSE(with_set.mixup.enabled);

    REQUIRE_THROWS_AS(resolve_train_config("laptop", "", {}), std::invalid_argument);
}

TEST_CASE("gen writes datasets and a manifest, deterministically") {
    const auto dir = fresh_dir("gen");
    write_file(dir / "gen.json", small_gen_config());

    GenArgs args;
    args.config_path = (dir / "gen.json").string();
    args.out_dir = (dir / "data").string();
    cmd_gen(args);

    for (const char* f : {"train.header.json", "train.jsonl", "train.emb", "train.oracle.jsonl",
                          "test.header.json", "test.jsonl", "test.emb", "gen.manifest.json"})
        REQUIRE(tfs::exists(tfs::path(args.out_dir) / f));

    auto manifest = nlohmann::json::parse(slurp(tfs::path(args.out_dir) / "gen.manifest.json"));
    REQUIRE(manifest.at("command") == "gen");
    REQUIRE(manifest.at("tool_version") == std::string(kToolVersion));
    REQUIRE(manifest.at("resolved_config").at("num_images") == 24);

    // identical config -> identical dataset bytes
    GenArgs again = args;
    again.out_dir = (dir / "data2").string();
    cmd_gen(again);
    for (const char* f : {"train.jsonl", "train.emb", "test.jsonl", "test.emb"})
        REQUIRE(slurp(tfs::path(args.out_dir) / f) == slurp(tfs::path(again.out_dir) / f));

    // --set override beats the file value
    GenArgs overridden = args;
    overridden.out_dir = (dir / "data3").string();
    overridden.overrides = {"num_images=5"};
    cmd_gen(overridden);
    auto m3 = nlohmann::json::parse(slurp(tfs::path(overridden.out_dir) / "gen.manifest.json"));
    REQUIRE(m3.at("resolved_config").at("num_images") == 5);

    // schema violations carry the field name
    GenArgs bad = args;
    bad.out_dir = (dir / "data4").string();
    bad.overrides = {"annotator_bias=2.5"};
    REQUIRE_THROWS_WITH(cmd_gen(bad), Catch::Matchers::ContainsSubstring("annotator_bias"));
}

TEST_CASE("train, eval, report and ablate round trip through the filesystem") {
    const auto dir = fresh_dir("pipeline");
    write_file(dir / "gen.json", small_gen_config());
    GenArgs gen;
    gen.config_path = (dir / "gen.json").string();
    gen.out_dir = (dir / "data").string();
    cmd_gen(gen);

    TrainArgs train;
    train.data_dir = gen.out_dir;
    train.out_dir = (dir / "run1").string();
    train.overrides = {"warmup_iterations=60", "refinement_iterations=40", "eval_every=50",
                       "hidden_width=16", "seed=3"};
    cmd_train(train);
    REQUIRE(tfs::exists(tfs::path(train.out_dir) / "checkpoint.ckpt"));
    REQUIRE(tfs::exists(tfs::path(train.out_dir) / "train_log.csv"));
    auto tm = nlohmann::json::parse(slurp(tfs::path(train.out_dir) / "train.manifest.json"));
    REQUIRE(tm.at("resolved_config").at("warmup_iterations") == 60);

    const auto log = slurp(tfs::path(train.out_dir) / "train_log.csv");
    REQUIRE(log.rfind("iteration,stage,mean_loss,mR@20,mR@50,mR@100,R@20,R@50,R@100,zsR@20,zsR@50,"
                      "wall_ms\n",
                      0) == 0);

    EvalArgs eval;
    eval.checkpoint = (tfs::path(train.out_dir) / "checkpoint.ckpt").string();
    eval.data_dir = gen.out_dir;
    eval.out_dir = (tfs::path(train.out_dir)).string();
    eval.dump_imputed = (tfs::path(train.out_dir) / "imputed.jsonl").string();
    cmd_eval(eval);
    for (const char* f : {"eval.csv", "per_class.csv", "subset.csv", "imputed.jsonl"})
        REQUIRE(tfs::exists(tfs::path(train.out_dir) / f));

    // evaluating the same checkpoint twice produces identical CSVs
    EvalArgs eval2 = eval;
    eval2.out_dir = (dir / "eval2").string();
    eval2.dump_imputed.clear();
    cmd_eval(eval2);
    REQUIRE(slurp(tfs::path(eval.out_dir) / "eval.csv") ==
            slurp(tfs::path(eval2.out_dir) / "eval.csv"));
    REQUIRE(slurp(tfs::path(eval.out_dir) / "per_class.csv") ==
            slurp(tfs::path(eval2.out_dir) / "per_class.csv"));

    // imputed dump rows are explicit-annotated pairs only, with refined targets
    {
        std::ifstream f(eval.dump_imputed);
        std::string line;
        std::size_t rows = 0;
        const Dataset test_ds = load_dataset((tfs::path(gen.out_dir) / "test").string());
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line);
            REQUIRE(is_implicit(test_ds.vocabulary, j.at("imputed").get<std::size_t>()));
            ++rows;
        }
        auto [implicit_refs, explicit_refs] = partition_by_annotation(test_ds, test_ds.vocabulary);
        REQUIRE(rows == explicit_refs.size());
    }

    // DOT export names objects and labels edges
    EvalArgs dot = eval;
    dot.out_dir = (dir / "dot").string();
    dot.dump_imputed.clear();
    const Dataset test_ds = load_dataset((tfs::path(gen.out_dir) / "test").string());
    dot.export_dot = test_ds.images.front().image_id;
    cmd_eval(dot);
    const auto dot_text = slurp(tfs::path(dot.out_dir) / ("scene_" + dot.export_dot + ".dot"));
    REQUIRE(dot_text.find("digraph") != std::string::npos);
    REQUIRE(dot_text.find("->") != std::string::npos);

    // vocabulary hash mismatch is a hard error
    {
        auto other_dir = fresh_dir("other_vocab");
        GenArgs g2;
        g2.out_dir = (other_dir / "data").string();
        g2.overrides = {R"(vocabulary={"names":["on","riding","holding"],"explicit":["on"]})",
                        "num_images=4", "num_test_images=2", "num_object_classes=4",
                        "pairs_per_image=[2,3]"};
        cmd_gen(g2);
        EvalArgs bad = eval;
        bad.data_dir = g2.out_dir;
        bad.out_dir = (other_dir / "eval").string();
        REQUIRE_THROWS_WITH(cmd_eval(bad), Catch::Matchers::ContainsSubstring("vocabulary hash"));
    }

    ReportArgs report;
    report.run_dirs = {train.out_dir};
    report.out_dir = (dir / "report").string();
    cmd_report(report);
    REQUIRE(tfs::exists(tfs::path(report.out_dir) / "per_class_recall.svg"));
    REQUIRE(tfs::exists(tfs::path(report.out_dir) / "mr_curve.svg"));
    REQUIRE(tfs::exists(tfs::path(report.out_dir) / "summary.md"));
    const auto svg1 = slurp(tfs::path(report.out_dir) / "per_class_recall.svg");

    ReportArgs report2 = report;
    report2.out_dir = (dir / "report2").string();
    cmd_report(report2);
    REQUIRE(svg1 == slurp(tfs::path(report2.out_dir) / "per_class_recall.svg"));

    // ablation: 2-row grid, resume reuses cached rows
    write_file(dir / "grid.json",
               R"([{"train_label_subset":"implicit","warmup_iterations":40,
                    "refinement_iterations":30,"eval_every":100,"hidden_width":16},
                   {"train_label_subset":"all","refinement_enabled":false,
                    "mixup":{"enabled":false},"warmup_iterations":40,
                    "refinement_iterations":30,"eval_every":100,"hidden_width":16}])");
    AblateArgs ablate;
    ablate.grid_path = (dir / "grid.json").string();
    ablate.data_dir = gen.out_dir;
    ablate.out_dir = (dir / "ablation").string();
    cmd_ablate(ablate);
    const auto csv = slurp(tfs::path(ablate.out_dir) / "ablation.csv");
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rows
    REQUIRE(csv.find("implicit") != std::string::npos);
    REQUIRE(csv.find(",ok,") != std::string::npos);

    AblateArgs resume = ablate;
    resume.resume = true;
    cmd_ablate(resume);
    REQUIRE(slurp(tfs::path(ablate.out_dir) / "ablation.csv") == csv);
}

TEST_CASE("subset csv carries the explicit/implicit split") {
    const auto dir = fresh_dir("subsets");
    write_file(dir / "gen.json", small_gen_config());
    GenArgs gen;
    gen.config_path = (dir / "gen.json").string();
    gen.out_dir = (dir / "data").string();
    cmd_gen(gen);
    TrainArgs train;
    train.data_dir = gen.out_dir;
    train.out_dir = (dir / "run").string();
    train.overrides = {"warmup_iterations=30", "refinement_iterations=20", "eval_every=50",
                       "hidden_width=8"};
    cmd_train(train);
    EvalArgs eval;
    eval.checkpoint = (tfs::path(train.out_dir) / "checkpoint.ckpt").string();
    eval.data_dir = gen.out_dir;
    eval.out_dir = train.out_dir;
    cmd_eval(eval);
    const auto subset = slurp(tfs::path(train.out_dir) / "subset.csv");
    REQUIRE(subset.rfind("subset,mR@50,mR@100\nexplicit,", 0) == 0);
    REQUIRE(subset.find("\nimplicit,") != std::string::npos);
}
