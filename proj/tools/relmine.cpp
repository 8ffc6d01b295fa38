// relmine: informative-label mining for relation classification.
// Subcommands: gen | train | eval | ablate | report.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relmine/commands.hpp"
#include "relmine/manifest.hpp"

int main(int argc, char** argv) {
    CLI::App app{"relation label mining: synthetic benchmark, training, evaluation"};
    app.set_version_flag("--version", relmine::kToolVersion);
    app.require_subcommand(1);

    relmine::GenArgs gen;
    auto* cmd_gen = app.add_subcommand("gen", "generate a planted synthetic benchmark");
    cmd_gen->add_option("--config", gen.config_path, "SyntheticConfig JSON file");
    cmd_gen->add_option("--out", gen.out_dir, "output directory")->required();
    cmd_gen->add_option("--set", gen.overrides, "override: dotted.key=value");

    relmine::TrainArgs train;
    auto* cmd_train = app.add_subcommand("train", "run warmup + refinement training");
    cmd_train->add_option("--config", train.config_path, "TrainConfig JSON file");
    cmd_train->add_option("--profile", train.profile, "paper|desk (default desk)");
    cmd_train->add_option("--data", train.data_dir, "directory with train/test datasets")
        ->required();
    cmd_train->add_option("--out", train.out_dir, "output directory")->required();
    cmd_train->add_option("--set", train.overrides, "override: dotted.key=value");

    relmine::EvalArgs eval;
    auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint");
    cmd_eval->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
    cmd_eval->add_option("--data", eval.data_dir, "directory with datasets")->required();
    cmd_eval->add_option("--split", eval.split, "dataset split prefix (default test)");
    cmd_eval->add_option("--out", eval.out_dir, "output directory")->required();
    cmd_eval->add_option("--dump-imputed", eval.dump_imputed,
                         "write imputed labels for explicit-annotated pairs to this JSONL");
    cmd_eval->add_option("--export-dot", eval.export_dot,
                         "write a DOT scene graph for the given image id");

    relmine::AblateArgs ablate;
    auto* cmd_ablate = app.add_subcommand("ablate", "run an ablation grid");
    cmd_ablate->add_option("--grid", ablate.grid_path, "grid JSON: array of config overrides")
        ->required();
    cmd_ablate->add_option("--data", ablate.data_dir, "directory with datasets")->required();
    cmd_ablate->add_option("--out", ablate.out_dir, "output directory")->required();
    cmd_ablate->add_option("--profile", ablate.profile, "base profile (default desk)");
    cmd_ablate->add_flag("--resume", ablate.resume, "skip grid rows with cached results");

    relmine::ReportArgs report;
    auto* cmd_report = app.add_subcommand("report", "emit SVG charts and a Markdown summary");
    cmd_report->add_option("runs", report.run_dirs, "run directories with eval/log CSVs")
        ->required();
    cmd_report->add_option("--out", report.out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*cmd_gen) relmine::cmd_gen(gen);
        if (*cmd_train) relmine::cmd_train(train);
        if (*cmd_eval) relmine::cmd_eval(eval);
        if (*cmd_ablate) relmine::cmd_ablate(ablate);
        if (*cmd_report) relmine::cmd_report(report);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
