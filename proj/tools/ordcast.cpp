// Command-line front end: training, zero-/few-shot evaluation, embedding
// analysis, report recomputation and synthetic-corpus generation.
//
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical
// failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ordcast/checkpoint.hpp"
#include "ordcast/dataset.hpp"
#include "ordcast/errors.hpp"
#include "ordcast/experiment.hpp"
#include "ordcast/synthetic.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;

    ordcast::ExperimentConfig load() const {
        return ordcast::load_experiment_config(config_path, overrides);
    }
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", args.overrides,
                    "override a config entry, e.g. --set seed=7 --set train.max_epochs=10");
    // sugar for the overrides people reach for constantly
    cmd->add_option_function<std::string>(
        "--manifest", [&args](const std::string& v) { args.overrides.push_back("manifest=" + v); },
        "series manifest path (same as --set manifest=...)");
    cmd->add_option_function<std::string>(
        "--output-dir",
        [&args](const std::string& v) { args.overrides.push_back("output_dir=" + v); },
        "output directory");
    cmd->add_option_function<std::string>(
        "--checkpoint",
        [&args](const std::string& v) { args.overrides.push_back("checkpoint=" + v); },
        "model checkpoint path");
    cmd->add_option_function<std::string>(
        "--seed", [&args](const std::string& v) { args.overrides.push_back("seed=" + v); },
        "master seed");
}

int run_synth(const std::string& out_dir, int aux, int eval, int length, int m,
              std::uint64_t seed) {
    namespace fs = std::filesystem;
    if (aux <= 0 || eval <= 0 || length <= 0 || m <= 0)
        throw ordcast::ConfigError("synth: counts, length and m must be positive");
    fs::create_directories(fs::path(out_dir) / "series");

    ordcast::DatasetManifest man;
    man.m = m;
    man.seed = seed;
    const auto write_group = [&](int count, std::uint64_t group_seed, const std::string& prefix,
                                 ordcast::SeriesRole role) {
        const auto corpus = ordcast::generate_corpus(static_cast<std::size_t>(count),
                                                     static_cast<std::size_t>(length),
                                                     group_seed, prefix);
        for (const auto& s : corpus) {
            const std::string rel = "series/" + s.id + ".csv";
            ordcast::save_series(s, (fs::path(out_dir) / rel).string());
            ordcast::ManifestEntry e;
            e.id = s.id;
            e.path = (fs::path(out_dir) / rel).string();
            e.role = role;
            e.note = "synthetic";
            man.series.push_back(std::move(e));
        }
    };
    write_group(aux, ordcast::derive_seed(seed, "aux"), "aux", ordcast::SeriesRole::Auxiliary);
    write_group(eval, ordcast::derive_seed(seed, "eval"), "eval",
                ordcast::SeriesRole::Evaluation);

    const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    ordcast::save_manifest(man, manifest_path);
    std::cout << "wrote " << man.series.size() << " series and " << manifest_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ordinal seq2seq forecasting toolkit"};
    app.require_subcommand(1);

    CommonArgs train_args, zero_args, few_args, embed_args;
    auto* cmd_train = app.add_subcommand("train-gum",
                                         "train the joint model over the auxiliary corpus");
    add_common(cmd_train, train_args);
    auto* cmd_zero = app.add_subcommand("zero-shot", "evaluate without weight updates");
    add_common(cmd_zero, zero_args);
    auto* cmd_few = app.add_subcommand("few-shot", "fine-tune per series, then evaluate");
    add_common(cmd_few, few_args);
    auto* cmd_embed = app.add_subcommand("embed", "encoder-activation clustering analysis");
    add_common(cmd_embed, embed_args);

    std::string reports_path, report_out;
    auto* cmd_report =
        app.add_subcommand("report", "recompute rank tables from an emitted reports.csv");
    cmd_report->add_option("-r,--reports", reports_path, "reports.csv path")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_report->add_option("-o,--out", report_out, "output table path (default: alongside)");

    std::string synth_dir = "synthetic";
    int synth_aux = 8, synth_eval = 20, synth_len = 1000, synth_m = 50;
    std::uint64_t synth_seed = 1;
    auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic corpus and manifest");
    cmd_synth->add_option("-o,--output-dir", synth_dir, "corpus directory");
    cmd_synth->add_option("--aux", synth_aux, "auxiliary series count");
    cmd_synth->add_option("--eval", synth_eval, "evaluation series count");
    cmd_synth->add_option("--length", synth_len, "points per series");
    cmd_synth->add_option("--m", synth_m, "manifest bin count");
    cmd_synth->add_option("--seed", synth_seed, "corpus seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(cmd_train)) {
            const auto cfg = train_args.load();
            const std::string path = ordcast::train_gum(cfg);
            const auto loaded = ordcast::load_checkpoint(path);
            std::printf("checkpoint: %s\nepochs run: %d\nbest validation loss: %.6f\n",
                        path.c_str(), loaded.metadata.epochs_run,
                        loaded.metadata.best_val_loss);
        } else if (app.got_subcommand(cmd_zero)) {
            const auto cfg = zero_args.load();
            const auto sum = ordcast::run_zero_shot(cfg);
            std::cout << ordcast::format_rank_table(sum.table);
            std::cout << "outputs in " << cfg.output_dir << "\n";
        } else if (app.got_subcommand(cmd_few)) {
            const auto cfg = few_args.load();
            const auto sum = ordcast::run_few_shot(cfg);
            std::cout << ordcast::format_rank_table(sum.table);
            std::cout << "outputs in " << cfg.output_dir << "\n";
        } else if (app.got_subcommand(cmd_embed)) {
            const auto cfg = embed_args.load();
            const auto sum = ordcast::run_embedding(cfg);
            std::printf("%d vectors, k=%d, silhouette %.4f\noutputs in %s\n",
                        sum.vector_count, sum.k, sum.silhouette_score,
                        cfg.output_dir.c_str());
        } else if (app.got_subcommand(cmd_report)) {
            if (report_out.empty())
                report_out = (std::filesystem::path(reports_path).parent_path() /
                              "rank_table.txt")
                                 .string();
            const auto table = ordcast::recompute_report(reports_path, report_out);
            std::cout << ordcast::format_rank_table(table);
            std::cout << "wrote " << report_out << "\n";
        } else if (app.got_subcommand(cmd_synth)) {
            return run_synth(synth_dir, synth_aux, synth_eval, synth_len, synth_m, synth_seed);
        }
    } catch (const ordcast::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const ordcast::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const ordcast::NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
