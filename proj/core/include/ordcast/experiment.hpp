#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ordcast/dataset.hpp"
#include "ordcast/metrics.hpp"
#include "ordcast/seq2seq.hpp"

namespace ordcast {

// One cell of the pretraining hyperparameter grid.
struct GridPoint {
    int n_h = 64;
    double dropout = 0.25;
    double l2 = 1e-6;

    std::string tag() const;  // stable file-name stem, e.g. "nh64-d0.25-l1e-06"
};

// Everything an experiment run needs, loadable from one JSON file with
// key=value overrides layered on top. Field defaults mirror the full-scale
// protocol; desk-scale runs shrink them through the config.
struct ExperimentConfig {
    std::string protocol;  // "zero-shot" | "few-shot" (informational elsewhere)
    std::string manifest_path;
    std::string output_dir = "out";
    std::uint64_t seed = 1;
    int m = 150;  // quantizer bins

    int context_len = 21;  // T, the zero-shot encoder input length
    int lookback = 50;     // P, the few-shot forecast-origin context
    int horizon = 15;      // P_h
    int n_samples = 100;   // MC dropout trajectories
    bool argmax_feedback = false;

    std::string checkpoint;      // trained joint model (zero-shot, embed)
    std::string checkpoint_dir;  // pretrained grid storage (few-shot)

    std::vector<int> grid_n_h = {64, 128, 256, 512};
    std::vector<double> grid_dropout = {0.25, 0.5};
    std::vector<double> grid_l2 = {1e-5, 1e-6, 1e-7, 1e-8};

    std::vector<int> ar_orders = {3, 4};
    std::vector<GpKernel> gp_kernels = {GpKernel::Matern52, GpKernel::RationalQuadratic};

    TrainingConfig train;    // pretraining lengths/epochs; n_h etc. per grid point
    int train_stride = 5;    // auxiliary + fine-tune windowing stride
    int finetune_epochs = 50;

    int embed_window = 50;      // auxiliary excerpt length
    int embed_per_series = 50;  // excerpts sampled per auxiliary series
    int k_min = 5;
    int k_max = 50;

    std::vector<GridPoint> grid() const;
    void validate() const;
};

// Parses the JSON file, then applies "dotted.path=json-literal" overrides.
ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides = {});
ExperimentConfig experiment_config_from_json_text(const std::string& text,
                                                  const std::vector<std::string>& overrides = {});
std::string experiment_config_to_json_text(const ExperimentConfig& cfg);

// Trains the joint model over all auxiliary series in the manifest (pooled
// windows, per-series quantizers) and writes the checkpoint plus a training
// log. Returns the checkpoint path.
std::string train_gum(const ExperimentConfig& cfg);

struct RunSummary {
    std::vector<MetricRecord> records;
    RankTable table;
    std::vector<std::pair<std::string, std::string>> skipped;  // (what, reason)
};

// Zero-shot evaluation: per evaluation series, forecast the horizon from a
// `context_len` context with no weight updates, score against the baselines,
// and write reports.csv, rank_table.txt, per-series forecast files, a skips
// file and the resolved config into output_dir.
RunSummary run_zero_shot(const ExperimentConfig& cfg);

// Few-shot evaluation: per evaluation series, fine-tune every grid checkpoint
// (pretraining on demand when one is missing), select by validation loss,
// train the from-scratch reference with twice the epoch budget, forecast the
// final `horizon` values from a `lookback` context and score the four model
// families. Emits the same file set plus selection.csv.
RunSummary run_few_shot(const ExperimentConfig& cfg);

struct EmbeddingSummary {
    int k = 0;
    double silhouette_score = 0.0;
    int vector_count = 0;
};

// Encoder-activation analysis: pools sampled auxiliary excerpts with every
// evaluation context, clusters, selects k by silhouette and writes
// vectors.csv / clusters.csv / embedding.json.
EmbeddingSummary run_embedding(const ExperimentConfig& cfg);

// Rebuilds the rank/outperformance tables purely from a reports.csv and
// writes them to out_path; returns the table. Running this on a fresh run's
// reports.csv reproduces its rank_table.txt byte for byte.
RankTable recompute_report(const std::string& reports_csv, const std::string& out_path);

std::vector<MetricRecord> read_reports_csv(const std::string& path);

}  // namespace ordcast
