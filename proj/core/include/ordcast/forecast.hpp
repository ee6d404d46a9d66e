#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ordcast/seq2seq.hpp"
#include "ordcast/series.hpp"

namespace ordcast {

struct ForecastOptions {
    int horizon = 15;
    int n_samples = 100;           // Monte-Carlo dropout trajectories
    std::uint64_t seed = 1;
    bool argmax_feedback = false;  // feed back the modal bin instead of sampling

    void validate() const;
};

// Predictive distribution: one categorical row per forecast step, read as a
// piecewise-uniform density through `quantizer`.
struct Forecast {
    Eigen::MatrixXd step_probs;  // horizon x m
    OrdinalQuantizer quantizer;

    int horizon() const { return static_cast<int>(step_probs.rows()); }
    std::vector<double> step(int t) const;
};

// One trajectory: dropout masks drawn from `rng` and held fixed, encoder over
// the context, then closed-loop decoding feeding back the sampled (or argmax)
// bin. Returns the horizon x m matrix of per-step softmax rows.
Eigen::MatrixXd sample_trajectory(const Seq2SeqModel& model, const std::vector<int>& context,
                                  int horizon, bool argmax_feedback, Rng& rng);

// Averages `n_samples` trajectories, each with its own derived seed, into a
// per-step predictive categorical. The model is read-only throughout; a
// checksum of the weights is compared before and after as a guard. `context`
// holds bin indices under `eval_quantizer`, which must have the same bin
// count the model was trained with.
Forecast forecast(const Seq2SeqModel& model, const OrdinalQuantizer& eval_quantizer,
                  const std::vector<int>& context, const ForecastOptions& opts);

// Moments and inverse-CDF of the piecewise-uniform mixture a categorical row
// induces over [lo, hi].
double predictive_mean(const std::vector<double>& probs, const OrdinalQuantizer& q);
double predictive_cdf(const std::vector<double>& probs, const OrdinalQuantizer& q, double x);
double predictive_quantile(const std::vector<double>& probs, const OrdinalQuantizer& q,
                           double level);

// Adapts a trained model to a new series without touching the original: the
// series is re-quantized over its own range (extended by `forecast_horizon`
// steps of drift), windowed with cfg's lengths at `stride`, split 80/20
// chronologically, and trained starting from the pretrained weights. The
// returned model is never worse on that validation split than the pretrained
// weights themselves, since the initial parameters compete for the
// best-checkpoint slot.
TrainResult finetune(const Seq2SeqModel& pretrained, const TimeSeries& target,
                     const TrainingConfig& cfg, int forecast_horizon, int stride);

}  // namespace ordcast
