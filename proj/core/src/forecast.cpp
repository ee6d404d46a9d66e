#include "ordcast/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ordcast/dataset.hpp"
#include "ordcast/errors.hpp"

namespace ordcast {

namespace {

void check_probs(const std::vector<double>& probs, int m) {
    if (static_cast<int>(probs.size()) != m)
        throw ConfigError("predictive row has " + std::to_string(probs.size()) +
                          " entries for a " + std::to_string(m) + "-bin quantizer");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw NumericalError("predictive row has a negative entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw NumericalError("predictive row sums to " + std::to_string(sum));
}

int sample_bin(const std::vector<double>& probs, Rng& rng) {
    const double u = rng.uniform();
    double cdf = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        cdf += probs[k];
        if (u < cdf) return static_cast<int>(k);
    }
    return static_cast<int>(probs.size()) - 1;
}

int argmax_bin(const std::vector<double>& probs) {
    return static_cast<int>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
}

}  // namespace

void ForecastOptions::validate() const {
    if (horizon <= 0) throw ConfigError("forecast horizon must be positive");
    if (n_samples <= 0) throw ConfigError("forecast n_samples must be positive");
}

std::vector<double> Forecast::step(int t) const {
    if (t < 0 || t >= horizon()) throw ConfigError("forecast step out of range");
    std::vector<double> row(static_cast<std::size_t>(step_probs.cols()));
    for (Eigen::Index k = 0; k < step_probs.cols(); ++k) row[static_cast<std::size_t>(k)] = step_probs(t, k);
    return row;
}

Eigen::MatrixXd sample_trajectory(const Seq2SeqModel& model, const std::vector<int>& context,
                                  int horizon, bool argmax_feedback, Rng& rng) {
    if (horizon <= 0) throw ConfigError("sample_trajectory: horizon must be positive");
    if (context.empty()) throw DataError("sample_trajectory: empty context");
    const int m = model.bins();
    for (int k : context) {
        if (k < 0 || k >= m)
            throw DataError("sample_trajectory: context bin " + std::to_string(k) +
                            " outside [0, " + std::to_string(m) + ")");
    }

    const DropoutMasks masks = sample_dropout_masks(
        m, static_cast<int>(model.hidden_size()), model.hyper.dropout_rate, rng);

    OrdinalSequence seq;
    seq.indices = context;
    seq.quantizer_id = model.quantizer.id();
    LstmState state = encoder_forward(model, seq, &masks);

    Eigen::MatrixXd rows(horizon, m);
    int prev = context.back();
    for (int t = 0; t < horizon; ++t) {
        DecoderStepResult step = decoder_step(model, state.h, state.c, prev, &masks);
        for (int k = 0; k < m; ++k) rows(t, k) = step.probs[static_cast<std::size_t>(k)];
        state.h = std::move(step.h);
        state.c = std::move(step.c);
        prev = argmax_feedback ? argmax_bin(step.probs) : sample_bin(step.probs, rng);
    }
    return rows;
}

Forecast forecast(const Seq2SeqModel& model, const OrdinalQuantizer& eval_quantizer,
                  const std::vector<int>& context, const ForecastOptions& opts) {
    opts.validate();
    if (eval_quantizer.bins() != model.bins())
        throw ConfigError("forecast: quantizer has " + std::to_string(eval_quantizer.bins()) +
                          " bins but the model expects " + std::to_string(model.bins()));

    const std::uint64_t checksum_before = weight_checksum(model);

    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(opts.horizon, model.bins());
    for (int i = 0; i < opts.n_samples; ++i) {
        Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(i)));
        acc += sample_trajectory(model, context, opts.horizon, opts.argmax_feedback, rng);
    }
    acc /= static_cast<double>(opts.n_samples);

    if (weight_checksum(model) != checksum_before)
        throw NumericalError("forecast: model weights changed during sampling");

    return Forecast{std::move(acc), eval_quantizer};
}

double predictive_mean(const std::vector<double>& probs, const OrdinalQuantizer& q) {
    check_probs(probs, q.bins());
    double mean = 0.0;
    for (int k = 0; k < q.bins(); ++k) mean += probs[static_cast<std::size_t>(k)] * q.midpoint(k);
    return mean;
}

double predictive_cdf(const std::vector<double>& probs, const OrdinalQuantizer& q, double x) {
    check_probs(probs, q.bins());
    if (x < q.lo()) return 0.0;
    if (x >= q.hi()) return 1.0;
    double cdf = 0.0;
    for (int k = 0; k < q.bins(); ++k) {
        const double p = probs[static_cast<std::size_t>(k)];
        if (x < q.edges()[static_cast<std::size_t>(k) + 1]) {
            return cdf + p * (x - q.edges()[static_cast<std::size_t>(k)]) / q.width(k);
        }
        cdf += p;
    }
    return 1.0;
}

double predictive_quantile(const std::vector<double>& probs, const OrdinalQuantizer& q,
                           double level) {
    check_probs(probs, q.bins());
    if (!(level >= 0.0 && level <= 1.0))
        throw ConfigError("quantile level must lie in [0, 1]");
    if (level <= 0.0) return q.lo();
    if (level >= 1.0) return q.hi();
    double cdf = 0.0;
    for (int k = 0; k < q.bins(); ++k) {
        const double p = probs[static_cast<std::size_t>(k)];
        if (p > 0.0 && level <= cdf + p) {
            return q.edges()[static_cast<std::size_t>(k)] + (level - cdf) / p * q.width(k);
        }
        cdf += p;
    }
    return q.hi();  // level ~ 1 beyond accumulated mass (rounding)
}

TrainResult finetune(const Seq2SeqModel& pretrained, const TimeSeries& target,
                     const TrainingConfig& cfg, int forecast_horizon, int stride) {
    cfg.validate();
    if (forecast_horizon <= 0) throw ConfigError("finetune: forecast horizon must be positive");
    if (stride <= 0) throw ConfigError("finetune: stride must be positive");

    const OrdinalQuantizer q =
        build_quantizer(target, pretrained.bins(), forecast_horizon, /*extend=*/true);
    const std::vector<int> indices = q.encode(target.values);
    const std::vector<OrdinalWindow> windows =
        make_windows(indices, cfg.encoder_len, cfg.decoder_len, stride);
    const WindowSplit split = split_windows(windows, 0.2);

    Seq2SeqModel model = pretrained;
    model.quantizer = q;
    model.hyper = cfg;
    return train(model, split.train, cfg, split.validation);
}

}  // namespace ordcast
