#include <doctest.h>

#include <cmath>

#include "ordcast/dataset.hpp"
#include "ordcast/errors.hpp"
#include "ordcast/forecast.hpp"
#include "ordcast/quantizer.hpp"
#include "support.hpp"

using namespace ordcast;

namespace {

Seq2SeqModel small_model(int m, int n_h, double dropout, std::uint64_t seed) {
    TrainingConfig cfg;
    cfg.n_h = n_h;
    cfg.dropout_rate = dropout;
    cfg.encoder_len = 4;
    cfg.decoder_len = 2;
    cfg.seed = seed;
    OrdinalQuantizer q(m, 0.0, 1.0);
    return init_seq2seq(q, cfg);
}

}  // namespace

TEST_CASE("predictive mean, cdf and quantile of a categorical row") {
    OrdinalQuantizer q(4, 0.0, 1.0);
    std::vector<double> p = {0.1, 0.2, 0.3, 0.4};

    CHECK(predictive_mean(p, q) == doctest::Approx(0.625).epsilon(1e-12));

    CHECK(predictive_cdf(p, q, -1.0) == 0.0);
    CHECK(predictive_cdf(p, q, 0.0) == 0.0);
    CHECK(predictive_cdf(p, q, 0.25) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(predictive_cdf(p, q, 0.5) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(predictive_cdf(p, q, 0.6) == doctest::Approx(0.42).epsilon(1e-12));
    CHECK(predictive_cdf(p, q, 1.0) == 1.0);
    CHECK(predictive_cdf(p, q, 7.0) == 1.0);

    CHECK(predictive_quantile(p, q, 0.0) == doctest::Approx(0.0));
    CHECK(predictive_quantile(p, q, 1.0) == doctest::Approx(1.0));
    CHECK(predictive_quantile(p, q, 0.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(predictive_quantile(p, q, 0.05) == doctest::Approx(0.125).epsilon(1e-12));

    for (double level : {0.05, 0.2, 0.45, 0.8, 0.95}) {
        CHECK(predictive_cdf(p, q, predictive_quantile(p, q, level)) ==
              doctest::Approx(level).epsilon(1e-10));
    }

    // mass-free bins are skipped by the inverse CDF
    std::vector<double> spike = {0.0, 1.0, 0.0, 0.0};
    CHECK(predictive_quantile(spike, q, 0.5) == doctest::Approx(0.375).epsilon(1e-12));

    CHECK_THROWS_AS(predictive_quantile(p, q, -0.1), ConfigError);
    CHECK_THROWS_AS(predictive_quantile(p, q, 1.1), ConfigError);
}

TEST_CASE("forecast options validate") {
    ForecastOptions opts;
    CHECK_NOTHROW(opts.validate());
    opts.horizon = 0;
    CHECK_THROWS_AS(opts.validate(), ConfigError);
    opts = ForecastOptions{};
    opts.n_samples = 0;
    CHECK_THROWS_AS(opts.validate(), ConfigError);
}

TEST_CASE("sample_trajectory emits one categorical per step") {
    Seq2SeqModel model = small_model(5, 6, 0.2, 3);
    Rng rng(9);
    Eigen::MatrixXd tr = sample_trajectory(model, {0, 1, 2, 3}, 6, false, rng);
    REQUIRE(tr.rows() == 6);
    REQUIRE(tr.cols() == 5);
    for (int t = 0; t < 6; ++t)
        CHECK(tr.row(t).sum() == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(sample_trajectory(model, {}, 3, false, rng), DataError);
    CHECK_THROWS_AS(sample_trajectory(model, {9}, 3, false, rng), DataError);
}

TEST_CASE("forecast is deterministic in the seed and leaves the model alone") {
    Seq2SeqModel model = small_model(5, 6, 0.3, 3);
    const std::uint64_t before = weight_checksum(model);

    ForecastOptions opts;
    opts.horizon = 5;
    opts.n_samples = 16;
    opts.seed = 21;

    Forecast a = forecast(model, model.quantizer, {0, 1, 2, 3}, opts);
    Forecast b = forecast(model, model.quantizer, {0, 1, 2, 3}, opts);
    CHECK(a.step_probs == b.step_probs);
    CHECK(weight_checksum(model) == before);

    opts.seed = 22;
    Forecast c = forecast(model, model.quantizer, {0, 1, 2, 3}, opts);
    CHECK(a.step_probs != c.step_probs);

    CHECK(a.horizon() == 5);
    CHECK(a.step(0).size() == 5);
    CHECK_THROWS_AS(a.step(5), ConfigError);
}

TEST_CASE("with dropout off every trajectory is the same") {
    Seq2SeqModel model = small_model(5, 6, 0.0, 4);
    ForecastOptions one;
    one.horizon = 4;
    one.n_samples = 1;
    one.seed = 1;
    one.argmax_feedback = true;  // closes the only other stochastic path
    ForecastOptions many = one;
    many.n_samples = 9;
    many.seed = 77;

    Forecast a = forecast(model, model.quantizer, {0, 1, 2, 3}, one);
    Forecast b = forecast(model, model.quantizer, {0, 1, 2, 3}, many);
    CHECK((a.step_probs - b.step_probs).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("the evaluation quantizer must share the model's bin count") {
    Seq2SeqModel model = small_model(5, 6, 0.2, 3);
    OrdinalQuantizer other(7, 0.0, 1.0);
    ForecastOptions opts;
    CHECK_THROWS_AS(forecast(model, other, {0, 1}, opts), ConfigError);
}

TEST_CASE("fine-tuning never ends up worse than its starting point") {
    TrainingConfig cfg;
    cfg.n_h = 8;
    cfg.dropout_rate = 0.2;
    cfg.l2_lambda = 1e-6;
    cfg.max_epochs = 6;
    cfg.patience = 6;
    cfg.learning_rate = 5e-3;
    cfg.batch_size = 8;
    cfg.encoder_len = 8;
    cfg.decoder_len = 4;
    cfg.seed = 31;

    const int m = 12;
    OrdinalQuantizer nominal(m, 0.0, 1.0, "nominal");
    Seq2SeqModel pretrained = init_seq2seq(nominal, cfg);

    TimeSeries target;
    target.id = "t";
    for (int i = 0; i < 120; ++i)
        target.values.push_back(std::sin(0.3 * i) + 0.01 * ((i * 37) % 11));

    const int horizon = 5;
    const int stride = 2;
    TrainResult r = finetune(pretrained, target, cfg, horizon, stride);

    // replicate the internal windowing to price the starting point
    OrdinalQuantizer q = build_quantizer(target, m, horizon, true);
    OrdinalSequence seq = encode_series(q, target);
    auto windows = make_windows(seq.indices, cfg.encoder_len, cfg.decoder_len, stride);
    WindowSplit split = split_windows(windows, 0.2);
    Seq2SeqModel start = pretrained;
    start.quantizer = q;
    const double initial = teacher_forced_loss(start, split.validation, nullptr, 0.0);

    CHECK(r.history.best_val_loss <= initial + 1e-12);
    CHECK(r.model.quantizer.id() == "t");
    CHECK(r.model.bins() == m);
    CHECK(teacher_forced_loss(r.model, split.validation, nullptr, 0.0) ==
          doctest::Approx(r.history.best_val_loss).epsilon(1e-12));

    CHECK_THROWS_AS(finetune(pretrained, target, cfg, 0, stride), ConfigError);
    CHECK_THROWS_AS(finetune(pretrained, target, cfg, horizon, 0), ConfigError);
}
