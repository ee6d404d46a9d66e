#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "ordcast/baselines.hpp"
#include "ordcast/embedding.hpp"
#include "ordcast/forecast.hpp"
#include "ordcast/quantizer.hpp"
#include "ordcast/rng.hpp"
#include "ordcast/seq2seq.hpp"

using namespace ordcast;

namespace {

Seq2SeqModel make_model(int n_h, int m) {
    TrainingConfig cfg;
    cfg.n_h = n_h;
    cfg.seed = 17;
    return init_seq2seq(OrdinalQuantizer(m, 0.0, 1.0), cfg);
}

std::vector<int> cycle_bins(int m, int length) {
    std::vector<int> bins(length);
    for (int i = 0; i < length; ++i) bins[i] = (i * 7) % m;
    return bins;
}

void bm_encoder_forward(benchmark::State& state) {
    const int n_h = static_cast<int>(state.range(0));
    const Seq2SeqModel model = make_model(n_h, 150);
    const OrdinalSequence context{cycle_bins(150, 50), ""};
    for (auto _ : state) {
        LstmState s = encoder_forward(model, context);
        benchmark::DoNotOptimize(s.h);
    }
    state.SetItemsProcessed(state.iterations() * 50);
}
BENCHMARK(bm_encoder_forward)->Arg(64)->Arg(128)->Arg(256);

void bm_loss_and_grad(benchmark::State& state) {
    const int n_h = static_cast<int>(state.range(0));
    const Seq2SeqModel model = make_model(n_h, 150);
    std::vector<OrdinalWindow> windows(8);
    for (int i = 0; i < 8; ++i) {
        auto bins = cycle_bins(150, 75);
        windows[i].context.assign(bins.begin(), bins.begin() + 50);
        windows[i].target.assign(bins.begin() + 50, bins.end());
    }
    Seq2SeqGradients grads = Seq2SeqGradients::zeros_like(model);
    for (auto _ : state) {
        const double loss = teacher_forced_loss_and_grad(model, windows, nullptr, 1e-6, grads);
        benchmark::DoNotOptimize(loss);
    }
    state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(bm_loss_and_grad)->Arg(64)->Arg(128);

void bm_sample_trajectory(benchmark::State& state) {
    const Seq2SeqModel model = make_model(64, 150);
    const auto context = cycle_bins(150, 50);
    Rng rng(99);
    for (auto _ : state) {
        Eigen::MatrixXd probs = sample_trajectory(model, context, 15, false, rng);
        benchmark::DoNotOptimize(probs);
    }
    state.SetItemsProcessed(state.iterations() * 15);
}
BENCHMARK(bm_sample_trajectory);

void bm_quantizer_encode(benchmark::State& state) {
    const OrdinalQuantizer q(150, -3.0, 3.0);
    std::vector<double> values(10000);
    Rng rng(3);
    for (auto& v : values) v = rng.uniform(-3.5, 3.5);
    for (auto _ : state) {
        int acc = 0;
        for (double v : values) acc += q.encode(v);
        benchmark::DoNotOptimize(acc);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int>(values.size()));
}
BENCHMARK(bm_quantizer_encode);

void bm_ward_cluster(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(7);
    std::vector<EmbeddingVector> vecs(n);
    for (int i = 0; i < n; ++i) {
        vecs[i].vector.resize(64);
        for (int d = 0; d < 64; ++d) vecs[i].vector(d) = rng.normal();
        vecs[i].source_id = "b";
        vecs[i].offset = i;
    }
    for (auto _ : state) {
        ClusterModel model = ward_cluster(vecs, 10);
        benchmark::DoNotOptimize(model.assignments);
    }
}
BENCHMARK(bm_ward_cluster)->Arg(100)->Arg(200);

void bm_fit_ar(benchmark::State& state) {
    Rng rng(11);
    std::vector<double> y{0.3, -0.1};
    for (int i = 2; i < 1000; ++i)
        y.push_back(0.05 + 0.6 * y[i - 1] - 0.25 * y[i - 2] + 0.1 * rng.normal());
    for (auto _ : state) {
        ArModel m = fit_ar(y, 4);
        benchmark::DoNotOptimize(m.coeffs);
    }
}
BENCHMARK(bm_fit_ar);

void bm_gp_log_marginal(benchmark::State& state) {
    const int n = 50;
    Eigen::VectorXd x(n), y(n);
    Rng rng(13);
    for (int i = 0; i < n; ++i) {
        x(i) = i / double(n - 1);
        y(i) = std::sin(6.0 * x(i)) + 0.05 * rng.normal();
    }
    GpHypers h;
    h.log_signal = 0.1;
    h.log_length = -0.7;
    h.log_noise = -2.0;
    Eigen::VectorXd grad;
    for (auto _ : state) {
        const double lml = gp_log_marginal(GpKernel::Matern52, x, y, h, &grad);
        benchmark::DoNotOptimize(lml);
        benchmark::DoNotOptimize(grad);
    }
}
BENCHMARK(bm_gp_log_marginal);

}  // namespace

BENCHMARK_MAIN();
