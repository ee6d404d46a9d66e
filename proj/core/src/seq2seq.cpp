#include "ordcast/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "ordcast/errors.hpp"

namespace ordcast {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Splits the stacked pre-activation into gate activations.
// Order of the blocks: input, forget, cell candidate, output.
struct Gates {
    Eigen::VectorXd i, f, g, o;
};

Gates activate_gates(const Eigen::VectorXd& preact, Eigen::Index n) {
    Gates gt;
    gt.i = preact.segment(0, n).unaryExpr([](double v) { return sigmoid(v); });
    gt.f = preact.segment(n, n).unaryExpr([](double v) { return sigmoid(v); });
    gt.g = preact.segment(2 * n, n).array().tanh();
    gt.o = preact.segment(3 * n, n).unaryExpr([](double v) { return sigmoid(v); });
    return gt;
}

// Per-step forward record kept for backpropagation through time.
struct StepTrace {
    int x_bin = -1;
    Gates gates;
    Eigen::VectorXd c;
    Eigen::VectorXd tanh_c;
    Eigen::VectorXd h;
};

// One step on a one-hot input; the input contribution is just a scaled column
// of the input weight matrix.
StepTrace onehot_step(const LstmLayerParams& p, int x_bin, const Eigen::VectorXd& h_prev,
                      const Eigen::VectorXd& c_prev, const Eigen::VectorXd* input_mask) {
    const Eigen::Index n = p.hidden_size();
    const double scale = input_mask ? (*input_mask)(x_bin) : 1.0;
    Eigen::VectorXd preact = p.input_weights.col(x_bin) * scale;
    preact.noalias() += p.recurrent_weights * h_prev;
    preact += p.biases;

    StepTrace st;
    st.x_bin = x_bin;
    st.gates = activate_gates(preact, n);
    st.c = st.gates.f.cwiseProduct(c_prev) + st.gates.i.cwiseProduct(st.gates.g);
    st.tanh_c = st.c.array().tanh();
    st.h = st.gates.o.cwiseProduct(st.tanh_c);
    return st;
}

// Backward through one cell step. dh/dc are the gradients flowing into h_t and
// c_t; on return they hold the gradients for h_{t-1} and c_{t-1}.
void cell_backward(const LstmLayerParams& p, const StepTrace& st,
                   const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev,
                   double input_mask_scale, Eigen::VectorXd& dh, Eigen::VectorXd& dc,
                   Eigen::MatrixXd& dW, Eigen::MatrixXd& dU, Eigen::VectorXd& db) {
    const Eigen::Index n = p.hidden_size();
    const Gates& gt = st.gates;

    Eigen::VectorXd da(4 * n);
    const Eigen::VectorXd do_ = dh.cwiseProduct(st.tanh_c);
    dc += dh.cwiseProduct(gt.o).cwiseProduct(
        (1.0 - st.tanh_c.array().square()).matrix());

    const Eigen::VectorXd di = dc.cwiseProduct(gt.g);
    const Eigen::VectorXd df = dc.cwiseProduct(c_prev);
    const Eigen::VectorXd dg = dc.cwiseProduct(gt.i);

    da.segment(0, n) = di.cwiseProduct(gt.i).cwiseProduct((1.0 - gt.i.array()).matrix());
    da.segment(n, n) = df.cwiseProduct(gt.f).cwiseProduct((1.0 - gt.f.array()).matrix());
    da.segment(2 * n, n) = dg.cwiseProduct((1.0 - gt.g.array().square()).matrix());
    da.segment(3 * n, n) = do_.cwiseProduct(gt.o).cwiseProduct((1.0 - gt.o.array()).matrix());

    dW.col(st.x_bin) += da * input_mask_scale;
    dU.noalias() += da * h_prev.transpose();
    db += da;

    dc = dc.cwiseProduct(gt.f);
    dh.noalias() = p.recurrent_weights.transpose() * da;
}

void check_window(const OrdinalWindow& w, int m) {
    if (w.context.empty()) throw std::invalid_argument("window: empty context");
    for (int k : w.context) {
        if (k < 0 || k >= m) throw std::invalid_argument("window: context bin out of range");
    }
    for (int k : w.target) {
        if (k < 0 || k >= m) throw std::invalid_argument("window: target bin out of range");
    }
}

double l2_weight_sum(const Seq2SeqModel& model) {
    return model.encoder.input_weights.squaredNorm() +
           model.encoder.recurrent_weights.squaredNorm() +
           model.decoder.input_weights.squaredNorm() +
           model.decoder.recurrent_weights.squaredNorm() + model.projection.squaredNorm();
}

// Teacher-forced forward over one window; optionally accumulates the BPTT
// gradient scaled by step_weight. Returns the summed (unweighted) cross-
// entropy over the window's decoder steps.
double window_pass(const Seq2SeqModel& model, const OrdinalWindow& w,
                   const DropoutMasks* masks, double step_weight,
                   Seq2SeqGradients* grads) {
    const Eigen::Index n = model.hidden_size();
    const int m = model.bins();
    check_window(w, m);
    if (w.target.empty()) throw std::invalid_argument("window: empty target");

    const Eigen::VectorXd* enc_mask = masks ? &masks->encoder_input : nullptr;
    const Eigen::VectorXd* dec_mask = masks ? &masks->decoder_input : nullptr;

    // encoder scan
    const std::size_t P = w.context.size();
    std::vector<StepTrace> enc_trace;
    enc_trace.reserve(P);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    for (std::size_t t = 0; t < P; ++t) {
        enc_trace.push_back(onehot_step(model.encoder, w.context[t], h, c, enc_mask));
        h = enc_trace.back().h;
        c = enc_trace.back().c;
    }
    const Eigen::VectorXd enc_h_final = h;
    const Eigen::VectorXd enc_c_final = c;

    // decoder: teacher forcing, first input is the last context symbol
    const std::size_t L = w.target.size();
    std::vector<StepTrace> dec_trace;
    dec_trace.reserve(L);
    std::vector<Eigen::VectorXd> masked_h(L);
    std::vector<Eigen::VectorXd> probs(L);
    double ce_sum = 0.0;
    for (std::size_t t = 0; t < L; ++t) {
        const int x_in = (t == 0) ? w.context.back() : w.target[t - 1];
        dec_trace.push_back(onehot_step(model.decoder, x_in, h, c, dec_mask));
        h = dec_trace.back().h;
        c = dec_trace.back().c;

        masked_h[t] = masks ? h.cwiseProduct(masks->decoder_output) : h;
        Eigen::VectorXd logits = model.projection_bias;
        logits.noalias() += model.projection * masked_h[t];
        const double lmax = logits.maxCoeff();
        const double lse = lmax + std::log((logits.array() - lmax).exp().sum());
        if (!std::isfinite(lse))
            throw NumericalError("seq2seq forward diverged (non-finite logits)");
        ce_sum += lse - logits(w.target[t]);
        probs[t] = (logits.array() - lse).exp();
    }

    if (!grads) return ce_sum;

    // backward
    Eigen::VectorXd dh = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd dc = Eigen::VectorXd::Zero(n);
    for (std::size_t ti = L; ti-- > 0;) {
        Eigen::VectorXd dlogits = probs[ti] * step_weight;
        dlogits(w.target[ti]) -= step_weight;
        grads->proj_w.noalias() += dlogits * masked_h[ti].transpose();
        grads->proj_b += dlogits;

        Eigen::VectorXd dhd = model.projection.transpose() * dlogits;
        if (masks) dhd = dhd.cwiseProduct(masks->decoder_output);
        dh += dhd;

        const Eigen::VectorXd& h_prev = (ti == 0) ? enc_h_final : dec_trace[ti - 1].h;
        const Eigen::VectorXd& c_prev = (ti == 0) ? enc_c_final : dec_trace[ti - 1].c;
        const double mask_scale = dec_mask ? (*dec_mask)(dec_trace[ti].x_bin) : 1.0;
        cell_backward(model.decoder, dec_trace[ti], h_prev, c_prev, mask_scale, dh, dc,
                      grads->dec_w, grads->dec_u, grads->dec_b);
    }

    // state gradients continue into the encoder's final step
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
    for (std::size_t ti = P; ti-- > 0;) {
        const Eigen::VectorXd& h_prev = (ti == 0) ? zero : enc_trace[ti - 1].h;
        const Eigen::VectorXd& c_prev = (ti == 0) ? zero : enc_trace[ti - 1].c;
        const double mask_scale = enc_mask ? (*enc_mask)(enc_trace[ti].x_bin) : 1.0;
        cell_backward(model.encoder, enc_trace[ti], h_prev, c_prev, mask_scale, dh, dc,
                      grads->enc_w, grads->enc_u, grads->enc_b);
    }
    return ce_sum;
}

void add_l2_gradient(const Seq2SeqModel& model, double l2_lambda, Seq2SeqGradients& g) {
    if (l2_lambda == 0.0) return;
    const double s = 2.0 * l2_lambda;
    g.enc_w += s * model.encoder.input_weights;
    g.enc_u += s * model.encoder.recurrent_weights;
    g.dec_w += s * model.decoder.input_weights;
    g.dec_u += s * model.decoder.recurrent_weights;
    g.proj_w += s * model.projection;
}

}  // namespace

void TrainingConfig::validate() const {
    if (n_h <= 0) throw ConfigError("training: n_h must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("training: dropout_rate must lie in [0, 1)");
    if (l2_lambda < 0.0) throw ConfigError("training: l2_lambda must be >= 0");
    if (max_epochs < 0) throw ConfigError("training: max_epochs must be >= 0");
    if (patience <= 0) throw ConfigError("training: patience must be positive");
    if (learning_rate <= 0.0) throw ConfigError("training: learning_rate must be positive");
    if (batch_size <= 0) throw ConfigError("training: batch_size must be positive");
    if (encoder_len <= 0 || decoder_len <= 0)
        throw ConfigError("training: window lengths must be positive");
}

std::vector<TensorRef> Seq2SeqModel::tensor_refs() {
    return {
        {"encoder.input_weights", encoder.input_weights.data(), encoder.input_weights.rows(), encoder.input_weights.cols()},
        {"encoder.recurrent_weights", encoder.recurrent_weights.data(), encoder.recurrent_weights.rows(), encoder.recurrent_weights.cols()},
        {"encoder.biases", encoder.biases.data(), encoder.biases.size(), 1},
        {"decoder.input_weights", decoder.input_weights.data(), decoder.input_weights.rows(), decoder.input_weights.cols()},
        {"decoder.recurrent_weights", decoder.recurrent_weights.data(), decoder.recurrent_weights.rows(), decoder.recurrent_weights.cols()},
        {"decoder.biases", decoder.biases.data(), decoder.biases.size(), 1},
        {"projection.weights", projection.data(), projection.rows(), projection.cols()},
        {"projection.bias", projection_bias.data(), projection_bias.size(), 1},
    };
}

std::vector<TensorRef> Seq2SeqModel::tensor_refs() const {
    return const_cast<Seq2SeqModel*>(this)->tensor_refs();
}

Seq2SeqModel init_seq2seq(const OrdinalQuantizer& quantizer, const TrainingConfig& cfg) {
    cfg.validate();
    const int m = quantizer.bins();
    const int n = cfg.n_h;

    Seq2SeqModel model(quantizer);
    model.hyper = cfg;
    model.encoder.input_weights.resize(4 * n, m);
    model.encoder.recurrent_weights.resize(4 * n, n);
    model.encoder.biases = Eigen::VectorXd::Zero(4 * n);
    model.decoder.input_weights.resize(4 * n, m);
    model.decoder.recurrent_weights.resize(4 * n, n);
    model.decoder.biases = Eigen::VectorXd::Zero(4 * n);
    model.projection.resize(m, n);
    model.projection_bias = Eigen::VectorXd::Zero(m);

    Rng rng(derive_seed(cfg.seed, "init"));
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (Eigen::MatrixXd* w : {&model.encoder.input_weights, &model.encoder.recurrent_weights,
                               &model.decoder.input_weights, &model.decoder.recurrent_weights,
                               &model.projection}) {
        for (Eigen::Index idx = 0; idx < w->size(); ++idx) {
            w->data()[idx] = rng.uniform(-s, s);
        }
    }
    // forget-gate bias at 1 helps early gradient flow
    model.encoder.biases.segment(n, n).setOnes();
    model.decoder.biases.segment(n, n).setOnes();
    return model;
}

DropoutMasks sample_dropout_masks(int m, int n_h, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("dropout rate must lie in [0, 1)");
    const double keep = 1.0 - rate;
    auto fill = [&](Eigen::Index len) {
        Eigen::VectorXd v(len);
        for (Eigen::Index i = 0; i < len; ++i) {
            v(i) = (rate > 0.0 && rng.uniform() < rate) ? 0.0 : 1.0 / keep;
        }
        return v;
    };
    return DropoutMasks{fill(m), fill(m), fill(n_h)};
}

DropoutMasks identity_masks(int m, int n_h) {
    return DropoutMasks{Eigen::VectorXd::Ones(m), Eigen::VectorXd::Ones(m),
                        Eigen::VectorXd::Ones(n_h)};
}

LstmState lstm_cell_forward(const Eigen::VectorXd& x, const Eigen::VectorXd& h,
                            const Eigen::VectorXd& c, const LstmLayerParams& p,
                            const Eigen::VectorXd* dropout_mask) {
    const Eigen::Index n = p.hidden_size();
    if (x.size() != p.input_size() || h.size() != n || c.size() != n ||
        p.biases.size() != 4 * n || p.input_weights.rows() != 4 * n)
        throw std::invalid_argument("lstm_cell_forward: shape mismatch");
    if (dropout_mask && dropout_mask->size() != x.size())
        throw std::invalid_argument("lstm_cell_forward: mask shape mismatch");

    Eigen::VectorXd preact =
        dropout_mask ? (p.input_weights * x.cwiseProduct(*dropout_mask)).eval()
                     : (p.input_weights * x).eval();
    preact.noalias() += p.recurrent_weights * h;
    preact += p.biases;

    const Gates gt = activate_gates(preact, n);
    LstmState out;
    out.c = gt.f.cwiseProduct(c) + gt.i.cwiseProduct(gt.g);
    out.h = gt.o.cwiseProduct(out.c.array().tanh().matrix());
    if (!out.h.allFinite() || !out.c.allFinite())
        throw NumericalError("lstm_cell_forward: non-finite state");
    return out;
}

LstmState encoder_forward(const Seq2SeqModel& model, const OrdinalSequence& context,
                          const DropoutMasks* masks) {
    if (context.indices.empty()) throw std::invalid_argument("encoder_forward: empty context");
    const int m = model.bins();
    const Eigen::Index n = model.hidden_size();
    const Eigen::VectorXd* mask = masks ? &masks->encoder_input : nullptr;

    LstmState st{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    for (int k : context.indices) {
        if (k < 0 || k >= m) throw std::invalid_argument("encoder_forward: bin out of range");
        const StepTrace tr = onehot_step(model.encoder, k, st.h, st.c, mask);
        st.h = tr.h;
        st.c = tr.c;
    }
    return st;
}

DecoderStepResult decoder_step(const Seq2SeqModel& model, const Eigen::VectorXd& h,
                               const Eigen::VectorXd& c, int x_prev_bin,
                               const DropoutMasks* masks) {
    const int m = model.bins();
    if (x_prev_bin < 0 || x_prev_bin >= m)
        throw std::invalid_argument("decoder_step: bin out of range");
    const StepTrace tr = onehot_step(model.decoder, x_prev_bin, h, c,
                                     masks ? &masks->decoder_input : nullptr);
    const Eigen::VectorXd hd = masks ? tr.h.cwiseProduct(masks->decoder_output) : tr.h;
    Eigen::VectorXd logits = model.projection_bias;
    logits.noalias() += model.projection * hd;

    const double lmax = logits.maxCoeff();
    if (!std::isfinite(lmax)) throw NumericalError("decoder_step: non-finite logits");
    Eigen::VectorXd ex = (logits.array() - lmax).exp();
    ex /= ex.sum();

    DecoderStepResult out;
    out.h = tr.h;
    out.c = tr.c;
    out.probs.assign(ex.data(), ex.data() + m);
    return out;
}

Seq2SeqGradients Seq2SeqGradients::zeros_like(const Seq2SeqModel& model) {
    Seq2SeqGradients g;
    g.enc_w = Eigen::MatrixXd::Zero(model.encoder.input_weights.rows(),
                                    model.encoder.input_weights.cols());
    g.enc_u = Eigen::MatrixXd::Zero(model.encoder.recurrent_weights.rows(),
                                    model.encoder.recurrent_weights.cols());
    g.enc_b = Eigen::VectorXd::Zero(model.encoder.biases.size());
    g.dec_w = Eigen::MatrixXd::Zero(model.decoder.input_weights.rows(),
                                    model.decoder.input_weights.cols());
    g.dec_u = Eigen::MatrixXd::Zero(model.decoder.recurrent_weights.rows(),
                                    model.decoder.recurrent_weights.cols());
    g.dec_b = Eigen::VectorXd::Zero(model.decoder.biases.size());
    g.proj_w = Eigen::MatrixXd::Zero(model.projection.rows(), model.projection.cols());
    g.proj_b = Eigen::VectorXd::Zero(model.projection_bias.size());
    return g;
}

std::vector<TensorRef> Seq2SeqGradients::tensor_refs() {
    return {
        {"encoder.input_weights", enc_w.data(), enc_w.rows(), enc_w.cols()},
        {"encoder.recurrent_weights", enc_u.data(), enc_u.rows(), enc_u.cols()},
        {"encoder.biases", enc_b.data(), enc_b.size(), 1},
        {"decoder.input_weights", dec_w.data(), dec_w.rows(), dec_w.cols()},
        {"decoder.recurrent_weights", dec_u.data(), dec_u.rows(), dec_u.cols()},
        {"decoder.biases", dec_b.data(), dec_b.size(), 1},
        {"projection.weights", proj_w.data(), proj_w.rows(), proj_w.cols()},
        {"projection.bias", proj_b.data(), proj_b.size(), 1},
    };
}

void Seq2SeqGradients::set_zero() {
    enc_w.setZero();
    enc_u.setZero();
    enc_b.setZero();
    dec_w.setZero();
    dec_u.setZero();
    dec_b.setZero();
    proj_w.setZero();
    proj_b.setZero();
}

double Seq2SeqGradients::squared_norm() const {
    return enc_w.squaredNorm() + enc_u.squaredNorm() + enc_b.squaredNorm() +
           dec_w.squaredNorm() + dec_u.squaredNorm() + dec_b.squaredNorm() +
           proj_w.squaredNorm() + proj_b.squaredNorm();
}

double teacher_forced_loss(const Seq2SeqModel& model,
                           const std::vector<OrdinalWindow>& windows,
                           const std::vector<DropoutMasks>* masks, double l2_lambda) {
    if (windows.empty()) throw std::invalid_argument("teacher_forced_loss: no windows");
    if (masks && masks->size() != windows.size())
        throw std::invalid_argument("teacher_forced_loss: one mask set per window required");
    double ce = 0.0;
    long steps = 0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        ce += window_pass(model, windows[i], masks ? &(*masks)[i] : nullptr, 0.0, nullptr);
        steps += static_cast<long>(windows[i].target.size());
    }
    return ce / static_cast<double>(steps) + l2_lambda * l2_weight_sum(model);
}

double teacher_forced_loss_and_grad(const Seq2SeqModel& model,
                                    const std::vector<OrdinalWindow>& windows,
                                    const std::vector<DropoutMasks>* masks,
                                    double l2_lambda, Seq2SeqGradients& grads) {
    if (windows.empty()) throw std::invalid_argument("teacher_forced_loss_and_grad: no windows");
    if (masks && masks->size() != windows.size())
        throw std::invalid_argument("teacher_forced_loss_and_grad: one mask set per window required");
    long steps = 0;
    for (const auto& w : windows) steps += static_cast<long>(w.target.size());
    const double step_weight = 1.0 / static_cast<double>(steps);

    double ce = 0.0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        ce += window_pass(model, windows[i], masks ? &(*masks)[i] : nullptr, step_weight,
                          &grads);
    }
    add_l2_gradient(model, l2_lambda, grads);
    return ce * step_weight + l2_lambda * l2_weight_sum(model);
}

namespace {

// One Adam step over aligned (parameter, gradient, moment) tensor lists.
struct AdamState {
    Seq2SeqGradients m, v;
    long t = 0;
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;
};

void adam_update(Seq2SeqModel& model, Seq2SeqGradients& grads, AdamState& st,
                 double lr) {
    ++st.t;
    const double bc1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(st.t));

    auto params = model.tensor_refs();
    auto g = grads.tensor_refs();
    auto mo = st.m.tensor_refs();
    auto ve = st.v.tensor_refs();
    for (std::size_t k = 0; k < params.size(); ++k) {
        double* p = params[k].data;
        const double* gd = g[k].data;
        double* md = mo[k].data;
        double* vd = ve[k].data;
        const Eigen::Index sz = params[k].size();
        for (Eigen::Index i = 0; i < sz; ++i) {
            md[i] = AdamState::kBeta1 * md[i] + (1.0 - AdamState::kBeta1) * gd[i];
            vd[i] = AdamState::kBeta2 * vd[i] + (1.0 - AdamState::kBeta2) * gd[i] * gd[i];
            const double mhat = md[i] / bc1;
            const double vhat = vd[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + AdamState::kEps);
        }
    }
}

}  // namespace

TrainResult train(const Seq2SeqModel& init, const std::vector<OrdinalWindow>& train_windows,
                  const TrainingConfig& cfg, const std::vector<OrdinalWindow>& val_windows) {
    cfg.validate();
    if (train_windows.empty() || val_windows.empty())
        throw std::invalid_argument("train: need at least one training and one validation window");
    const int m = init.bins();
    for (const auto& w : train_windows) check_window(w, m);
    for (const auto& w : val_windows) check_window(w, m);

    constexpr double kClipNorm = 5.0;

    TrainResult result{init, LossHistory{}};
    Seq2SeqModel& model = result.model;
    model.hyper = cfg;
    Seq2SeqModel best = model;

    AdamState adam{Seq2SeqGradients::zeros_like(model), Seq2SeqGradients::zeros_like(model)};
    Seq2SeqGradients grads = Seq2SeqGradients::zeros_like(model);

    Rng shuffle_rng(derive_seed(cfg.seed, "train.shuffle"));
    Rng mask_rng(derive_seed(cfg.seed, "train.dropout"));

    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<DropoutMasks> masks(train_windows.size());

    LossHistory& hist = result.history;
    int since_best = 0;

    // The initial parameters are a candidate: fine-tuning must never return
    // something worse than its starting point on the validation split.
    hist.best_val_loss = teacher_forced_loss(model, val_windows, nullptr, 0.0);
    hist.best_epoch = -1;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        for (auto& mk : masks) {
            mk = sample_dropout_masks(m, cfg.n_h, cfg.dropout_rate, mask_rng);
        }
        shuffle_rng.shuffle(order);

        double epoch_ce = 0.0;
        long epoch_steps = 0;
        int clips = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            long batch_steps = 0;
            for (std::size_t i = start; i < end; ++i) {
                batch_steps += static_cast<long>(train_windows[order[i]].target.size());
            }
            const double step_weight = 1.0 / static_cast<double>(batch_steps);

            grads.set_zero();
            double batch_ce = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t wi = order[i];
                batch_ce += window_pass(model, train_windows[wi], &masks[wi], step_weight,
                                        &grads);
            }
            add_l2_gradient(model, cfg.l2_lambda, grads);

            if (!std::isfinite(batch_ce))
                throw NumericalError("train: loss diverged at epoch " +
                                     std::to_string(epoch));

            const double gnorm = std::sqrt(grads.squared_norm());
            if (gnorm > kClipNorm) {
                const double scale = kClipNorm / gnorm;
                for (auto& tr : grads.tensor_refs()) {
                    for (Eigen::Index i = 0; i < tr.size(); ++i) tr.data[i] *= scale;
                }
                ++clips;
            }
            adam_update(model, grads, adam, cfg.learning_rate);

            epoch_ce += batch_ce;
            epoch_steps += batch_steps;
        }

        const double train_loss = epoch_ce / static_cast<double>(epoch_steps) +
                                  cfg.l2_lambda * l2_weight_sum(model);
        const double val_loss = teacher_forced_loss(model, val_windows, nullptr, 0.0);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch));

        hist.train_loss.push_back(train_loss);
        hist.val_loss.push_back(val_loss);
        hist.clip_events.push_back(clips);
        hist.epochs_run = epoch + 1;

        if (val_loss < hist.best_val_loss) {
            hist.best_val_loss = val_loss;
            hist.best_epoch = epoch;
            best = model;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (since_best >= cfg.patience) break;
    }

    result.model = best;
    return result;
}

std::uint64_t weight_checksum(const Seq2SeqModel& model) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](double v) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& tr : model.tensor_refs()) {
        for (Eigen::Index r = 0; r < tr.rows; ++r) {
            for (Eigen::Index c = 0; c < tr.cols; ++c) mix(tr.at(r, c));
        }
    }
    return h;
}

}  // namespace ordcast
