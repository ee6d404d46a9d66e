#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ordcast/quantizer.hpp"
#include "ordcast/rng.hpp"

namespace ordcast {

struct TrainingConfig {
    int n_h = 64;                // hidden width, shared by encoder and decoder
    double dropout_rate = 0.25;  // in [0, 1)
    double l2_lambda = 1e-6;     // applied to weight matrices, not biases
    int max_epochs = 50;
    int patience = 8;            // early-stopping epochs without improvement
    double learning_rate = 1e-3;
    int batch_size = 32;
    int encoder_len = 50;        // context length P used when windowing
    int decoder_len = 25;
    std::uint64_t seed = 1;

    void validate() const;  // throws ConfigError on nonsense values
};

// One LSTM layer. Gate blocks are stacked [input; forget; cell; output],
// each block of height n_h.
struct LstmLayerParams {
    Eigen::MatrixXd input_weights;      // (4*n_h) x input_dim
    Eigen::MatrixXd recurrent_weights;  // (4*n_h) x n_h
    Eigen::VectorXd biases;             // 4*n_h

    Eigen::Index hidden_size() const { return recurrent_weights.cols(); }
    Eigen::Index input_size() const { return input_weights.cols(); }
};

// Named view over one parameter tensor. Storage is column-major (Eigen
// default); at(r, c) gives logical element access, used wherever a
// storage-independent row-major order is required (checkpoints, checksums).
struct TensorRef {
    std::string name;
    double* data = nullptr;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;

    Eigen::Index size() const { return rows * cols; }
    double& at(Eigen::Index r, Eigen::Index c) { return data[c * rows + r]; }
    double at(Eigen::Index r, Eigen::Index c) const { return data[c * rows + r]; }
};

// LSTM encoder-decoder over 1-of-M inputs with a linear projection to bin
// logits. Immutable once trained; concurrent forward passes on a shared
// model are safe.
struct Seq2SeqModel {
    LstmLayerParams encoder;
    LstmLayerParams decoder;
    Eigen::MatrixXd projection;       // m x n_h
    Eigen::VectorXd projection_bias;  // m
    OrdinalQuantizer quantizer;
    TrainingConfig hyper;

    explicit Seq2SeqModel(OrdinalQuantizer q) : quantizer(std::move(q)) {}

    Eigen::Index hidden_size() const { return decoder.hidden_size(); }
    int bins() const { return quantizer.bins(); }

    std::vector<TensorRef> tensor_refs();
    std::vector<TensorRef> tensor_refs() const;
};

// Seeded initialization: uniform(-s, s) with s = 1/sqrt(n_h) for weights,
// zero biases except the forget gate bias at 1.
Seq2SeqModel init_seq2seq(const OrdinalQuantizer& quantizer, const TrainingConfig& cfg);

// Variational dropout: one mask per sequence on the non-recurrent inputs of
// both layers plus the pre-projection decoder output. Entries are 0 or
// 1/(1-rate) (inverted scaling), so an all-ones mask is the identity.
struct DropoutMasks {
    Eigen::VectorXd encoder_input;   // length m
    Eigen::VectorXd decoder_input;   // length m
    Eigen::VectorXd decoder_output;  // length n_h
};

DropoutMasks sample_dropout_masks(int m, int n_h, double rate, Rng& rng);
DropoutMasks identity_masks(int m, int n_h);

struct LstmState {
    Eigen::VectorXd h;
    Eigen::VectorXd c;
};

// Single LSTM step on a dense input vector. dropout_mask, when given,
// multiplies the input contribution elementwise.
LstmState lstm_cell_forward(const Eigen::VectorXd& x, const Eigen::VectorXd& h,
                            const Eigen::VectorXd& c, const LstmLayerParams& p,
                            const Eigen::VectorXd* dropout_mask = nullptr);

// Scans the context left to right from a zero initial state and returns the
// final (h, c), i.e. the decoder's initial state.
LstmState encoder_forward(const Seq2SeqModel& model, const OrdinalSequence& context,
                          const DropoutMasks* masks = nullptr);

struct DecoderStepResult {
    Eigen::VectorXd h;
    Eigen::VectorXd c;
    std::vector<double> probs;  // softmax over the m bins
};

// One decoder step: LSTM on the one-hot of x_prev_bin, then projection and
// softmax.
DecoderStepResult decoder_step(const Seq2SeqModel& model, const Eigen::VectorXd& h,
                               const Eigen::VectorXd& c, int x_prev_bin,
                               const DropoutMasks* masks = nullptr);

// A training pair: the encoder consumes `context`, the decoder is teacher-
// forced through `target`.
struct OrdinalWindow {
    std::vector<int> context;
    std::vector<int> target;
};

// Gradient buffers shaped like the model parameters.
struct Seq2SeqGradients {
    Eigen::MatrixXd enc_w, enc_u;
    Eigen::VectorXd enc_b;
    Eigen::MatrixXd dec_w, dec_u;
    Eigen::VectorXd dec_b;
    Eigen::MatrixXd proj_w;
    Eigen::VectorXd proj_b;

    static Seq2SeqGradients zeros_like(const Seq2SeqModel& model);
    std::vector<TensorRef> tensor_refs();
    void set_zero();
    double squared_norm() const;
};

// Mean teacher-forced cross-entropy over all decoder steps of the window set,
// plus l2_lambda * (sum of squared weight-matrix entries). `masks` supplies
// one mask set per window; pass nullptr for dropout off.
double teacher_forced_loss(const Seq2SeqModel& model,
                           const std::vector<OrdinalWindow>& windows,
                           const std::vector<DropoutMasks>* masks, double l2_lambda);

// Same loss, with the full BPTT gradient accumulated into `grads`.
double teacher_forced_loss_and_grad(const Seq2SeqModel& model,
                                    const std::vector<OrdinalWindow>& windows,
                                    const std::vector<DropoutMasks>* masks,
                                    double l2_lambda, Seq2SeqGradients& grads);

struct LossHistory {
    std::vector<double> train_loss;  // per epoch, cross-entropy + L2
    std::vector<double> val_loss;    // per epoch, cross-entropy, dropout off
    std::vector<int> clip_events;    // per epoch, minibatches hit by the norm clip
    int best_epoch = -1;             // -1: the initial parameters were never beaten
    double best_val_loss = std::numeric_limits<double>::infinity();
    int epochs_run = 0;
};

struct TrainResult {
    Seq2SeqModel model;
    LossHistory history;
};

// Adam + BPTT training with teacher forcing, per-window dropout masks
// resampled each epoch, global-norm gradient clipping at 5.0 and early
// stopping on validation cross-entropy. Returns the parameters that achieved
// the best validation loss. Deterministic for a fixed cfg.seed.
TrainResult train(const Seq2SeqModel& init, const std::vector<OrdinalWindow>& train_windows,
                  const TrainingConfig& cfg, const std::vector<OrdinalWindow>& val_windows);

// FNV-1a over all parameter tensors in logical row-major order.
std::uint64_t weight_checksum(const Seq2SeqModel& model);

}  // namespace ordcast
