#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sra/random.hpp"
#include "sra/textproc.hpp"

namespace sra {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// supervision_head value selecting the mean over all heads of the layer.
inline constexpr int kMeanOverHeads = -1;

struct ModelConfig {
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 128;
  int vocab_size = 0;
  int max_len = 64;
  int num_classes = 2;
  double dropout = 0.1;
  int supervision_layer = 1;
  int supervision_head = 0;  // or kMeanOverHeads
  std::uint64_t init_seed = 0;

  // Throws std::invalid_argument naming the violated invariant.
  void validate() const;
  int head_dim() const { return d_model / n_heads; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class LayerSlot : int {
  kLn1Gain,
  kLn1Bias,
  kQueryWeight,
  kQueryBias,
  kKeyWeight,
  kKeyBias,
  kValueWeight,
  kValueBias,
  kOutputWeight,
  kOutputBias,
  kLn2Gain,
  kLn2Bias,
  kFf1Weight,
  kFf1Bias,
  kFf2Weight,
  kFf2Bias,
  kCount
};

/// Every trainable tensor of the encoder, in a fixed declared order. Weights
/// act on row vectors (x * W); biases and layer-norm parameters are 1 x n rows.
/// The classifier weight is C x d_model. The same type doubles as a gradient
/// accumulator.
class Parameters {
public:
  Parameters() = default;
  // All tensors zero-filled with the shapes implied by the config.
  explicit Parameters(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  std::size_t tensor_count() const { return tensors_.size(); }
  Matrix& tensor(std::size_t i) { return tensors_[i]; }
  const Matrix& tensor(std::size_t i) const { return tensors_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  std::size_t scalar_count() const;

  Matrix& token_embedding() { return tensors_[0]; }
  const Matrix& token_embedding() const { return tensors_[0]; }
  Matrix& position_embedding() { return tensors_[1]; }
  const Matrix& position_embedding() const { return tensors_[1]; }
  Matrix& layer(int l, LayerSlot slot) { return tensors_[layer_index(l, slot)]; }
  const Matrix& layer(int l, LayerSlot slot) const { return tensors_[layer_index(l, slot)]; }
  Matrix& final_ln_gain() { return tensors_[tail_index(0)]; }
  const Matrix& final_ln_gain() const { return tensors_[tail_index(0)]; }
  Matrix& final_ln_bias() { return tensors_[tail_index(1)]; }
  const Matrix& final_ln_bias() const { return tensors_[tail_index(1)]; }
  Matrix& classifier_weight() { return tensors_[tail_index(2)]; }
  const Matrix& classifier_weight() const { return tensors_[tail_index(2)]; }
  Matrix& classifier_bias() { return tensors_[tail_index(3)]; }
  const Matrix& classifier_bias() const { return tensors_[tail_index(3)]; }

  void set_zero();
  bool all_finite() const;

  friend bool operator==(const Parameters& a, const Parameters& b);

private:
  std::size_t layer_index(int l, LayerSlot slot) const {
    return 2 + static_cast<std::size_t>(l) * static_cast<std::size_t>(LayerSlot::kCount) +
           static_cast<std::size_t>(slot);
  }
  std::size_t tail_index(int k) const {
    return 2 + static_cast<std::size_t>(config_.n_layers) * static_cast<std::size_t>(LayerSlot::kCount) +
           static_cast<std::size_t>(k);
  }

  ModelConfig config_;
  std::vector<Matrix> tensors_;
  std::vector<std::string> names_;
};

using Gradients = Parameters;

/// Weights uniform in [-1/sqrt(d_model), 1/sqrt(d_model)], biases zero,
/// layer-norm gains one. Deterministic in config.init_seed.
Parameters init_model(const ModelConfig& config);

struct ForwardOutput {
  Vector logits;
  Vector probabilities;
  // attentions[l * n_heads + h] is the L x L row-stochastic matrix of layer l, head h.
  std::vector<Matrix> attentions;
  // Row [CLS] of the supervised layer/head (or the head mean).
  Vector cls_attention;
  // Final (post layer-norm) hidden states, one row per position.
  Matrix hidden;
  int n_heads = 0;

  const Matrix& attention(int l, int h) const {
    return attentions[static_cast<std::size_t>(l * n_heads + h)];
  }
};

struct LayerTape {
  Matrix x_in, ln1_xhat, h1, q, k, v, ctx, attn_drop, x_mid, ln2_xhat, h2, ff_pre, ff_act, ff_drop;
  Vector ln1_rstd, ln2_rstd;
  std::vector<Matrix> attn;
};

/// Everything backward() needs from a forward pass.
struct Tape {
  bool recorded = false;
  std::vector<int> ids;
  Mask padding_mask;
  Matrix emb_drop;
  std::vector<LayerTape> layers;
  Matrix final_xhat;
  Vector final_rstd;
  Vector h_cls;
};

/// Pre-norm encoder forward. PAD keys are excluded from every attention
/// softmax. Dropout is applied only with train_mode, drawing from
/// `dropout_rng`. When `tape` is given the pass is recorded for backward().
/// Throws std::runtime_error on a non-finite activation.
ForwardOutput forward(const Parameters& params, const Encoding& enc, bool train_mode,
                      Rng* dropout_rng = nullptr, Tape* tape = nullptr);

/// Upstream gradient of a scalar loss with respect to the two model outputs
/// that losses read: the logits and the supervised CLS attention row.
struct OutputGradient {
  Vector d_logits;
  Vector d_cls_attention;  // empty means zero
};

/// Reverse-mode gradient of the loss, scaled by `seed`, accumulated into `grads`.
void backward(const Parameters& params, const Tape& tape, const OutputGradient& upstream,
              Gradients& grads, double seed = 1.0);
Gradients backward(const Parameters& params, const Tape& tape, const OutputGradient& upstream,
                   double seed = 1.0);

// Index of the largest entry; the lowest index wins ties.
int argmax(const Vector& values);

struct Prediction {
  int label = 0;
  Vector probabilities;
};

Prediction predict(const Parameters& params, const Encoding& enc);

}  // namespace sra
