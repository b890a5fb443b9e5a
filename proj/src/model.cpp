#include "sra/model.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace sra {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

const char* const kSlotNames[] = {
    "ln1.gain", "ln1.bias", "attn.q.weight", "attn.q.bias", "attn.k.weight", "attn.k.bias",
    "attn.v.weight", "attn.v.bias", "attn.o.weight", "attn.o.bias", "ln2.gain", "ln2.bias",
    "ff1.weight", "ff1.bias", "ff2.weight", "ff2.bias"};

bool is_weight(LayerSlot slot) {
  switch (slot) {
    case LayerSlot::kQueryWeight:
    case LayerSlot::kKeyWeight:
    case LayerSlot::kValueWeight:
    case LayerSlot::kOutputWeight:
    case LayerSlot::kFf1Weight:
    case LayerSlot::kFf2Weight:
      return true;
    default:
      return false;
  }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// Row-wise layer norm; returns y and records x-hat and 1/std per row.
Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, Matrix& xhat, Vector& rstd) {
  const auto n = static_cast<double>(x.cols());
  xhat.resize(x.rows(), x.cols());
  rstd.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).sum() / n;
    const double var = (x.row(i).array() - mean).square().sum() / n;
    rstd(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = (x.row(i).array() - mean) * rstd(i);
  }
  Matrix y = xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

// Gradient with respect to the layer-norm input, for one row.
void layer_norm_backward_row(const Eigen::Ref<const Eigen::RowVectorXd>& dy,
                             const Eigen::Ref<const Eigen::RowVectorXd>& xhat, double rstd,
                             const Matrix& gain, Matrix& dgain, Matrix& dbias,
                             Eigen::Ref<Eigen::RowVectorXd> dx) {
  dgain.row(0).array() += dy.array() * xhat.array();
  dbias.row(0) += dy;
  const Eigen::RowVectorXd dxhat = dy.array() * gain.row(0).array();
  const double n = static_cast<double>(dy.size());
  const double mean_d = dxhat.sum() / n;
  const double mean_dx = dxhat.dot(xhat) / n;
  dx.array() += rstd * (dxhat.array() - mean_d - xhat.array() * mean_dx);
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& xhat, const Vector& rstd, const Matrix& gain,
                           Matrix& dgain, Matrix& dbias) {
  Matrix dx = Matrix::Zero(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    if (dy.row(i).isZero(0.0)) continue;
    layer_norm_backward_row(dy.row(i), xhat.row(i), rstd(i), gain, dgain, dbias, dx.row(i));
  }
  return dx;
}

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng.uniform() < p ? 0.0 : keep_scale;
  }
  return mask;
}

void require_finite(const Matrix& m, const char* what, int layer) {
  if (!m.allFinite()) {
    throw std::runtime_error(std::string("non-finite activation in ") + what +
                             (layer >= 0 ? " of layer " + std::to_string(layer) : std::string{}));
  }
}

}  // namespace

void ModelConfig::validate() const {
  const auto fail = [](const std::string& what) { throw std::invalid_argument("invalid model config: " + what); };
  if (d_model <= 0 || n_heads <= 0 || n_layers <= 0 || d_ff <= 0) fail("dimensions must be positive");
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (vocab_size <= kNumSpecialTokens) fail("vocab_size must exceed the special tokens");
  if (max_len < 3) fail("max_len must be >= 3");
  if (num_classes < 2) fail("num_classes must be >= 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (supervision_layer < 0 || supervision_layer >= n_layers) fail("supervision_layer out of range");
  if (supervision_head != kMeanOverHeads && (supervision_head < 0 || supervision_head >= n_heads)) {
    fail("supervision_head out of range");
  }
}

Parameters::Parameters(const ModelConfig& config) : config_(config) {
  config_.validate();
  const Eigen::Index d = config.d_model, f = config.d_ff;
  const auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
    names_.push_back(std::move(name));
    tensors_.push_back(Matrix::Zero(rows, cols));
  };
  add("embed.token", config.vocab_size, d);
  add("embed.position", config.max_len, d);
  for (int l = 0; l < config.n_layers; ++l) {
    for (int s = 0; s < static_cast<int>(LayerSlot::kCount); ++s) {
      const auto slot = static_cast<LayerSlot>(s);
      Eigen::Index rows = 1, cols = d;
      if (is_weight(slot)) rows = d;
      if (slot == LayerSlot::kFf1Weight || slot == LayerSlot::kFf1Bias) cols = f;
      if (slot == LayerSlot::kFf2Weight) rows = f;
      add("layer" + std::to_string(l) + "." + kSlotNames[s], rows, cols);
    }
  }
  add("final_ln.gain", 1, d);
  add("final_ln.bias", 1, d);
  add("classifier.weight", config.num_classes, d);
  add("classifier.bias", 1, config.num_classes);
}

std::size_t Parameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.size());
  return n;
}

void Parameters::set_zero() {
  for (auto& t : tensors_) t.setZero();
}

bool Parameters::all_finite() const {
  for (const auto& t : tensors_) {
    if (!t.allFinite()) return false;
  }
  return true;
}

bool operator==(const Parameters& a, const Parameters& b) {
  if (!(a.config_ == b.config_) || a.tensors_.size() != b.tensors_.size()) return false;
  for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
    const auto& x = a.tensors_[i];
    const auto& y = b.tensors_[i];
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (std::memcmp(x.data(), y.data(), static_cast<std::size_t>(x.size()) * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

Parameters init_model(const ModelConfig& config) {
  Parameters params(config);
  Rng rng(derive_seed(config.init_seed, "init"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.d_model));
  const auto fill = [&](Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  };
  fill(params.token_embedding());
  fill(params.position_embedding());
  for (int l = 0; l < config.n_layers; ++l) {
    for (int s = 0; s < static_cast<int>(LayerSlot::kCount); ++s) {
      const auto slot = static_cast<LayerSlot>(s);
      if (is_weight(slot)) fill(params.layer(l, slot));
    }
    params.layer(l, LayerSlot::kLn1Gain).setOnes();
    params.layer(l, LayerSlot::kLn2Gain).setOnes();
  }
  params.final_ln_gain().setOnes();
  fill(params.classifier_weight());
  return params;
}

ForwardOutput forward(const Parameters& params, const Encoding& enc, bool train_mode, Rng* dropout_rng,
                      Tape* tape) {
  const ModelConfig& cfg = params.config();
  const Eigen::Index L = enc.length();
  if (L != cfg.max_len) {
    throw std::invalid_argument("encoding length " + std::to_string(L) + " != model max_len " +
                                std::to_string(cfg.max_len));
  }
  const bool use_dropout = train_mode && cfg.dropout > 0.0;
  if (use_dropout && dropout_rng == nullptr) throw std::invalid_argument("train-mode dropout needs an Rng");
  const int H = cfg.n_heads;
  const Eigen::Index dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<Eigen::Index> valid;
  for (Eigen::Index j = 0; j < L; ++j) {
    if (enc.padding_mask[static_cast<std::size_t>(j)]) valid.push_back(j);
  }
  if (valid.empty()) throw std::invalid_argument("encoding has no valid positions");

  if (tape) {
    *tape = Tape{};
    tape->ids = enc.ids;
    tape->padding_mask = enc.padding_mask;
    tape->layers.resize(static_cast<std::size_t>(cfg.n_layers));
  }

  Matrix x(L, cfg.d_model);
  for (Eigen::Index i = 0; i < L; ++i) {
    const int id = enc.ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= cfg.vocab_size) throw std::invalid_argument("token id outside vocabulary");
    x.row(i) = params.token_embedding().row(id) + params.position_embedding().row(i);
  }
  if (use_dropout) {
    Matrix mask = dropout_mask(L, cfg.d_model, cfg.dropout, *dropout_rng);
    x.array() *= mask.array();
    if (tape) tape->emb_drop = std::move(mask);
  }

  ForwardOutput out;
  out.n_heads = H;
  out.attentions.reserve(static_cast<std::size_t>(cfg.n_layers * H));

  for (int l = 0; l < cfg.n_layers; ++l) {
    const auto P = [&](LayerSlot s) -> const Matrix& { return params.layer(l, s); };
    LayerTape local;
    LayerTape& t = tape ? tape->layers[static_cast<std::size_t>(l)] : local;
    t.x_in = x;
    t.h1 = layer_norm(x, P(LayerSlot::kLn1Gain), P(LayerSlot::kLn1Bias), t.ln1_xhat, t.ln1_rstd);
    t.q = affine(t.h1, P(LayerSlot::kQueryWeight), P(LayerSlot::kQueryBias));
    t.k = affine(t.h1, P(LayerSlot::kKeyWeight), P(LayerSlot::kKeyBias));
    t.v = affine(t.h1, P(LayerSlot::kValueWeight), P(LayerSlot::kValueBias));
    t.ctx.resize(L, cfg.d_model);
    t.attn.clear();
    for (int h = 0; h < H; ++h) {
      const Eigen::Index c0 = h * dh;
      Matrix scores = (t.q.middleCols(c0, dh) * t.k.middleCols(c0, dh).transpose()) * scale;
      Matrix a = Matrix::Zero(L, L);
      for (Eigen::Index i = 0; i < L; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (auto j : valid) mx = std::max(mx, scores(i, j));
        double z = 0.0;
        for (auto j : valid) {
          const double e = std::exp(scores(i, j) - mx);
          a(i, j) = e;
          z += e;
        }
        for (auto j : valid) a(i, j) /= z;
      }
      t.ctx.middleCols(c0, dh) = a * t.v.middleCols(c0, dh);
      out.attentions.push_back(a);
      t.attn.push_back(std::move(a));
    }
    Matrix o = affine(t.ctx, P(LayerSlot::kOutputWeight), P(LayerSlot::kOutputBias));
    if (use_dropout) {
      t.attn_drop = dropout_mask(L, cfg.d_model, cfg.dropout, *dropout_rng);
      o.array() *= t.attn_drop.array();
    }
    t.x_mid = x + o;
    t.h2 = layer_norm(t.x_mid, P(LayerSlot::kLn2Gain), P(LayerSlot::kLn2Bias), t.ln2_xhat, t.ln2_rstd);
    t.ff_pre = affine(t.h2, P(LayerSlot::kFf1Weight), P(LayerSlot::kFf1Bias));
    t.ff_act = t.ff_pre.unaryExpr([](double v) { return gelu(v); });
    Matrix f = affine(t.ff_act, P(LayerSlot::kFf2Weight), P(LayerSlot::kFf2Bias));
    if (use_dropout) {
      t.ff_drop = dropout_mask(L, cfg.d_model, cfg.dropout, *dropout_rng);
      f.array() *= t.ff_drop.array();
    }
    x = t.x_mid + f;
    require_finite(x, "hidden state", l);
  }

  Matrix final_xhat;
  Vector final_rstd;
  out.hidden = layer_norm(x, params.final_ln_gain(), params.final_ln_bias(), final_xhat, final_rstd);
  const Vector h_cls = out.hidden.row(0).transpose();
  out.logits = params.classifier_weight() * h_cls + params.classifier_bias().row(0).transpose();
  require_finite(out.logits, "logits", -1);
  const double mx = out.logits.maxCoeff();
  out.probabilities = (out.logits.array() - mx).exp();
  out.probabilities /= out.probabilities.sum();

  const int sl = cfg.supervision_layer;
  if (cfg.supervision_head == kMeanOverHeads) {
    out.cls_attention = Vector::Zero(L);
    for (int h = 0; h < H; ++h) out.cls_attention += out.attention(sl, h).row(0).transpose();
    out.cls_attention /= static_cast<double>(H);
  } else {
    out.cls_attention = out.attention(sl, cfg.supervision_head).row(0).transpose();
  }

  if (tape) {
    tape->final_xhat = std::move(final_xhat);
    tape->final_rstd = std::move(final_rstd);
    tape->h_cls = h_cls;
    tape->recorded = true;
  }
  return out;
}

void backward(const Parameters& params, const Tape& tape, const OutputGradient& upstream, Gradients& grads,
              double seed) {
  if (!tape.recorded) throw std::logic_error("backward called without a recorded forward pass");
  const ModelConfig& cfg = params.config();
  if (!(grads.config() == cfg)) throw std::invalid_argument("gradient buffer shape mismatch");
  const Eigen::Index L = static_cast<Eigen::Index>(tape.ids.size());
  const int H = cfg.n_heads;
  const Eigen::Index dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (upstream.d_logits.size() != cfg.num_classes) throw std::invalid_argument("d_logits has wrong size");
  const bool has_attn_grad = upstream.d_cls_attention.size() > 0;
  if (has_attn_grad && upstream.d_cls_attention.size() != L) {
    throw std::invalid_argument("d_cls_attention has wrong size");
  }

  const Vector dlogits = upstream.d_logits * seed;
  grads.classifier_weight() += dlogits * tape.h_cls.transpose();
  grads.classifier_bias().row(0) += dlogits.transpose();
  const Eigen::RowVectorXd dh_cls = (params.classifier_weight().transpose() * dlogits).transpose();

  Matrix dx = Matrix::Zero(L, cfg.d_model);
  layer_norm_backward_row(dh_cls, tape.final_xhat.row(0), tape.final_rstd(0), params.final_ln_gain(),
                          grads.final_ln_gain(), grads.final_ln_bias(), dx.row(0));

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const LayerTape& t = tape.layers[static_cast<std::size_t>(l)];
    const auto P = [&](LayerSlot s) -> const Matrix& { return params.layer(l, s); };
    const auto G = [&](LayerSlot s) -> Matrix& { return grads.layer(l, s); };

    // Feed-forward sublayer: x_out = x_mid + drop(gelu(h2 W1 + b1) W2 + b2).
    Matrix df = dx;
    if (t.ff_drop.size()) df.array() *= t.ff_drop.array();
    G(LayerSlot::kFf2Weight).noalias() += t.ff_act.transpose() * df;
    G(LayerSlot::kFf2Bias).row(0) += df.colwise().sum();
    Matrix dpre = df * P(LayerSlot::kFf2Weight).transpose();
    dpre.array() *= t.ff_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
    G(LayerSlot::kFf1Weight).noalias() += t.h2.transpose() * dpre;
    G(LayerSlot::kFf1Bias).row(0) += dpre.colwise().sum();
    const Matrix dh2 = dpre * P(LayerSlot::kFf1Weight).transpose();
    Matrix dx_mid = dx + layer_norm_backward(dh2, t.ln2_xhat, t.ln2_rstd, P(LayerSlot::kLn2Gain),
                                             G(LayerSlot::kLn2Gain), G(LayerSlot::kLn2Bias));

    // Attention sublayer: x_mid = x_in + drop(ctx Wo + bo).
    Matrix d_o = dx_mid;
    if (t.attn_drop.size()) d_o.array() *= t.attn_drop.array();
    G(LayerSlot::kOutputWeight).noalias() += t.ctx.transpose() * d_o;
    G(LayerSlot::kOutputBias).row(0) += d_o.colwise().sum();
    const Matrix dctx = d_o * P(LayerSlot::kOutputWeight).transpose();

    Matrix dq = Matrix::Zero(L, cfg.d_model);
    Matrix dk = Matrix::Zero(L, cfg.d_model);
    Matrix dv = Matrix::Zero(L, cfg.d_model);
    for (int h = 0; h < H; ++h) {
      const Eigen::Index c0 = h * dh;
      const Matrix& a = t.attn[static_cast<std::size_t>(h)];
      Matrix da = dctx.middleCols(c0, dh) * t.v.middleCols(c0, dh).transpose();
      if (has_attn_grad && l == cfg.supervision_layer) {
        if (cfg.supervision_head == kMeanOverHeads) {
          da.row(0) += upstream.d_cls_attention.transpose() * (seed / static_cast<double>(H));
        } else if (cfg.supervision_head == h) {
          da.row(0) += upstream.d_cls_attention.transpose() * seed;
        }
      }
      dv.middleCols(c0, dh).noalias() += a.transpose() * dctx.middleCols(c0, dh);
      // Softmax backward; masked keys carry a = 0 and so receive no gradient.
      Matrix ds = a.array() * (da.colwise() - (a.array() * da.array()).rowwise().sum().matrix()).array();
      ds *= scale;
      dq.middleCols(c0, dh).noalias() += ds * t.k.middleCols(c0, dh);
      dk.middleCols(c0, dh).noalias() += ds.transpose() * t.q.middleCols(c0, dh);
    }
    G(LayerSlot::kQueryWeight).noalias() += t.h1.transpose() * dq;
    G(LayerSlot::kQueryBias).row(0) += dq.colwise().sum();
    G(LayerSlot::kKeyWeight).noalias() += t.h1.transpose() * dk;
    G(LayerSlot::kKeyBias).row(0) += dk.colwise().sum();
    G(LayerSlot::kValueWeight).noalias() += t.h1.transpose() * dv;
    G(LayerSlot::kValueBias).row(0) += dv.colwise().sum();
    Matrix dh1 = dq * P(LayerSlot::kQueryWeight).transpose();
    dh1.noalias() += dk * P(LayerSlot::kKeyWeight).transpose();
    dh1.noalias() += dv * P(LayerSlot::kValueWeight).transpose();
    dx = dx_mid + layer_norm_backward(dh1, t.ln1_xhat, t.ln1_rstd, P(LayerSlot::kLn1Gain),
                                      G(LayerSlot::kLn1Gain), G(LayerSlot::kLn1Bias));
  }

  if (tape.emb_drop.size()) dx.array() *= tape.emb_drop.array();
  for (Eigen::Index i = 0; i < L; ++i) {
    if (dx.row(i).isZero(0.0)) continue;
    grads.token_embedding().row(tape.ids[static_cast<std::size_t>(i)]) += dx.row(i);
    grads.position_embedding().row(i) += dx.row(i);
  }
}

Gradients backward(const Parameters& params, const Tape& tape, const OutputGradient& upstream, double seed) {
  Gradients grads(params.config());
  backward(params, tape, upstream, grads, seed);
  return grads;
}

int argmax(const Vector& values) {
  if (values.size() == 0) throw std::invalid_argument("argmax of an empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = i;
  }
  return static_cast<int>(best);
}

Prediction predict(const Parameters& params, const Encoding& enc) {
  ForwardOutput out = forward(params, enc, false);
  return {argmax(out.probabilities), std::move(out.probabilities)};
}

}  // namespace sra
