#include "sra/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "sra/metrics.hpp"

namespace sra {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be non-negative");
  if (clip_norm && !(*clip_norm > 0.0)) throw std::invalid_argument("clip norm must be positive");
}

AdamState make_adam_state(const Parameters& params) {
  AdamState state;
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    state.m.push_back(Matrix::Zero(params.tensor(i).rows(), params.tensor(i).cols()));
    state.v.push_back(Matrix::Zero(params.tensor(i).rows(), params.tensor(i).cols()));
  }
  return state;
}

void optimizer_step(Parameters& params, const Gradients& grads, AdamState& state, const TrainConfig& config) {
  if (state.m.size() != params.tensor_count()) state = make_adam_state(params);
  ++state.step;
  const double lr = config.learning_rate;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * config.weight_decay;
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    auto& p = params.tensor(i);
    const auto& g = grads.tensor(i);
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (config.weight_decay != 0.0) p *= decay;
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + config.adam_eps);
  }
}

double global_norm(const Gradients& grads) {
  double sq = 0.0;
  for (std::size_t i = 0; i < grads.tensor_count(); ++i) sq += grads.tensor(i).squaredNorm();
  return std::sqrt(sq);
}

double clip_global_norm(Gradients& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (std::size_t i = 0; i < grads.tensor_count(); ++i) grads.tensor(i) *= scale;
  }
  return norm;
}

std::vector<Prediction> predict_all(const Parameters& params, std::span<const TrainingExample> examples,
                                    unsigned threads) {
  std::vector<Prediction> out(examples.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, examples.size())));
  const auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < examples.size(); i += stride) out[i] = predict(params, examples[i].enc);
  };
  if (threads <= 1) {
    work(0, 1);
    return out;
  }
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  return out;
}

double macro_f1(std::span<const TrainingExample> examples, std::span<const Prediction> predictions, int num_classes) {
  std::vector<InstanceEval> evals(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    evals[i].gold = examples[i].label;
    evals[i].predicted = predictions[i].label;
  }
  return macro_f1(std::span<const InstanceEval>(evals), num_classes);
}

TrainResult train(Parameters params, std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> validation_set, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  if (validation_set.empty()) throw std::invalid_argument("validation set is empty");
  const int C = params.config().num_classes;

  Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
  Rng dropout_rng(derive_seed(config.seed, "dropout"));
  AdamState adam = make_adam_state(params);
  Gradients grads(params.config());
  Tape tape;

  TrainResult result;
  result.best = params;
  double best_f1 = -1.0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto B = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochStats stats;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += B, ++batch) {
      if (hooks.max_steps >= 0 && result.total_steps >= hooks.max_steps) break;
      const std::size_t end = std::min(order.size(), start + B);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      grads.set_zero();
      StepRecord rec;
      rec.epoch = epoch;
      rec.batch = static_cast<int>(batch);
      rec.mean.alpha = config.alpha;
      const auto diverged = [&](const std::string& what) {
        return TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + " batch " +
                                std::to_string(batch) + ": " + what);
      };
      for (std::size_t k = start; k < end; ++k) {
        const TrainingExample& ex = train_set[order[k]];
        ForwardOutput out;
        try {
          out = forward(params, ex.enc, true, &dropout_rng, &tape);
        } catch (const std::runtime_error& e) {
          throw diverged(e.what());
        }
        LossBreakdown loss;
        OutputGradient upstream;
        if (hooks.alignment_path) {
          loss = total_loss(out.logits, out.cls_attention, ex.label, ex.rationale, ex.enc.content_mask, config.alpha);
          upstream = total_loss_grad(out.logits, out.cls_attention, ex.label, ex.rationale, ex.enc.content_mask,
                                     config.alpha);
        } else {
          loss.ce = ce_loss(out.logits, ex.label);
          loss.total = loss.ce;
          upstream.d_logits = ce_loss_grad(out.logits, ex.label);
        }
        if (!std::isfinite(loss.total)) throw diverged("non-finite loss on example '" + ex.id + "'");
        backward(params, tape, upstream, grads, inv_batch);
        rec.mean.ce += loss.ce * inv_batch;
        rec.mean.aal += loss.aal * inv_batch;
        rec.mean.total += loss.total * inv_batch;
        stats.ce += loss.ce;
        stats.aal += loss.aal;
        stats.total += loss.total;
        stats.gated_examples += loss.gate ? 1 : 0;
      }
      rec.grad_norm = config.clip_norm ? clip_global_norm(grads, *config.clip_norm) : global_norm(grads);
      if (!std::isfinite(rec.grad_norm)) throw diverged("non-finite gradient");
      optimizer_step(params, grads, adam, config);
      ++stats.steps;
      rec.step = ++result.total_steps;
      if (hooks.on_step) hooks.on_step(rec, params);
    }
    const double n = static_cast<double>(order.size());
    stats.ce /= n;
    stats.aal /= n;
    stats.total /= n;
    const auto predictions = predict_all(params, validation_set);
    stats.val_macro_f1 = macro_f1(validation_set, predictions, C);
    if (stats.val_macro_f1 > best_f1) {
      best_f1 = stats.val_macro_f1;
      result.best = params;
      result.history.best_epoch = epoch;
    }
    result.history.epochs.push_back(stats);
    if (hooks.max_steps >= 0 && result.total_steps >= hooks.max_steps) break;
  }
  return result;
}

AggregateReport aggregate(std::vector<SeedRow> rows) {
  AggregateReport report;
  report.rows = std::move(rows);
  std::map<std::string, std::vector<double>> columns;
  for (const auto& row : report.rows) {
    for (const auto& [key, value] : row.metrics) columns[key].push_back(value);
  }
  for (const auto& [key, values] : columns) {
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    report.mean[key] = mean;
    report.stddev[key] = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return report;
}

AggregateReport multi_seed_run(std::span<const std::uint64_t> seeds,
                               const std::function<std::map<std::string, double>(std::uint64_t)>& run_one) {
  if (seeds.size() < 2) throw std::invalid_argument("multi-seed runs need at least two seeds");
  std::vector<SeedRow> rows;
  std::vector<std::string> failures;
  for (auto seed : seeds) {
    try {
      rows.push_back({seed, run_one(seed)});
    } catch (const std::exception& e) {
      failures.push_back("seed " + std::to_string(seed) + ": " + e.what());
    }
  }
  AggregateReport report = aggregate(std::move(rows));
  report.failures = std::move(failures);
  report.partial = !report.failures.empty();
  return report;
}

}  // namespace sra
