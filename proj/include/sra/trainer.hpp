#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sra/model.hpp"
#include "sra/objective.hpp"

namespace sra {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 5;
  double alpha = 10.0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::optional<double> clip_norm = 1.0;
  std::uint64_t seed = 0;
  std::string profile = "desk";

  void validate() const;
};

/// A model-ready example: encoding, label and token-level rationale.
struct TrainingExample {
  std::string id;
  Encoding enc;
  int label = 0;
  RationaleMask rationale;
  // Carried along for evaluation and rendering only.
  std::vector<std::string> words;
  std::set<std::string> target_groups;
};

struct EpochStats {
  double ce = 0.0;
  double aal = 0.0;  // mean over all examples, closed-gate examples counting 0
  double total = 0.0;
  int gated_examples = 0;
  int steps = 0;
  double val_macro_f1 = 0.0;
};

struct RunHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
};

struct TrainResult {
  Parameters best;
  RunHistory history;
  int total_steps = 0;
};

class TrainingDiverged : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct StepRecord {
  int step = 0;
  int epoch = 0;
  int batch = 0;
  LossBreakdown mean;  // batch means of each component
  double grad_norm = 0.0;
};

struct TrainHooks {
  std::function<void(const StepRecord&, const Parameters&)> on_step;
  // With false, the alignment term is never evaluated: plain cross-entropy training.
  bool alignment_path = true;
  // Stop after this many optimizer steps (negative: no limit).
  int max_steps = -1;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;
};

AdamState make_adam_state(const Parameters& params);

/// One AdamW update: theta *= (1 - lr * wd), then the bias-corrected
/// adaptive step lr * m_hat / (sqrt(v_hat) + eps).
void optimizer_step(Parameters& params, const Gradients& grads, AdamState& state, const TrainConfig& config);

double global_norm(const Gradients& grads);
// Rescales to max_norm if the global norm exceeds it; returns the norm before clipping.
double clip_global_norm(Gradients& grads, double max_norm);

/// Predictions in example order. Fans out across `threads` workers
/// (0 = hardware concurrency); results do not depend on the thread count.
std::vector<Prediction> predict_all(const Parameters& params, std::span<const TrainingExample> examples,
                                    unsigned threads = 0);

double macro_f1(std::span<const TrainingExample> examples, std::span<const Prediction> predictions,
                int num_classes);

/// Mini-batch training on the mean of per-example total losses. Data order,
/// dropout and initialization use independent streams derived from
/// config.seed, so changing alpha leaves the data order untouched. Returns
/// the parameters of the epoch with the best validation macro F1 (earliest on ties).
TrainResult train(Parameters params, std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> validation_set, const TrainConfig& config,
                  const TrainHooks& hooks = {});

struct SeedRow {
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
};

struct AggregateReport {
  std::vector<SeedRow> rows;
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;  // sample standard deviation
  std::vector<std::string> failures;
  bool partial = false;
};

AggregateReport aggregate(std::vector<SeedRow> rows);

/// Runs `run_one` per seed; a throwing seed is recorded as a failure and the
/// aggregate marked partial. Needs at least two seeds.
AggregateReport multi_seed_run(std::span<const std::uint64_t> seeds,
                               const std::function<std::map<std::string, double>(std::uint64_t)>& run_one);

}  // namespace sra
