#pragma once

#include <string>
#include <vector>

#include "sra/corpus.hpp"
#include "sra/explain.hpp"
#include "sra/metrics.hpp"
#include "sra/run_config.hpp"
#include "sra/trainer.hpp"

namespace sra {

/// Encodes every example and derives its token-level rationale.
std::vector<TrainingExample> prepare_examples(const Dataset& ds, const Vocabulary& vocab, int max_len);

// FNV-1a over the canonical serialization, as 16 hex digits.
std::string fingerprint(const Dataset& ds);

struct EvalOptions {
  ExtractionStrategy strategy;
  bool faithfulness = true;
  ReportOptions report;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct EvalResult {
  std::vector<InstanceEval> evals;
  MetricsReport report;
};

/// One forward per example; the predicted rationale comes from the supervised
/// CLS attention row. Comprehensiveness and sufficiency are averaged over the
/// instances that carry a gold rationale. Output does not depend on `threads`.
InstanceEval evaluate_one(const Parameters& params, const TrainingExample& ex, const ExtractionStrategy& strategy);
EvalResult evaluate(const Parameters& params, std::span<const TrainingExample> examples, const EvalOptions& options);

/// Report from stored instance records; faithfulness stays absent.
MetricsReport offline_report(std::span<const InstanceEval> evals, int num_classes, const ReportOptions& options);

// Dispatch on extension: .jsonl canonical, .json HateXplain-shaped, .csv HateBRXplain-shaped.
Dataset load_dataset_any(const std::filesystem::path& path);

/// Vocabulary (from the training split), encoded splits and the model
/// configuration completed with vocabulary size and class count.
struct Experiment {
  Vocabulary vocab;
  ModelConfig model;
  std::vector<TrainingExample> train;
  std::vector<TrainingExample> validation;
  std::vector<TrainingExample> test;
};

Experiment prepare_experiment(const Dataset& ds, const SplitAssignment& split, const RunConfig& config);

struct ExperimentResult {
  TrainResult training;
  EvalResult test;
};

// Initializes from config.train.seed, trains, and evaluates the best checkpoint on the test split.
ExperimentResult run_experiment(const Experiment& experiment, const RunConfig& config, const TrainHooks& hooks = {});

// Scalar metrics of a report by their table names; absent values are skipped.
std::map<std::string, double> headline_metrics(const MetricsReport& report);

}  // namespace sra
