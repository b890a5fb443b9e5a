#pragma once

#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sra/model.hpp"

namespace sra {

/// One evaluated instance. Rationale sets and `content_positions` are
/// encoding positions; `attention` is aligned with `content_positions`.
struct InstanceEval {
  std::string id;
  int gold = 0;
  int predicted = 0;
  std::vector<double> probabilities;
  double toxicity = 0.0;  // sum of non-normal class probabilities
  std::vector<int> content_positions;
  std::vector<double> attention;
  std::set<int> gold_rationale;
  std::set<int> predicted_rationale;
  std::set<std::string> target_groups;

  bool has_gold_rationale() const { return !gold_rationale.empty(); }
  friend bool operator==(const InstanceEval&, const InstanceEval&) = default;
};

nlohmann::json to_json(const InstanceEval& e);
InstanceEval instance_eval_from_json(const nlohmann::json& j);
void write_instance_evals(const std::string& path, std::span<const InstanceEval> evals);
std::vector<InstanceEval> read_instance_evals(const std::string& path);

double accuracy(std::span<const InstanceEval> evals);
// Unweighted mean of per-class F1; a class absent from gold and predictions scores 0.
double macro_f1(std::span<const InstanceEval> evals, int num_classes);

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Absent unless both classes are present.
std::optional<double> auroc(std::span<const double> scores, std::span<const int> labels);
std::optional<double> auroc_macro_ovr(std::span<const InstanceEval> evals, int num_classes);

// |a ∩ b| / |a ∪ b|, 1 when both are empty.
double iou(const std::set<int>& a, const std::set<int>& b);

/// An instance is a hit when IoU(pred, gold) >= match_threshold. Precision is
/// hits over instances with a nonempty prediction, recall is hits over
/// instances with a nonempty gold set; the result is their harmonic mean.
double iou_f1(std::span<const InstanceEval> evals, double match_threshold = 0.5);

struct TokenPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Micro-averaged over the content tokens of instances with a gold rationale.
TokenPrf token_prf(std::span<const InstanceEval> evals);

// Step-wise average precision; tied scores form a single threshold.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> relevant);

enum class AuprcPooling { kPerInstance, kMicro };
std::optional<double> auprc(std::span<const InstanceEval> evals,
                            AuprcPooling pooling = AuprcPooling::kPerInstance);

struct BiasAucs {
  std::optional<double> subgroup;
  std::optional<double> bpsn;
  std::optional<double> bnsp;
};

// Toxicity score against the binary toxic label (gold > 0).
BiasAucs bias_group_aucs(std::span<const InstanceEval> evals, const std::string& group);

/// Power mean ((1/N) sum auc^p)^(1/p). Throws std::domain_error for an AUC of
/// 0 with p < 0 and std::invalid_argument for empty input or values outside [0, 1].
double gmb(std::span<const double> aucs, double power = -5.0);

using ProbabilityFn = std::function<Vector(const Encoding&)>;

/// p(y_hat | full) - p(y_hat | full minus rationale), y_hat predicted on the full input.
double comprehensiveness(const ProbabilityFn& model, const Encoding& enc, const std::set<int>& rationale);
/// p(y_hat | full) - p(y_hat | rationale only).
double sufficiency(const ProbabilityFn& model, const Encoding& enc, const std::set<int>& rationale);

struct GroupAucRow {
  std::string group;
  int instances = 0;
  BiasAucs aucs;
};

struct MetricsReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> auroc;

  std::optional<double> iou_f1;
  std::optional<double> token_precision;
  std::optional<double> token_recall;
  std::optional<double> token_f1;
  std::optional<double> auprc;
  std::optional<double> attention_rationale_correlation;

  std::optional<double> gmb_subgroup;
  std::optional<double> gmb_bpsn;
  std::optional<double> gmb_bnsp;
  double gmb_power = -5.0;
  std::vector<GroupAucRow> per_group;

  std::optional<double> comprehensiveness;
  std::optional<double> sufficiency;

  int instances = 0;
  int explained_instances = 0;
  std::vector<int> gold_class_counts;
};

struct ReportOptions {
  double gmb_power = -5.0;
  double iou_threshold = 0.5;
  AuprcPooling auprc_pooling = AuprcPooling::kPerInstance;
};

/// Classification and fairness metrics over all instances; plausibility over
/// the instances that carry a gold rationale. Faithfulness and the attention
/// correlation are filled in by callers that have a model.
MetricsReport build_report(std::span<const InstanceEval> evals, int num_classes, const ReportOptions& options = {});

/// Grouped like a results table: classification, explainability, bias,
/// faithfulness, plus per-group AUCs and counts. Absent values are null.
nlohmann::json to_json(const MetricsReport& report, bool include_faithfulness = true);

}  // namespace sra
