#include "sra/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace sra {

using nlohmann::json;

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

double harmonic(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

json to_json(const InstanceEval& e) {
  return {{"id", e.id},
          {"gold", e.gold},
          {"predicted", e.predicted},
          {"probabilities", e.probabilities},
          {"toxicity", e.toxicity},
          {"content_positions", e.content_positions},
          {"attention", e.attention},
          {"gold_rationale", e.gold_rationale},
          {"predicted_rationale", e.predicted_rationale},
          {"target_groups", e.target_groups}};
}

InstanceEval instance_eval_from_json(const json& j) {
  InstanceEval e;
  e.id = j.at("id").get<std::string>();
  e.gold = j.at("gold").get<int>();
  e.predicted = j.at("predicted").get<int>();
  e.probabilities = j.at("probabilities").get<std::vector<double>>();
  if (j.contains("toxicity")) {
    e.toxicity = j.at("toxicity").get<double>();
  } else {
    for (std::size_t c = 1; c < e.probabilities.size(); ++c) e.toxicity += e.probabilities[c];
  }
  e.content_positions = j.value("content_positions", std::vector<int>{});
  e.attention = j.value("attention", std::vector<double>{});
  e.gold_rationale = j.value("gold_rationale", std::set<int>{});
  e.predicted_rationale = j.value("predicted_rationale", std::set<int>{});
  e.target_groups = j.value("target_groups", std::set<std::string>{});
  if (e.attention.size() != e.content_positions.size()) {
    throw std::invalid_argument("instance '" + e.id + "': attention and content_positions differ in length");
  }
  return e;
}

void write_instance_evals(const std::string& path, std::span<const InstanceEval> evals) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& e : evals) out << to_json(e).dump() << '\n';
}

std::vector<InstanceEval> read_instance_evals(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<InstanceEval> evals;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      evals.push_back(instance_eval_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return evals;
}

double accuracy(std::span<const InstanceEval> evals) {
  if (evals.empty()) throw std::invalid_argument("accuracy of an empty set");
  const auto correct = std::count_if(evals.begin(), evals.end(),
                                     [](const InstanceEval& e) { return e.gold == e.predicted; });
  return static_cast<double>(correct) / static_cast<double>(evals.size());
}

double macro_f1(std::span<const InstanceEval> evals, int num_classes) {
  if (evals.empty()) throw std::invalid_argument("macro F1 of an empty set");
  double sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (const auto& e : evals) {
      if (e.predicted == c && e.gold == c) ++tp;
      else if (e.predicted == c) ++fp;
      else if (e.gold == c) ++fn;
    }
    sum += harmonic(safe_ratio(tp, tp + fp), safe_ratio(tp, tp + fn));
  }
  return sum / num_classes;
}

std::optional<double> auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mid-ranks (1-based) over tie groups.
  double positive_rank_sum = 0.0;
  double positives = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        positive_rank_sum += mid_rank;
        positives += 1.0;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) return std::nullopt;
  return (positive_rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

std::optional<double> auroc_macro_ovr(std::span<const InstanceEval> evals, int num_classes) {
  double sum = 0.0;
  int defined = 0;
  std::vector<double> scores(evals.size());
  std::vector<int> labels(evals.size());
  for (int c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < evals.size(); ++i) {
      scores[i] = evals[i].probabilities.at(static_cast<std::size_t>(c));
      labels[i] = evals[i].gold == c ? 1 : 0;
    }
    if (auto auc = auroc(scores, labels)) {
      sum += *auc;
      ++defined;
    }
  }
  if (defined == 0) return std::nullopt;
  return sum / defined;
}

double iou(const std::set<int>& a, const std::set<int>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::vector<int> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  const double inter = static_cast<double>(common.size());
  return inter / (static_cast<double>(a.size() + b.size()) - inter);
}

double iou_f1(std::span<const InstanceEval> evals, double match_threshold) {
  double pred_hits = 0, gold_hits = 0, with_pred = 0, with_gold = 0;
  for (const auto& e : evals) {
    const bool has_pred = !e.predicted_rationale.empty();
    const bool has_gold = !e.gold_rationale.empty();
    const bool hit = iou(e.predicted_rationale, e.gold_rationale) >= match_threshold;
    if (has_pred) {
      ++with_pred;
      if (hit) ++pred_hits;
    }
    if (has_gold) {
      ++with_gold;
      if (hit) ++gold_hits;
    }
  }
  return harmonic(safe_ratio(pred_hits, with_pred), safe_ratio(gold_hits, with_gold));
}

TokenPrf token_prf(std::span<const InstanceEval> evals) {
  double tp = 0, fp = 0, fn = 0;
  for (const auto& e : evals) {
    if (!e.has_gold_rationale()) continue;
    for (int p : e.predicted_rationale) (e.gold_rationale.contains(p) ? tp : fp) += 1;
    for (int g : e.gold_rationale) {
      if (!e.predicted_rationale.contains(g)) ++fn;
    }
  }
  TokenPrf out;
  out.precision = safe_ratio(tp, tp + fp);
  out.recall = safe_ratio(tp, tp + fn);
  out.f1 = harmonic(out.precision, out.recall);
  return out;
}

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> relevant) {
  if (scores.size() != relevant.size()) throw std::invalid_argument("scores and labels differ in length");
  const double total_relevant = static_cast<double>(std::count(relevant.begin(), relevant.end(), 1));
  if (total_relevant == 0.0) throw std::invalid_argument("average precision needs a relevant item");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0, tp = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (relevant[order[j]]) tp += 1.0;
      ++j;
    }
    const double recall = tp / total_relevant;
    ap += (recall - prev_recall) * (tp / static_cast<double>(j));
    prev_recall = recall;
    i = j;
  }
  return ap;
}

std::optional<double> auprc(std::span<const InstanceEval> evals, AuprcPooling pooling) {
  std::vector<double> pooled_scores;
  std::vector<std::uint8_t> pooled_relevant;
  double sum = 0.0;
  int counted = 0;
  for (const auto& e : evals) {
    if (!e.has_gold_rationale() || e.content_positions.empty()) continue;
    std::vector<std::uint8_t> relevant(e.content_positions.size());
    for (std::size_t i = 0; i < relevant.size(); ++i) {
      relevant[i] = e.gold_rationale.contains(e.content_positions[i]) ? 1 : 0;
    }
    if (std::count(relevant.begin(), relevant.end(), 1) == 0) continue;
    if (pooling == AuprcPooling::kMicro) {
      pooled_scores.insert(pooled_scores.end(), e.attention.begin(), e.attention.end());
      pooled_relevant.insert(pooled_relevant.end(), relevant.begin(), relevant.end());
    } else {
      sum += average_precision(e.attention, relevant);
    }
    ++counted;
  }
  if (counted == 0) return std::nullopt;
  if (pooling == AuprcPooling::kMicro) return average_precision(pooled_scores, pooled_relevant);
  return sum / counted;
}

BiasAucs bias_group_aucs(std::span<const InstanceEval> evals, const std::string& group) {
  std::vector<double> sub_s, bpsn_s, bnsp_s;
  std::vector<int> sub_y, bpsn_y, bnsp_y;
  for (const auto& e : evals) {
    const bool in_group = e.target_groups.contains(group);
    const int toxic = e.gold > 0 ? 1 : 0;
    if (in_group) {
      sub_s.push_back(e.toxicity);
      sub_y.push_back(toxic);
    }
    if ((in_group && !toxic) || (!in_group && toxic)) {
      bpsn_s.push_back(e.toxicity);
      bpsn_y.push_back(toxic);
    }
    if ((in_group && toxic) || (!in_group && !toxic)) {
      bnsp_s.push_back(e.toxicity);
      bnsp_y.push_back(toxic);
    }
  }
  return {auroc(sub_s, sub_y), auroc(bpsn_s, bpsn_y), auroc(bnsp_s, bnsp_y)};
}

double gmb(std::span<const double> aucs, double power) {
  if (aucs.empty()) throw std::invalid_argument("generalized mean of no values");
  if (power == 0.0) throw std::invalid_argument("power 0 is not supported");
  double sum = 0.0;
  for (double a : aucs) {
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("AUC outside [0, 1]");
    if (a == 0.0 && power < 0.0) throw std::domain_error("AUC of 0 under a negative power");
    sum += std::pow(a, power);
  }
  return std::pow(sum / static_cast<double>(aucs.size()), 1.0 / power);
}

double comprehensiveness(const ProbabilityFn& model, const Encoding& enc, const std::set<int>& rationale) {
  const Vector full = model(enc);
  const int y_hat = argmax(full);
  std::vector<int> keep;
  for (int p : enc.content_positions()) {
    if (!rationale.contains(p)) keep.push_back(p);
  }
  return full(y_hat) - model(select_tokens(enc, keep))(y_hat);
}

double sufficiency(const ProbabilityFn& model, const Encoding& enc, const std::set<int>& rationale) {
  const Vector full = model(enc);
  const int y_hat = argmax(full);
  std::vector<int> keep;
  for (int p : enc.content_positions()) {
    if (rationale.contains(p)) keep.push_back(p);
  }
  return full(y_hat) - model(select_tokens(enc, keep))(y_hat);
}

MetricsReport build_report(std::span<const InstanceEval> evals, int num_classes, const ReportOptions& options) {
  MetricsReport r;
  r.instances = static_cast<int>(evals.size());
  r.gold_class_counts.assign(static_cast<std::size_t>(num_classes), 0);
  for (const auto& e : evals) ++r.gold_class_counts.at(static_cast<std::size_t>(e.gold));
  r.accuracy = accuracy(evals);
  r.macro_f1 = macro_f1(evals, num_classes);
  r.auroc = auroc_macro_ovr(evals, num_classes);

  std::vector<InstanceEval> explained;
  for (const auto& e : evals) {
    if (e.has_gold_rationale()) explained.push_back(e);
  }
  r.explained_instances = static_cast<int>(explained.size());
  if (!explained.empty()) {
    r.iou_f1 = iou_f1(explained, options.iou_threshold);
    const TokenPrf prf = token_prf(explained);
    r.token_precision = prf.precision;
    r.token_recall = prf.recall;
    r.token_f1 = prf.f1;
    r.auprc = auprc(explained, options.auprc_pooling);
  }

  r.gmb_power = options.gmb_power;
  std::set<std::string> groups;
  for (const auto& e : evals) groups.insert(e.target_groups.begin(), e.target_groups.end());
  std::vector<double> sub, bpsn, bnsp;
  for (const auto& g : groups) {
    GroupAucRow row;
    row.group = g;
    row.instances = static_cast<int>(
        std::count_if(evals.begin(), evals.end(), [&](const InstanceEval& e) { return e.target_groups.contains(g); }));
    row.aucs = bias_group_aucs(evals, g);
    if (row.aucs.subgroup) sub.push_back(*row.aucs.subgroup);
    if (row.aucs.bpsn) bpsn.push_back(*row.aucs.bpsn);
    if (row.aucs.bnsp) bnsp.push_back(*row.aucs.bnsp);
    r.per_group.push_back(std::move(row));
  }
  const auto mean_of = [&](const std::vector<double>& v) -> std::optional<double> {
    if (v.empty()) return std::nullopt;
    try {
      return gmb(v, options.gmb_power);
    } catch (const std::domain_error&) {
      return std::nullopt;
    }
  };
  r.gmb_subgroup = mean_of(sub);
  r.gmb_bpsn = mean_of(bpsn);
  r.gmb_bnsp = mean_of(bnsp);
  return r;
}

json to_json(const MetricsReport& r, bool include_faithfulness) {
  json per_group = json::array();
  for (const auto& row : r.per_group) {
    per_group.push_back({{"group", row.group},
                         {"instances", row.instances},
                         {"subgroup_auc", optional_json(row.aucs.subgroup)},
                         {"bpsn_auc", optional_json(row.aucs.bpsn)},
                         {"bnsp_auc", optional_json(row.aucs.bnsp)}});
  }
  json out = {
      {"classification", {{"accuracy", r.accuracy}, {"macro_f1", r.macro_f1}, {"auroc", optional_json(r.auroc)}}},
      {"explainability",
       {{"iou_f1", optional_json(r.iou_f1)},
        {"token_precision", optional_json(r.token_precision)},
        {"token_recall", optional_json(r.token_recall)},
        {"token_f1", optional_json(r.token_f1)},
        {"auprc", optional_json(r.auprc)},
        {"attention_rationale_correlation", optional_json(r.attention_rationale_correlation)}}},
      {"bias",
       {{"gmb_subgroup", optional_json(r.gmb_subgroup)},
        {"gmb_bpsn", optional_json(r.gmb_bpsn)},
        {"gmb_bnsp", optional_json(r.gmb_bnsp)},
        {"gmb_power", r.gmb_power}}},
      {"per_group_auc", std::move(per_group)},
      {"counts",
       {{"instances", r.instances},
        {"explained_instances", r.explained_instances},
        {"gold_class_counts", r.gold_class_counts}}},
  };
  if (include_faithfulness) {
    out["faithfulness"] = {{"comprehensiveness", optional_json(r.comprehensiveness)},
                           {"sufficiency", optional_json(r.sufficiency)}};
  }
  return out;
}

}  // namespace sra
