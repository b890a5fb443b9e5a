#include "sra/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <thread>

namespace sra {

std::vector<TrainingExample> prepare_examples(const Dataset& ds, const Vocabulary& vocab, int max_len) {
  std::vector<TrainingExample> out;
  out.reserve(ds.examples.size());
  for (const auto& ex : ds.examples) {
    TrainingExample t;
    t.id = ex.id;
    t.enc = encode(ex.words, ex.text, vocab, max_len);
    t.label = ex.label;
    t.rationale = rationale_for(ex, t.enc);
    t.words = ex.words;
    t.target_groups = ex.target_groups;
    out.push_back(std::move(t));
  }
  return out;
}

std::string fingerprint(const Dataset& ds) {
  std::ostringstream canonical;
  write_dataset(canonical, ds);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

InstanceEval evaluate_one(const Parameters& params, const TrainingExample& ex, const ExtractionStrategy& strategy) {
  const ForwardOutput out = forward(params, ex.enc, false);
  InstanceEval e;
  e.id = ex.id;
  e.gold = ex.label;
  e.predicted = argmax(out.probabilities);
  e.probabilities.assign(out.probabilities.data(), out.probabilities.data() + out.probabilities.size());
  for (std::size_t c = 1; c < e.probabilities.size(); ++c) e.toxicity += e.probabilities[c];
  e.content_positions = ex.enc.content_positions();
  e.attention = content_scores(out.cls_attention, ex.enc);
  for (int p : e.content_positions) {
    if (static_cast<std::size_t>(p) < ex.rationale.size() && ex.rationale[static_cast<std::size_t>(p)] != 0) {
      e.gold_rationale.insert(p);
    }
  }
  e.predicted_rationale = extract_rationale(out.cls_attention, ex.enc, strategy);
  e.target_groups = ex.target_groups;
  return e;
}

EvalResult evaluate(const Parameters& params, std::span<const TrainingExample> examples, const EvalOptions& options) {
  options.strategy.validate();
  const std::size_t n = examples.size();
  EvalResult result;
  result.evals.resize(n);
  std::vector<double> comp(n, 0.0), suff(n, 0.0);
  const ProbabilityFn model = [&](const Encoding& enc) { return predict(params, enc).probabilities; };

  const auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < n; i += stride) {
      result.evals[i] = evaluate_one(params, examples[i], options.strategy);
      if (options.faithfulness && result.evals[i].has_gold_rationale()) {
        comp[i] = comprehensiveness(model, examples[i].enc, result.evals[i].predicted_rationale);
        suff[i] = sufficiency(model, examples[i].enc, result.evals[i].predicted_rationale);
      }
    }
  };
  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }

  const int C = params.config().num_classes;
  result.report = build_report(result.evals, C, options.report);
  result.report.attention_rationale_correlation = attention_rationale_correlation(result.evals);
  if (options.faithfulness) {
    double c = 0.0, s = 0.0;
    int counted = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!result.evals[i].has_gold_rationale()) continue;
      c += comp[i];
      s += suff[i];
      ++counted;
    }
    if (counted > 0) {
      result.report.comprehensiveness = c / counted;
      result.report.sufficiency = s / counted;
    }
  }
  return result;
}

MetricsReport offline_report(std::span<const InstanceEval> evals, int num_classes, const ReportOptions& options) {
  MetricsReport report = build_report(evals, num_classes, options);
  report.attention_rationale_correlation = attention_rationale_correlation(evals);
  return report;
}

Dataset load_dataset_any(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".jsonl") return read_dataset(path);
  if (ext == ".json") return load_hatexplain(path);
  if (ext == ".csv") return load_hatebrxplain(path);
  throw DataError("unrecognized dataset extension '" + ext + "' for " + path.string() +
                  " (expected .jsonl, .json or .csv)");
}

Experiment prepare_experiment(const Dataset& ds, const SplitAssignment& split, const RunConfig& config) {
  const Dataset train = subset(ds, split.train);
  Experiment e;
  e.vocab = build_vocab(train, config.min_freq);
  e.model = config.model;
  e.model.vocab_size = e.vocab.size();
  e.model.num_classes = ds.num_classes;
  e.model.init_seed = config.train.seed;
  e.model.validate();
  e.train = prepare_examples(train, e.vocab, e.model.max_len);
  e.validation = prepare_examples(subset(ds, split.validation), e.vocab, e.model.max_len);
  e.test = prepare_examples(subset(ds, split.test), e.vocab, e.model.max_len);
  return e;
}

ExperimentResult run_experiment(const Experiment& experiment, const RunConfig& config, const TrainHooks& hooks) {
  ModelConfig model = experiment.model;
  model.init_seed = config.train.seed;
  ExperimentResult r;
  r.training = train(init_model(model), experiment.train, experiment.validation, config.train, hooks);
  EvalOptions options;
  options.strategy = config.strategy;
  options.report = config.report;
  options.threads = config.threads;
  r.test = evaluate(r.training.best, experiment.test, options);
  return r;
}

std::map<std::string, double> headline_metrics(const MetricsReport& report) {
  std::map<std::string, double> m;
  m["accuracy"] = report.accuracy;
  m["macro_f1"] = report.macro_f1;
  const auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) m[key] = *v;
  };
  put("auroc", report.auroc);
  put("iou_f1", report.iou_f1);
  put("token_precision", report.token_precision);
  put("token_recall", report.token_recall);
  put("token_f1", report.token_f1);
  put("auprc", report.auprc);
  put("attention_rationale_correlation", report.attention_rationale_correlation);
  put("comprehensiveness", report.comprehensiveness);
  put("sufficiency", report.sufficiency);
  put("gmb_subgroup", report.gmb_subgroup);
  put("gmb_bpsn", report.gmb_bpsn);
  put("gmb_bnsp", report.gmb_bnsp);
  return m;
}

}  // namespace sra
