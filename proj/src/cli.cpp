#include "sra/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sra/checkpoint.hpp"
#include "sra/pipeline.hpp"

namespace sra {

namespace fs = std::filesystem;
using nlohmann::json;

OutputStage::OutputStage(fs::path out_dir, const std::string& command)
    : out_dir_(std::move(out_dir)), command_(command) {
  fs::create_directories(out_dir_);
  staging_ = out_dir_ / (".staging-" + command + "-" + std::to_string(::getpid()));
  fs::remove_all(staging_);
  fs::create_directories(staging_);
}

OutputStage::~OutputStage() {
  if (done_) return;
  try {
    abandon();
  } catch (...) {
  }
}

void OutputStage::commit() {
  for (const auto& entry : fs::directory_iterator(staging_)) {
    const fs::path target = out_dir_ / entry.path().filename();
    if (fs::is_directory(target)) fs::remove_all(target);
    fs::rename(entry.path(), target);
  }
  fs::remove_all(staging_);
  done_ = true;
}

void OutputStage::abandon() {
  done_ = true;
  if (!fs::exists(staging_)) return;
  if (fs::is_empty(staging_)) {
    fs::remove(staging_);
    return;
  }
  const fs::path root = out_dir_ / "quarantine";
  fs::create_directories(root);
  for (int n = 1;; ++n) {
    const fs::path candidate = root / (command_ + "-" + std::to_string(n));
    if (!fs::exists(candidate)) {
      fs::rename(staging_, candidate);
      quarantined_ = candidate;
      return;
    }
  }
}

namespace {

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string resolved_config_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << "# resolved configuration; usable with --config\n";
  for (const auto& [key, value] : cfg.values) out << key << " = " << value << "\n";
  return out.str();
}

// Options shared by every command.
struct CommonArgs {
  std::map<std::string, std::string> flags;
  std::string config_path;

  RunConfig resolve() const {
    std::map<std::string, std::string> file_values;
    if (!config_path.empty()) file_values = read_config_file(config_path);
    return resolve_config(file_values, config_path.empty() ? "file" : config_path, flags);
  }
};

void add_global_flags(CLI::App* app, CommonArgs& args) {
  app->add_option("--config", args.config_path, "Flat key = value configuration file");
  for (const std::string key : {"profile", "seed", "out_dir"}) {
    auto* opt = app->add_option_function<std::string>(
        "--" + dashed(key), [&args, key](const std::string& v) { args.flags[key] = v; }, "Config key " + key);
    if (key == "profile") opt->check(CLI::IsMember(profile_names()));
  }
}

void add_config_flags(CLI::App* app, CommonArgs& args, const std::set<std::string>& exclude = {}) {
  add_global_flags(app, args);
  for (const auto& [key, _] : profile_defaults("desk")) {
    if (exclude.contains(key) || key == "profile" || key == "seed" || key == "out_dir") continue;
    app->add_option_function<std::string>(
        "--" + dashed(key), [&args, key](const std::string& v) { args.flags[key] = v; }, "Config key " + key);
  }
  const auto alias = [&](const std::string& flag, const std::string& key) {
    if (exclude.contains(key)) return;
    app->add_option_function<std::string>(
        flag, [&args, key](const std::string& v) { args.flags[key] = v; }, "Alias of --" + dashed(key));
  };
  alias("--lr", "learning_rate");
  alias("--layer", "supervision_layer");
  alias("--head", "supervision_head");
  app->add_flag_callback("--no-clip", [&args] { args.flags["clip_norm"] = "none"; }, "Disable gradient clipping");
}

Dataset load_configured_dataset(const RunConfig& cfg) {
  if (cfg.data.empty()) throw UsageError("no dataset given (use --data)");
  return load_dataset_any(cfg.data);
}

SplitAssignment configured_split(const RunConfig& cfg, const Dataset& ds) {
  if (!cfg.split.empty()) return read_split(cfg.split);
  return stratified_split(ds, {0.8, 0.1, 0.1}, cfg.split_seed);
}

json dataset_json(const RunConfig& cfg, const Dataset& ds) {
  return {{"path", fs::absolute(cfg.data).lexically_normal().string()},
          {"fingerprint", fingerprint(ds)},
          {"num_examples", ds.examples.size()},
          {"num_classes", ds.num_classes},
          {"label_names", ds.label_names}};
}

json history_json(const RunHistory& history, double alpha) {
  json epochs = json::array();
  for (std::size_t i = 0; i < history.epochs.size(); ++i) {
    const auto& e = history.epochs[i];
    epochs.push_back({{"epoch", i},
                      {"ce", e.ce},
                      {"aal", e.aal},
                      {"weighted_aal", alpha * e.aal},
                      {"total", e.total},
                      {"gated_examples", e.gated_examples},
                      {"steps", e.steps},
                      {"val_macro_f1", e.val_macro_f1}});
  }
  return epochs;
}

Vocabulary vocabulary_from(const json& manifest) {
  Vocabulary vocab;
  const auto& tokens = manifest.at("vocabulary");
  for (std::size_t i = kNumSpecialTokens; i < tokens.size(); ++i) vocab.add(tokens[i].get<std::string>());
  return vocab;
}

json vocabulary_json(const Vocabulary& vocab) {
  json tokens = json::array();
  for (int i = 0; i < vocab.size(); ++i) tokens.push_back(vocab.token(i));
  return tokens;
}

int cmd_synth(const RunConfig& cfg, int examples, int classes, std::ostream& out) {
  if (examples < 1) throw UsageError("--examples must be >= 1");
  const SyntheticSpec spec = default_synthetic_spec(classes, examples, cfg.train.seed);
  const Dataset ds = generate_synthetic(spec);
  const SplitAssignment split = stratified_split(ds, {0.8, 0.1, 0.1}, cfg.train.seed);
  OutputStage stage(cfg.out_dir, "synth");
  write_dataset(stage.file("dataset.jsonl"), ds);
  write_split(stage.file("split.json"), split);
  write_json(stage.file("manifest.json"), {{"command", "synth"},
                                           {"seed", cfg.train.seed},
                                           {"examples", examples},
                                           {"classes", classes},
                                           {"vocab_size", spec.vocab_size},
                                           {"group_mention_rate", spec.group_mention_rate},
                                           {"split_sizes", {split.train.size(), split.validation.size(), split.test.size()}},
                                           {"fingerprint", fingerprint(ds)},
                                           {"created_at", utc_timestamp()}});
  stage.commit();
  out << "wrote " << ds.examples.size() << " examples (" << classes << " classes) to "
      << stage.final_path("dataset.jsonl").string() << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const Dataset ds = load_configured_dataset(cfg);
  const SplitAssignment split = configured_split(cfg, ds);
  const Experiment experiment = prepare_experiment(ds, split, cfg);
  OutputStage stage(cfg.out_dir, "train");

  ModelConfig model = experiment.model;
  const TrainResult result = train(init_model(model), experiment.train, experiment.validation, cfg.train);

  json manifest = {{"command", "train"},
                   {"config", cfg.to_json()},
                   {"model", to_json(model)},
                   {"dataset", dataset_json(cfg, ds)},
                   {"split", {{"file", "split.json"},
                              {"seed", split.seed},
                              {"sizes", {split.train.size(), split.validation.size(), split.test.size()}}}},
                   {"vocabulary_size", experiment.vocab.size()},
                   {"history", history_json(result.history, cfg.train.alpha)},
                   {"best_epoch", result.history.best_epoch},
                   {"total_steps", result.total_steps}};
  json checkpoint_manifest = manifest;
  checkpoint_manifest["vocabulary"] = vocabulary_json(experiment.vocab);
  save_checkpoint(stage.file("checkpoint.bin"), result.best, checkpoint_manifest);
  write_split(stage.file("split.json"), split);
  write_json(stage.file("history.json"), manifest["history"]);
  write_text(stage.file("resolved.conf"), resolved_config_text(cfg));
  manifest["created_at"] = utc_timestamp();
  write_json(stage.file("manifest.json"), manifest);
  stage.commit();

  for (std::size_t i = 0; i < result.history.epochs.size(); ++i) {
    const auto& e = result.history.epochs[i];
    out << "epoch " << i << "  ce " << fixed(e.ce) << "  aal " << fixed(e.aal) << "  total " << fixed(e.total)
        << "  val macro F1 " << fixed(e.val_macro_f1) << (static_cast<int>(i) == result.history.best_epoch ? "  *" : "")
        << "\n";
  }
  out << "checkpoint: " << stage.final_path("checkpoint.bin").string() << "\n";
  return 0;
}

struct LoadedModel {
  Checkpoint checkpoint;
  Vocabulary vocab;
  fs::path dir;
  std::vector<std::string> label_names;
};

LoadedModel load_model(const std::string& path) {
  if (path.empty()) throw UsageError("no checkpoint given (use --checkpoint)");
  LoadedModel m;
  m.checkpoint = load_checkpoint(path);
  m.vocab = vocabulary_from(m.checkpoint.manifest);
  m.dir = fs::path(path).parent_path();
  if (m.checkpoint.manifest.contains("dataset")) {
    m.label_names = m.checkpoint.manifest["dataset"].value("label_names", std::vector<std::string>{});
  }
  return m;
}

Dataset dataset_for(const RunConfig& cfg, const LoadedModel& model) {
  if (!cfg.data.empty()) return load_dataset_any(cfg.data);
  const auto& m = model.checkpoint.manifest;
  if (m.contains("dataset")) return load_dataset_any(m["dataset"].at("path").get<std::string>());
  throw UsageError("no dataset given (use --data)");
}

std::vector<std::string> subset_ids(const RunConfig& cfg, const LoadedModel& model, const Dataset& ds,
                                    const std::string& which) {
  if (which == "all") {
    std::vector<std::string> ids;
    for (const auto& ex : ds.examples) ids.push_back(ex.id);
    return ids;
  }
  SplitAssignment split;
  if (!cfg.split.empty()) {
    split = read_split(cfg.split);
  } else if (fs::exists(model.dir / "split.json")) {
    split = read_split(model.dir / "split.json");
  } else {
    split = stratified_split(ds, {0.8, 0.1, 0.1}, cfg.split_seed);
  }
  if (which == "train") return split.train;
  if (which == "validation") return split.validation;
  if (which == "test") return split.test;
  throw UsageError("--subset must be train, validation, test or all");
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& which,
             const std::string& offline, int classes, std::ostream& out) {
  OutputStage stage(cfg.out_dir, "eval");
  MetricsReport report;
  json manifest = {{"command", "eval"}, {"config", cfg.to_json()}};
  if (!offline.empty()) {
    const auto evals = read_instance_evals(offline);
    if (evals.empty()) throw DataError("no instance records in " + offline);
    const int C = classes > 0 ? classes : static_cast<int>(evals.front().probabilities.size());
    report = offline_report(evals, C, cfg.report);
    write_json(stage.file("metrics.json"), to_json(report, false));
    manifest["offline"] = fs::absolute(offline).lexically_normal().string();
  } else {
    const LoadedModel model = load_model(checkpoint);
    const Dataset ds = dataset_for(cfg, model);
    const Dataset part = subset(ds, subset_ids(cfg, model, ds, which));
    const auto examples = prepare_examples(part, model.vocab, model.checkpoint.params.config().max_len);
    EvalOptions options;
    options.strategy = cfg.strategy;
    options.report = cfg.report;
    options.threads = cfg.threads;
    const EvalResult result = evaluate(model.checkpoint.params, examples, options);
    report = result.report;
    write_json(stage.file("metrics.json"), to_json(report, true));
    write_instance_evals(stage.file("predictions.jsonl").string(), result.evals);
    manifest["checkpoint"] = fs::absolute(checkpoint).lexically_normal().string();
    manifest["subset"] = which;
    manifest["dataset"] = {{"fingerprint", fingerprint(part)}, {"num_examples", part.examples.size()}};
    manifest["strategy"] = cfg.strategy.describe();
  }
  manifest["created_at"] = utc_timestamp();
  write_json(stage.file("eval_manifest.json"), manifest);
  stage.commit();

  const auto show = [&](const char* name, const std::optional<double>& v) {
    out << "  " << std::left << std::setw(34) << name << (v ? fixed(*v) : std::string("n/a")) << "\n";
  };
  out << "instances " << report.instances << " (with gold rationale " << report.explained_instances << ")\n";
  show("accuracy", report.accuracy);
  show("macro_f1", report.macro_f1);
  show("auroc", report.auroc);
  show("iou_f1", report.iou_f1);
  show("token_precision", report.token_precision);
  show("token_recall", report.token_recall);
  show("token_f1", report.token_f1);
  show("auprc", report.auprc);
  show("attention_rationale_correlation", report.attention_rationale_correlation);
  if (offline.empty()) {
    show("comprehensiveness", report.comprehensiveness);
    show("sufficiency", report.sufficiency);
  }
  show("gmb_subgroup", report.gmb_subgroup);
  show("gmb_bpsn", report.gmb_bpsn);
  show("gmb_bnsp", report.gmb_bnsp);
  out << "report: " << stage.final_path("metrics.json").string() << "\n";
  return 0;
}

std::vector<std::string> whitespace_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

int cmd_explain(const RunConfig& cfg, const std::string& checkpoint, const std::vector<std::string>& texts,
                const std::vector<std::string>& ids, const std::vector<std::string>& with_gold, std::ostream& out) {
  if (texts.empty() && ids.empty() && with_gold.empty()) {
    throw UsageError("nothing to explain (use --text, --ids or --with-gold)");
  }
  const LoadedModel model = load_model(checkpoint);
  const Parameters& params = model.checkpoint.params;
  const int max_len = params.config().max_len;
  const auto label_name = [&](int y) {
    return static_cast<std::size_t>(y) < model.label_names.size() ? model.label_names[static_cast<std::size_t>(y)]
                                                                    : std::to_string(y);
  };

  std::vector<HeatmapRow> rows;
  json explanations = json::array();
  const auto explain_one = [&](const std::string& name, const std::vector<std::string>& words, const std::string& text,
                               const Example* gold_source) {
    const Encoding enc = encode(words, text, model.vocab, max_len);
    const ForwardOutput fwd = forward(params, enc, false);
    const int y = argmax(fwd.probabilities);
    const std::set<int> rationale = extract_rationale(fwd.cls_attention, enc, cfg.strategy);
    RationaleMask gold;
    if (gold_source != nullptr) gold = rationale_for(*gold_source, enc);
    rows.push_back(heatmap_row(enc, fwd.cls_attention, words, gold_source ? &gold : nullptr,
                               name + " (predicted " + label_name(y) + ", p=" + fixed(fwd.probabilities(y), 3) + ")"));
    std::vector<std::string> rationale_words;
    for (int p : rationale) {
      const auto w = enc.word_index[static_cast<std::size_t>(p)];
      if (w) rationale_words.push_back(words[static_cast<std::size_t>(*w)]);
    }
    explanations.push_back({{"name", name},
                            {"predicted", y},
                            {"predicted_label", label_name(y)},
                            {"probabilities", std::vector<double>(fwd.probabilities.data(),
                                                                  fwd.probabilities.data() + fwd.probabilities.size())},
                            {"rationale_positions", rationale},
                            {"rationale_words", rationale_words},
                            {"attention", content_scores(fwd.cls_attention, enc)}});
  };

  for (std::size_t i = 0; i < texts.size(); ++i) {
    explain_one("text " + std::to_string(i + 1), whitespace_words(texts[i]), texts[i], nullptr);
  }
  if (!ids.empty() || !with_gold.empty()) {
    const Dataset ds = dataset_for(cfg, model);
    std::vector<std::string> order = ids;
    for (const auto& id : with_gold) {
      if (std::find(order.begin(), order.end(), id) == order.end()) order.push_back(id);
    }
    const std::set<std::string> gold_ids(with_gold.begin(), with_gold.end());
    for (const auto& id : order) {
      const auto it = std::find_if(ds.examples.begin(), ds.examples.end(), [&](const Example& e) { return e.id == id; });
      if (it == ds.examples.end()) throw DataError("no example with id '" + id + "'");
      explain_one(id + " [gold " + label_name(it->label) + "]", it->words, it->text,
                  gold_ids.contains(id) ? &*it : nullptr);
    }
  }

  OutputStage stage(cfg.out_dir, "explain");
  write_html(stage.file("heatmap.html"), rows);
  write_json(stage.file("explanations.json"),
             {{"strategy", cfg.strategy.describe()}, {"explanations", explanations}});
  stage.commit();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << render_terminal(rows[i]);
    out << "rationale: ";
    for (const auto& w : explanations[i]["rationale_words"]) out << w.get<std::string>() << ' ';
    out << "\n\n";
  }
  out << "heatmap: " << stage.final_path("heatmap.html").string() << "\n";
  return 0;
}

const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> columns = {
      "accuracy", "macro_f1", "auroc", "iou_f1", "token_precision", "token_recall", "token_f1", "auprc",
      "attention_rationale_correlation", "comprehensiveness", "sufficiency", "best_epoch"};
  return columns;
}

struct GridPoint {
  double alpha = 0.0;
  int layer = 0;
  int head = 0;
};

std::string head_name(int head) { return head == kMeanOverHeads ? "mean" : std::to_string(head); }

int cmd_ablate(RunConfig cfg, const std::vector<std::string>& alpha_list, const std::vector<std::string>& layer_list,
               const std::vector<std::string>& head_list, const std::vector<std::string>& seed_list,
               std::ostream& out, std::ostream& err) {
  const auto as_values = [&](const std::vector<std::string>& given, const std::string& key) {
    return given.empty() ? std::vector<std::string>{cfg.values.at(key)} : given;
  };
  std::vector<GridPoint> grid;
  for (const auto& a : as_values(alpha_list, "alpha")) {
    for (const auto& l : as_values(layer_list, "supervision_layer")) {
      for (const auto& h : as_values(head_list, "supervision_head")) {
        auto values = cfg.values;
        values["alpha"] = a;
        values["supervision_layer"] = l;
        values["supervision_head"] = h;
        const RunConfig point = config_from_values(values);
        grid.push_back({point.train.alpha, point.model.supervision_layer, point.model.supervision_head});
      }
    }
  }
  std::vector<std::uint64_t> seeds;
  for (const auto& s : as_values(seed_list, "seed")) {
    auto values = cfg.values;
    values["seed"] = s;
    seeds.push_back(config_from_values(values).train.seed);
  }

  const Dataset ds = load_configured_dataset(cfg);
  const SplitAssignment split = configured_split(cfg, ds);
  const Experiment experiment = prepare_experiment(ds, split, cfg);
  OutputStage stage(cfg.out_dir, "ablate");

  const auto run_point = [&](const GridPoint& g, std::uint64_t seed) {
    RunConfig c = cfg;
    c.train.alpha = g.alpha;
    c.train.seed = seed;
    c.model.supervision_layer = g.layer;
    c.model.supervision_head = g.head;
    Experiment e = experiment;
    e.model.supervision_layer = g.layer;
    e.model.supervision_head = g.head;
    e.model.validate();
    const ExperimentResult r = run_experiment(e, c);
    auto metrics = headline_metrics(r.test.report);
    metrics["best_epoch"] = r.training.history.best_epoch;
    out << "alpha " << format_number(g.alpha) << "  layer " << g.layer << "  head " << head_name(g.head) << "  seed "
        << seed << "  macro F1 " << fixed(metrics["macro_f1"]) << "  IoU F1 "
        << (metrics.contains("iou_f1") ? fixed(metrics["iou_f1"]) : std::string("n/a")) << "\n";
    return metrics;
  };

  std::ostringstream csv;
  csv << "row,alpha,layer,head,seed";
  for (const auto& c : sweep_columns()) csv << ',' << c;
  csv << '\n';
  const auto csv_row = [&](const std::string& kind, const GridPoint& g, const std::string& seed,
                           const std::map<std::string, double>& m) {
    csv << kind << ',' << format_number(g.alpha) << ',' << g.layer << ',' << head_name(g.head) << ',' << seed;
    for (const auto& c : sweep_columns()) {
      csv << ',';
      if (auto it = m.find(c); it != m.end()) csv << format_number(it->second);
    }
    csv << '\n';
  };

  json points = json::array();
  std::vector<AggregateReport> aggregates;
  bool partial = false;
  for (const auto& g : grid) {
    AggregateReport agg;
    const auto one = [&](std::uint64_t seed) { return run_point(g, seed); };
    if (seeds.size() >= 2) {
      agg = multi_seed_run(seeds, one);
    } else {
      try {
        agg = aggregate({{seeds.front(), one(seeds.front())}});
      } catch (const std::exception& e) {
        agg.failures.push_back("seed " + std::to_string(seeds.front()) + ": " + e.what());
        agg.partial = true;
      }
    }
    partial = partial || agg.partial;
    for (const auto& f : agg.failures) err << "run failed (alpha " << format_number(g.alpha) << "): " << f << "\n";
    json runs = json::array();
    for (const auto& row : agg.rows) {
      csv_row("run", g, std::to_string(row.seed), row.metrics);
      runs.push_back({{"seed", row.seed}, {"metrics", row.metrics}});
    }
    csv_row("mean", g, "", agg.mean);
    csv_row("std", g, "", agg.stddev);
    points.push_back({{"alpha", g.alpha},
                      {"layer", g.layer},
                      {"head", head_name(g.head)},
                      {"runs", runs},
                      {"mean", agg.mean},
                      {"std", agg.stddev},
                      {"failures", agg.failures},
                      {"partial", agg.partial}});
    aggregates.push_back(std::move(agg));
  }

  // Alpha trend per (layer, head): IoU F1 should not fall as alpha grows,
  // while macro F1 stays within a narrow band.
  json trends = json::array();
  std::set<std::pair<int, int>> combos;
  for (const auto& g : grid) combos.insert({g.layer, g.head});
  for (const auto& [layer, head] : combos) {
    std::vector<std::pair<double, std::size_t>> by_alpha;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (grid[i].layer == layer && grid[i].head == head) by_alpha.push_back({grid[i].alpha, i});
    }
    if (by_alpha.size() < 2) continue;
    std::sort(by_alpha.begin(), by_alpha.end());
    bool monotone = true;
    double f1_min = 1.0, f1_max = 0.0;
    json series = json::array();
    std::optional<double> previous;
    for (const auto& [alpha, i] : by_alpha) {
      const auto& mean = aggregates[i].mean;
      const double iou_value = mean.contains("iou_f1") ? mean.at("iou_f1") : 0.0;
      const double f1 = mean.contains("macro_f1") ? mean.at("macro_f1") : 0.0;
      if (previous && iou_value < *previous - 0.02) monotone = false;
      previous = iou_value;
      f1_min = std::min(f1_min, f1);
      f1_max = std::max(f1_max, f1);
      series.push_back({{"alpha", alpha}, {"iou_f1", iou_value}, {"macro_f1", f1}});
    }
    const double range = f1_max - f1_min;
    trends.push_back({{"layer", layer},
                      {"head", head_name(head)},
                      {"series", series},
                      {"iou_f1_non_decreasing", monotone},
                      {"iou_f1_tolerance", 0.02},
                      {"macro_f1_range", range},
                      {"macro_f1_stable", range <= 0.05},
                      {"macro_f1_tolerance", 0.05}});
    out << "alpha trend (layer " << layer << ", head " << head_name(head) << "): IoU F1 non-decreasing within 0.02: "
        << (monotone ? "yes" : "no") << "; macro F1 range " << fixed(range) << (range <= 0.05 ? " (stable)" : " (unstable)")
        << "\n";
  }

  write_text(stage.file("sweep.csv"), csv.str());
  write_json(stage.file("sweep.json"), {{"points", points}, {"alpha_trend", trends}, {"partial", partial}});
  write_json(stage.file("ablate_manifest.json"), {{"command", "ablate"},
                                                  {"config", cfg.to_json()},
                                                  {"dataset", dataset_json(cfg, ds)},
                                                  {"seeds", seeds},
                                                  {"grid_points", grid.size()},
                                                  {"created_at", utc_timestamp()}});
  if (partial) throw std::runtime_error("some sweep runs failed; table is partial");
  stage.commit();
  out << "table: " << stage.final_path("sweep.csv").string() << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Supervised rational attention lab: train attention-aligned classifiers and evaluate their rationales"};
  app.require_subcommand(1);
  CommonArgs args;
  add_global_flags(&app, args);

  auto* synth = app.add_subcommand("synth", "Generate a planted-rationale synthetic dataset and split");
  int examples = 2000;
  int classes = 3;
  add_global_flags(synth, args);
  synth->add_option("--examples", examples, "Number of examples")->capture_default_str();
  synth->add_option("--classes", classes, "Number of classes (2 or 3)")->check(CLI::Range(2, 3))->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "Train a model; writes checkpoint, manifest and history");
  add_config_flags(train_cmd, args);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint or stored predictions; writes a metrics report");
  std::string checkpoint;
  std::string which = "test";
  std::string offline;
  int offline_classes = 0;
  add_config_flags(eval_cmd, args);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file");
  eval_cmd->add_option("--subset", which, "train, validation, test or all")->capture_default_str();
  eval_cmd->add_option("--offline", offline, "Instance records (JSONL) to score without a model");
  eval_cmd->add_option("--classes", offline_classes, "Class count for --offline (default: from the records)");

  auto* explain_cmd = app.add_subcommand("explain", "Render attention heatmaps and extracted rationales");
  std::vector<std::string> texts;
  std::string ids, with_gold;
  add_config_flags(explain_cmd, args);
  explain_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file");
  explain_cmd->add_option("--text", texts, "Input sentence (repeatable)");
  explain_cmd->add_option("--ids", ids, "Comma-separated dataset ids");
  explain_cmd->add_option("--with-gold", with_gold, "Comma-separated dataset ids rendered with gold underlining");

  auto* ablate_cmd = app.add_subcommand("ablate", "Sweep alpha, supervised layer or head over several seeds");
  std::string alphas, layers, heads, seeds;
  add_config_flags(ablate_cmd, args, {"alpha", "supervision_layer", "supervision_head"});
  ablate_cmd->add_option("--alpha", alphas, "Comma-separated alpha values");
  ablate_cmd->add_option("--layers", layers, "Comma-separated supervised layers");
  ablate_cmd->add_option("--head,--heads", heads, "Comma-separated heads; 'mean' averages all heads");
  ablate_cmd->add_option("--seeds", seeds, "Comma-separated seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    const RunConfig cfg = args.resolve();
    if (synth->parsed()) return cmd_synth(cfg, examples, classes, out);
    if (train_cmd->parsed()) return cmd_train(cfg, out);
    if (eval_cmd->parsed()) {
      if (offline.empty() && checkpoint.empty()) throw UsageError("eval needs --checkpoint or --offline");
      return cmd_eval(cfg, checkpoint, which, offline, offline_classes, out);
    }
    if (explain_cmd->parsed()) return cmd_explain(cfg, checkpoint, texts, split_list(ids), split_list(with_gold), out);
    if (ablate_cmd->parsed()) {
      return cmd_ablate(cfg, split_list(alphas), split_list(layers), split_list(heads), split_list(seeds), out, err);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace sra
