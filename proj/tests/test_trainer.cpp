#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sra/pipeline.hpp"
#include "sra/trainer.hpp"

using namespace sra;

namespace {

ModelConfig small_model(const Experiment& e) {
  ModelConfig c = e.model;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_ff = 32;
  c.max_len = e.model.max_len;
  return c;
}

Experiment synthetic_experiment(int classes, int examples, std::uint64_t seed, int max_len = 24) {
  const Dataset ds = generate_synthetic(default_synthetic_spec(classes, examples, seed));
  const auto split = stratified_split(ds, {0.8, 0.1, 0.1}, seed);
  RunConfig cfg = resolve_config({}, "", {{"max_len", std::to_string(max_len)}});
  return prepare_experiment(ds, split, cfg);
}

Parameters single_scalar_params(double value) {
  ModelConfig c;
  c.d_model = 4;
  c.n_layers = 1;
  c.n_heads = 1;
  c.d_ff = 4;
  c.vocab_size = 5;
  c.max_len = 3;
  c.num_classes = 2;
  c.supervision_layer = 0;
  Parameters p(c);
  p.classifier_bias()(0, 0) = value;
  return p;
}

}  // namespace

TEST_CASE("zero gradient and no decay leaves parameters unchanged") {
  const ModelConfig c = [] {
    ModelConfig m;
    m.d_model = 8;
    m.n_layers = 1;
    m.n_heads = 2;
    m.d_ff = 8;
    m.vocab_size = 10;
    m.max_len = 5;
    m.init_seed = 3;
    m.supervision_layer = 0;
    return m;
  }();
  Parameters p = init_model(c);
  const Parameters before = p;
  Gradients g(c);
  TrainConfig cfg;
  cfg.weight_decay = 0.0;
  AdamState state = make_adam_state(p);
  for (int i = 0; i < 5; ++i) optimizer_step(p, g, state, cfg);
  CHECK(p == before);
}

TEST_CASE("decoupled decay shrinks parameters under zero gradient") {
  Parameters p = single_scalar_params(2.0);
  Gradients g(p.config());
  TrainConfig cfg;
  cfg.weight_decay = 0.1;
  cfg.learning_rate = 0.01;
  AdamState state = make_adam_state(p);
  double previous = 2.0;
  for (int i = 0; i < 10; ++i) {
    optimizer_step(p, g, state, cfg);
    const double now = p.classifier_bias()(0, 0);
    CHECK(std::abs(now) < std::abs(previous));
    CHECK(now == doctest::Approx(previous * (1.0 - 0.01 * 0.1)).epsilon(1e-12));
    previous = now;
  }
}

TEST_CASE("constant gradient update approaches the learning rate") {
  Parameters p = single_scalar_params(0.0);
  Gradients g(p.config());
  g.classifier_bias()(0, 0) = 0.37;
  TrainConfig cfg;
  cfg.weight_decay = 0.0;
  cfg.learning_rate = 1e-3;
  AdamState state = make_adam_state(p);
  double step = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double before = p.classifier_bias()(0, 0);
    optimizer_step(p, g, state, cfg);
    step = before - p.classifier_bias()(0, 0);
    if (i == 0) {
      // first bias-corrected step is exactly lr * g / (|g| + eps)
      CHECK(step == doctest::Approx(1e-3 * 0.37 / (0.37 + 1e-8)).epsilon(1e-9));
    }
  }
  CHECK(step == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("global norm clipping") {
  Parameters g = single_scalar_params(0.0);
  g.classifier_bias()(0, 0) = 3.0;
  g.classifier_bias()(0, 1) = 4.0;
  CHECK(clip_global_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(global_norm(g) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.classifier_bias()(0, 0) == doctest::Approx(0.6));
  g.classifier_bias()(0, 0) = 0.1;
  g.classifier_bias()(0, 1) = 0.0;
  clip_global_norm(g, 1.0);
  CHECK(g.classifier_bias()(0, 0) == 0.1);
}

TEST_CASE("train config invariants") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.learning_rate = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.epochs = 0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.alpha = -1.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("one epoch over 32 examples with batch 16 takes two steps") {
  const Experiment e = synthetic_experiment(2, 60, 1);
  std::vector<TrainingExample> train32(e.train.begin(), e.train.begin() + 32);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.epochs = 1;
  int steps = 0;
  TrainHooks hooks;
  hooks.on_step = [&](const StepRecord&, const Parameters&) { ++steps; };
  const auto result = train(init_model(small_model(e)), train32, e.validation, cfg, hooks);
  CHECK(steps == 2);
  CHECK(result.total_steps == 2);
  CHECK(result.history.epochs.size() == 1);
  CHECK(result.history.epochs[0].steps == 2);
}

TEST_CASE("training is deterministic") {
  const Experiment e = synthetic_experiment(3, 120, 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.alpha = 0.0;
  cfg.seed = 4;
  const auto a = train(init_model(small_model(e)), e.train, e.validation, cfg);
  const auto b = train(init_model(small_model(e)), e.train, e.validation, cfg);
  REQUIRE(a.history.epochs.size() == b.history.epochs.size());
  for (std::size_t i = 0; i < a.history.epochs.size(); ++i) {
    CHECK(a.history.epochs[i].total == b.history.epochs[i].total);
    CHECK(a.history.epochs[i].val_macro_f1 == b.history.epochs[i].val_macro_f1);
  }
  CHECK(a.best == b.best);
}

TEST_CASE("alpha zero matches training without the alignment path") {
  const Experiment e = synthetic_experiment(3, 120, 3);
  TrainConfig cfg;
  cfg.alpha = 0.0;
  cfg.batch_size = 8;
  cfg.seed = 9;
  const auto record = [&](bool alignment) {
    std::vector<std::pair<double, Parameters>> steps;
    TrainHooks hooks;
    hooks.alignment_path = alignment;
    hooks.max_steps = 3;
    hooks.on_step = [&](const StepRecord& r, const Parameters& p) { steps.emplace_back(r.mean.ce, p); };
    train(init_model(small_model(e)), e.train, e.validation, cfg, hooks);
    return steps;
  };
  const auto with = record(true);
  const auto without = record(false);
  REQUIRE(with.size() == 3);
  REQUIRE(without.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(with[i].first == without[i].first);
    CHECK(with[i].second == without[i].second);
  }
}

TEST_CASE("changing alpha leaves the data order untouched") {
  const Experiment e = synthetic_experiment(2, 80, 5);
  const auto first_batch_ce = [&](double alpha) {
    TrainConfig cfg;
    cfg.alpha = alpha;
    cfg.batch_size = 8;
    double ce = 0.0;
    TrainHooks hooks;
    hooks.max_steps = 1;
    hooks.on_step = [&](const StepRecord& r, const Parameters&) { ce = r.mean.ce; };
    train(init_model(small_model(e)), e.train, e.validation, cfg, hooks);
    return ce;
  };
  // the first step's CE is computed before any update, so it depends only on
  // initialization, dropout and which examples form the batch
  CHECK(first_batch_ce(0.0) == first_batch_ce(10.0));
}

TEST_CASE("best epoch is the earliest validation maximum") {
  const Experiment e = synthetic_experiment(2, 300, 6);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 16;
  cfg.learning_rate = 3e-3;
  const auto result = train(init_model(small_model(e)), e.train, e.validation, cfg);
  std::vector<double> f1;
  for (const auto& ep : result.history.epochs) f1.push_back(ep.val_macro_f1);
  const auto best = std::max_element(f1.begin(), f1.end()) - f1.begin();
  CHECK(result.history.best_epoch == best);
}

TEST_CASE("planted triggers are learned with alignment") {
  const Experiment e = synthetic_experiment(2, 500, 7);
  TrainConfig cfg;
  cfg.alpha = 10.0;
  cfg.seed = 1;
  ModelConfig model = e.model;
  const auto result = train(init_model(model), e.train, e.validation, cfg);
  CHECK(result.history.epochs[static_cast<std::size_t>(result.history.best_epoch)].val_macro_f1 >= 0.95);
}

TEST_CASE("divergence names the batch") {
  const Experiment e = synthetic_experiment(2, 60, 8);
  Parameters p = init_model(small_model(e));
  p.classifier_weight()(0, 0) = std::numeric_limits<double>::infinity();
  TrainConfig cfg;
  try {
    train(p, e.train, e.validation, cfg);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& err) {
    CHECK(std::string(err.what()).find("epoch 0 batch 0") != std::string::npos);
  }
}

TEST_CASE("predictions do not depend on the thread count") {
  const Experiment e = synthetic_experiment(3, 100, 9);
  const Parameters p = init_model(small_model(e));
  const auto one = predict_all(p, e.train, 1);
  const auto four = predict_all(p, e.train, 4);
  REQUIRE(one.size() == four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].label == four[i].label);
    CHECK((one[i].probabilities.array() == four[i].probabilities.array()).all());
  }
}

TEST_CASE("multi-seed aggregation") {
  SUBCASE("identical runs have zero spread") {
    const std::vector<std::uint64_t> seeds = {3, 3, 3, 3, 3};
    const auto report = multi_seed_run(seeds, [](std::uint64_t s) {
      return std::map<std::string, double>{{"macro_f1", 0.1 * static_cast<double>(s)}};
    });
    CHECK(report.rows.size() == 5);
    CHECK(report.stddev.at("macro_f1") == 0.0);
  }
  SUBCASE("mean and sample deviation recomputed") {
    const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    const auto value = [](std::uint64_t s) { return std::sin(static_cast<double>(s)) * 0.3 + 0.5; };
    const auto report = multi_seed_run(seeds, [&](std::uint64_t s) {
      return std::map<std::string, double>{{"macro_f1", value(s)}};
    });
    REQUIRE(report.rows.size() == 5);
    double sum = 0.0;
    for (const auto& row : report.rows) sum += row.metrics.at("macro_f1");
    const double mean = sum / 5.0;
    double ss = 0.0;
    for (const auto& row : report.rows) ss += std::pow(row.metrics.at("macro_f1") - mean, 2);
    CHECK(std::abs(report.mean.at("macro_f1") - mean) <= 1e-12);
    CHECK(std::abs(report.stddev.at("macro_f1") - std::sqrt(ss / 4.0)) <= 1e-12);
    CHECK_FALSE(report.partial);
  }
  SUBCASE("a failing seed marks the report partial") {
    const std::vector<std::uint64_t> seeds = {1, 2, 3};
    const auto report = multi_seed_run(seeds, [](std::uint64_t s) -> std::map<std::string, double> {
      if (s == 2) throw std::runtime_error("boom");
      return {{"macro_f1", 1.0}};
    });
    CHECK(report.partial);
    CHECK(report.rows.size() == 2);
    REQUIRE(report.failures.size() == 1);
    CHECK(report.failures[0].find("seed 2") != std::string::npos);
  }
  SUBCASE("needs two seeds") {
    const std::vector<std::uint64_t> seeds = {1};
    CHECK_THROWS(multi_seed_run(seeds, [](std::uint64_t) { return std::map<std::string, double>{}; }));
  }
}
