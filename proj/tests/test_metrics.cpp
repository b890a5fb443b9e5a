#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "sra/metrics.hpp"

using namespace sra;

namespace {

InstanceEval labelled(int gold, int predicted) {
  InstanceEval e;
  e.gold = gold;
  e.predicted = predicted;
  return e;
}

InstanceEval with_sets(std::set<int> pred, std::set<int> gold, std::vector<int> content = {1, 2, 3, 4, 5}) {
  InstanceEval e;
  e.predicted_rationale = std::move(pred);
  e.gold_rationale = std::move(gold);
  e.content_positions = std::move(content);
  e.attention.assign(e.content_positions.size(), 0.0);
  return e;
}

InstanceEval scored(int gold, double toxicity, std::set<std::string> groups) {
  InstanceEval e;
  e.gold = gold;
  e.toxicity = toxicity;
  e.target_groups = std::move(groups);
  return e;
}

double max_delta(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return 1.0;
  return a ? std::abs(*a - *b) : 0.0;
}

}  // namespace

TEST_CASE("accuracy and macro F1") {
  std::vector<InstanceEval> all_right = {labelled(0, 0), labelled(1, 1), labelled(2, 2)};
  CHECK(accuracy(all_right) == 1.0);
  CHECK(macro_f1(all_right, 3) == 1.0);

  std::vector<InstanceEval> confusion = {labelled(0, 0), labelled(0, 1), labelled(1, 1), labelled(1, 1)};
  CHECK(accuracy(confusion) == 0.75);
  CHECK(macro_f1(confusion, 2) == doctest::Approx((2.0 / 3.0 + 0.8) / 2.0).epsilon(1e-12));

  std::vector<InstanceEval> single = {labelled(1, 1), labelled(1, 1)};
  CHECK(macro_f1(single, 3) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("AUROC fixtures") {
  const std::vector<double> s = {0.9, 0.8, 0.7, 0.1};
  const std::vector<int> y = {1, 0, 1, 0};
  CHECK(*auroc(s, y) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(*auroc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
  CHECK(*auroc(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{0, 1, 1}) == 0.5);
  CHECK_FALSE(auroc(std::vector<double>{0.5, 0.6}, std::vector<int>{1, 1}).has_value());
}

TEST_CASE("IoU F1 and token PRF fixtures") {
  std::vector<InstanceEval> one = {with_sets({2, 3}, {2, 3, 4})};
  CHECK(iou(one[0].predicted_rationale, one[0].gold_rationale) == doctest::Approx(2.0 / 3.0));
  CHECK(iou_f1(one) == 1.0);
  const auto prf = token_prf(one);
  CHECK(prf.precision == 1.0);
  CHECK(prf.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(prf.f1 == doctest::Approx(0.8).epsilon(1e-12));

  std::vector<InstanceEval> same = {with_sets({1}, {1}), with_sets({2, 4}, {2, 4})};
  CHECK(iou_f1(same) == 1.0);
  std::vector<InstanceEval> disjoint = {with_sets({1}, {2}), with_sets({3}, {4, 5})};
  CHECK(iou_f1(disjoint) == 0.0);

  std::vector<InstanceEval> empty_pred = {with_sets({}, {2, 3})};
  const auto degenerate = token_prf(empty_pred);
  CHECK(degenerate.precision == 0.0);
  CHECK(degenerate.recall == 0.0);
  CHECK(iou(std::set<int>{}, std::set<int>{}) == 1.0);
  CHECK(iou(std::set<int>{1}, std::set<int>{}) == 0.0);
}

TEST_CASE("average precision fixtures") {
  CHECK(average_precision(std::vector<double>{0.9, 0.1}, std::vector<std::uint8_t>{0, 1}) == 0.5);
  CHECK(average_precision(std::vector<double>{0.9, 0.8, 0.1}, std::vector<std::uint8_t>{1, 1, 0}) == 1.0);
  // all tied: one threshold, precision = prevalence
  CHECK(average_precision(std::vector<double>{0.3, 0.3, 0.3, 0.3}, std::vector<std::uint8_t>{1, 0, 0, 0}) == 0.25);
}

TEST_CASE("average precision of random scores approaches prevalence") {
  Rng rng(123);
  std::vector<double> s;
  std::vector<std::uint8_t> r;
  for (int i = 0; i < 20000; ++i) {
    s.push_back(rng.uniform());
    r.push_back(rng.bernoulli(0.3) ? 1 : 0);
  }
  CHECK(std::abs(average_precision(s, r) - 0.3) <= 0.05);
}

TEST_CASE("bias AUCs on a hand-built fixture") {
  // 2 group-toxic, 1 group-normal, 2 background-normal, 1 background-toxic
  const std::vector<InstanceEval> evals = {
      scored(1, 0.9, {"g"}), scored(2, 0.4, {"g"}), scored(0, 0.6, {"g"}),
      scored(0, 0.2, {}),    scored(0, 0.5, {}),    scored(1, 0.7, {}),
  };
  const auto aucs = bias_group_aucs(evals, "g");
  // subgroup: toxic {0.9, 0.4} vs normal {0.6} -> 1 win of 2
  CHECK(*aucs.subgroup == 0.5);
  // BPSN: background toxic {0.7} vs group normal {0.6} -> 1 of 1
  CHECK(*aucs.bpsn == 1.0);
  // BNSP: group toxic {0.9, 0.4} vs background normal {0.2, 0.5} -> 3 of 4
  CHECK(*aucs.bnsp == 0.75);
  const auto o = oracle::group_aucs(evals, "g");
  CHECK(*o.subgroup == *aucs.subgroup);
  CHECK(*o.bpsn == *aucs.bpsn);
  CHECK(*o.bnsp == *aucs.bnsp);
  // perfectly separated scores
  const std::vector<InstanceEval> clean = {scored(1, 0.9, {"g"}), scored(0, 0.1, {"g"}), scored(1, 0.8, {}),
                                           scored(0, 0.2, {})};
  const auto perfect = bias_group_aucs(clean, "g");
  CHECK(*perfect.subgroup == 1.0);
  CHECK(*perfect.bpsn == 1.0);
  CHECK(*perfect.bnsp == 1.0);
  // a group with no normal members has no subgroup AUC
  CHECK_FALSE(bias_group_aucs(std::vector<InstanceEval>{scored(1, 0.9, {"h"}), scored(0, 0.1, {})}, "h").subgroup);
}

TEST_CASE("generalized mean") {
  CHECK(gmb(std::vector<double>{0.8, 0.8, 0.8}) == doctest::Approx(0.8).epsilon(1e-12));
  // direct evaluation: ((0.6^-5 + 0.9^-5) / 2)^(-1/5)
  const double expected = std::pow((std::pow(0.6, -5.0) + std::pow(0.9, -5.0)) / 2.0, -0.2);
  CHECK(gmb(std::vector<double>{0.6, 0.9}, -5.0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(gmb(std::vector<double>{0.6, 0.9}, -5.0) == doctest::Approx(0.672).epsilon(5e-4));
  CHECK(std::abs(gmb(std::vector<double>{0.6, 0.9, 0.3}, 1.0) - 0.6) <= 1e-12);
  CHECK_THROWS_AS(gmb(std::vector<double>{0.0, 0.5}, -5.0), std::domain_error);
  CHECK_THROWS(gmb(std::vector<double>{}, -5.0));
  CHECK_THROWS(gmb(std::vector<double>{1.2}, -5.0));

  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a;
    const int n = rng.between(1, 6);
    for (int i = 0; i < n; ++i) a.push_back(rng.uniform(0.05, 1.0));
    const double m = gmb(a, -5.0);
    CHECK(m >= *std::min_element(a.begin(), a.end()) - 1e-12);
    CHECK(m <= *std::max_element(a.begin(), a.end()) + 1e-12);
    auto lower = a;
    lower[static_cast<std::size_t>(rng.below(lower.size()))] *= 0.9;
    CHECK(gmb(lower, -5.0) <= m);
  }
}

TEST_CASE("metrics agree with brute-force oracles") {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto evals = oracle::random_instances(rng, 12, 12);
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& e : evals) {
      scores.push_back(e.toxicity);
      labels.push_back(e.gold > 0);
    }
    worst = std::max(worst, max_delta(auroc(scores, labels), oracle::pairwise_auc(scores, labels)));
    worst = std::max(worst, std::abs(iou_f1(evals) - oracle::iou_f1(evals)));
    const auto prf = token_prf(evals);
    const auto ref = oracle::token_prf(evals);
    worst = std::max({worst, std::abs(prf.precision - ref.precision), std::abs(prf.recall - ref.recall),
                      std::abs(prf.f1 - ref.f1)});
    worst = std::max(worst, max_delta(auprc(evals), oracle::mean_ap(evals)));
    for (const std::string g : {"alpha", "beta"}) {
      const auto got = bias_group_aucs(evals, g);
      const auto want = oracle::group_aucs(evals, g);
      worst = std::max({worst, max_delta(got.subgroup, want.subgroup), max_delta(got.bpsn, want.bpsn),
                        max_delta(got.bnsp, want.bnsp)});
    }
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("metrics are order-invariant and stable under self-concatenation") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    auto evals = oracle::random_instances(rng, 12, 10);
    const MetricsReport base = build_report(evals, 3);
    auto reversed = evals;
    std::reverse(reversed.begin(), reversed.end());
    auto doubled = evals;
    doubled.insert(doubled.end(), evals.begin(), evals.end());
    for (const auto* other : {&reversed, &doubled}) {
      const MetricsReport r = build_report(*other, 3);
      CHECK(std::abs(r.accuracy - base.accuracy) <= 1e-12);
      CHECK(std::abs(r.macro_f1 - base.macro_f1) <= 1e-12);
      CHECK(max_delta(r.auroc, base.auroc) <= 1e-12);
      CHECK(max_delta(r.iou_f1, base.iou_f1) <= 1e-12);
      CHECK(max_delta(r.token_f1, base.token_f1) <= 1e-12);
      CHECK(max_delta(r.auprc, base.auprc) <= 1e-12);
      CHECK(max_delta(r.gmb_bpsn, base.gmb_bpsn) <= 1e-12);
    }
    CHECK(max_delta(auprc(doubled, AuprcPooling::kMicro), auprc(evals, AuprcPooling::kMicro)) <= 1e-12);
  }
}

TEST_CASE("faithfulness probes") {
  Encoding enc;
  enc.ids = {kClsId, 5, 6, 7, kSepId, kPadId};
  enc.padding_mask = {1, 1, 1, 1, 1, 0};
  enc.content_mask = {0, 1, 1, 1, 0, 0};
  enc.offsets.assign(6, std::nullopt);
  enc.word_index = {std::nullopt, 0, 1, 2, std::nullopt, std::nullopt};

  const ProbabilityFn constant = [](const Encoding&) {
    Vector p(2);
    p << 0.3, 0.7;
    return p;
  };
  CHECK(comprehensiveness(constant, enc, {1, 2}) == 0.0);
  CHECK(sufficiency(constant, enc, {1}) == 0.0);

  // probability of class 1 grows with the number of id-7 tokens present
  const ProbabilityFn trigger = [](const Encoding& e) {
    const double hits = static_cast<double>(std::count(e.ids.begin(), e.ids.end(), 7));
    Vector p(2);
    p << 0.8 - 0.6 * hits, 0.2 + 0.6 * hits;
    return p;
  };
  CHECK(comprehensiveness(trigger, enc, {}) == 0.0);
  CHECK(sufficiency(trigger, enc, {1, 2, 3}) == 0.0);
  CHECK(comprehensiveness(trigger, enc, {3}) == doctest::Approx(0.6));
  CHECK(sufficiency(trigger, enc, {3}) == doctest::Approx(0.0));
  CHECK(sufficiency(trigger, enc, {1}) == doctest::Approx(0.6));
}

TEST_CASE("report JSON schema") {
  Rng rng(9);
  const auto evals = oracle::random_instances(rng, 12, 8);
  const auto j = to_json(build_report(evals, 3));
  std::set<std::string> keys;
  for (const auto& [k, _] : j.items()) keys.insert(k);
  CHECK(keys == std::set<std::string>{"classification", "explainability", "bias", "faithfulness", "per_group_auc",
                                      "counts"});
  CHECK(j["classification"].size() == 3);
  CHECK(j["explainability"].contains("iou_f1"));
  CHECK(j["bias"].contains("gmb_bpsn"));
  CHECK(j["counts"]["instances"] == evals.size());
  CHECK_FALSE(to_json(build_report(evals, 3), false).contains("faithfulness"));
}

TEST_CASE("instance records round-trip") {
  Rng rng(10);
  const auto evals = oracle::random_instances(rng, 12, 8);
  const auto path = (std::filesystem::temp_directory_path() / "sra_test_preds.jsonl").string();
  write_instance_evals(path, evals);
  CHECK(read_instance_evals(path) == evals);
  std::filesystem::remove(path);
}
