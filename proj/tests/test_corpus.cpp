#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "sra/corpus.hpp"

using namespace sra;

namespace {

std::string hatexplain_record(const std::string& id, const std::string& labels_json, const std::string& extra = "") {
  return "\"" + id + "\": {\"post_id\": \"" + id + "\", \"post_tokens\": [\"you\", \"are\", \"vile\"], " +
         "\"annotators\": " + labels_json + ", \"rationales\": [[0, 0, 1], [0, 1, 1]]" + extra + "}";
}

std::string annotators(std::initializer_list<int> labels, const std::string& target = "[\"None\"]") {
  std::string out = "[";
  bool first = true;
  for (int l : labels) {
    if (!first) out += ", ";
    first = false;
    out += "{\"label\": " + std::to_string(l) + ", \"annotator_id\": 1, \"target\": " + target + "}";
  }
  return out + "]";
}

Dataset parse_hx(const std::string& body) {
  std::istringstream in("{" + body + "}");
  return parse_hatexplain(in);
}

Dataset parse_br(const std::string& csv) {
  std::istringstream in(csv);
  return parse_hatebrxplain(in);
}

Dataset two_class(int n0, int n1) {
  Dataset ds;
  ds.num_classes = 2;
  ds.label_names = {"normal", "offensive"};
  for (int i = 0; i < n0 + n1; ++i) {
    Example ex;
    ex.id = "e" + std::to_string(i);
    ex.words = {"w"};
    ex.label = i < n0 ? 0 : 1;
    ds.examples.push_back(ex);
  }
  return ds;
}

}  // namespace

TEST_CASE("majority label with lowest-index tie break") {
  CHECK(majority_label({2, 2, 0}, 3) == 2);
  CHECK(majority_label({0, 1, 2}, 3) == 0);
  CHECK(majority_label({1, 2}, 3) == 1);
}

TEST_CASE("HateXplain-shaped records") {
  const auto ds = parse_hx(hatexplain_record("p1", annotators({2, 2, 0}, "[\"Women\", \"None\"]")) + ", " +
                           hatexplain_record("p2", annotators({0, 1, 2}, "[\"Islam\"]")));
  REQUIRE(ds.examples.size() == 2);
  CHECK(ds.num_classes == 3);
  const auto& p1 = *std::find_if(ds.examples.begin(), ds.examples.end(), [](const Example& e) { return e.id == "p1"; });
  const auto& p2 = *std::find_if(ds.examples.begin(), ds.examples.end(), [](const Example& e) { return e.id == "p2"; });
  CHECK(p1.label == 2);
  CHECK(p2.label == 0);
  CHECK(p1.annotator_word_masks == std::vector<WordMask>{{0, 0, 1}, {0, 1, 1}});
  CHECK(p1.target_groups == std::set<std::string>{"Women"});
  CHECK(p2.target_groups == std::set<std::string>{"Islam"});
  CHECK(p1.words == std::vector<std::string>{"you", "are", "vile"});
}

TEST_CASE("HateXplain string labels are accepted") {
  const std::string body =
      "\"s1\": {\"post_tokens\": [\"a\"], \"annotators\": [{\"label\": \"hatespeech\", \"target\": []}, "
      "{\"label\": \"offensive\", \"target\": []}, {\"label\": \"hatespeech\", \"target\": []}], \"rationales\": []}";
  CHECK(parse_hx(body).examples[0].label == 2);
}

TEST_CASE("HateXplain errors name the record") {
  SUBCASE("rationale length mismatch") {
    const std::string body =
        "\"bad7\": {\"post_tokens\": [\"a\", \"b\"], \"annotators\": [{\"label\": 1, \"target\": []}], "
        "\"rationales\": [[1, 0, 0]]}";
    try {
      parse_hx(body);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("bad7") != std::string::npos);
    }
  }
  SUBCASE("missing field") {
    const std::string body = "\"bad8\": {\"post_tokens\": [\"a\"], \"rationales\": []}";
    try {
      parse_hx(body);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("bad8") != std::string::npos);
      CHECK(std::string(e.what()).find("annotators") != std::string::npos);
    }
  }
}

TEST_CASE("HateBRXplain-shaped rows") {
  const auto ds = parse_br(
      "id,text,label,annotator_1_span,annotator_2_span\n"
      "r1,vai embora idiota,offensive,11:17,\n"
      "r2,bom dia,non-offensive,,\n");
  REQUIRE(ds.examples.size() == 2);
  CHECK(ds.num_classes == 2);
  CHECK(ds.examples[0].label == 1);
  CHECK(ds.examples[0].char_spans == std::vector<std::vector<CharSpan>>{{{11, 17}}});
  CHECK(ds.examples[0].words == std::vector<std::string>{"vai", "embora", "idiota"});
  CHECK(ds.examples[1].label == 0);
  CHECK(ds.examples[1].char_spans.empty());
}

TEST_CASE("HateBRXplain rejects bad spans and labels") {
  CHECK_THROWS_AS(parse_br("id,text,label,annotator_1_span\nr9,curto,offensive,2:40\n"), DataError);
  CHECK_THROWS_AS(parse_br("id,text,label\nr9,curto,maybe\n"), DataError);
}

TEST_CASE("canonical format round-trip") {
  auto ds = parse_hx(hatexplain_record("p1", annotators({1, 1, 0}, "[\"Women\"]")));
  auto br = parse_br("id,text,label,annotator_1_span,annotator_2_span\nr1,\"vai, embora\",offensive,0:3;5:8,1:2\n");
  auto syn = generate_synthetic(default_synthetic_spec(3, 50, 4));
  for (const Dataset* d : {&ds, &br, &syn}) {
    std::stringstream buf;
    write_dataset(buf, *d);
    CHECK(read_dataset(buf) == *d);
  }
}

TEST_CASE("stratified split of 100 examples") {
  const Dataset ds = two_class(60, 40);
  const auto split = stratified_split(ds, {0.8, 0.1, 0.1}, 7);
  CHECK(split.train.size() == 80);
  CHECK(split.validation.size() == 10);
  CHECK(split.test.size() == 10);

  std::map<std::string, int> label_of;
  for (const auto& e : ds.examples) label_of[e.id] = e.label;
  std::set<std::string> all;
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    int ones = 0;
    for (const auto& id : *part) {
      CHECK(all.insert(id).second);
      ones += label_of[id];
    }
    CHECK(std::abs(static_cast<double>(ones) / part->size() - 0.4) <= 0.02);
  }
  CHECK(all.size() == 100);
  CHECK(stratified_split(ds, {0.8, 0.1, 0.1}, 7) == split);
}

TEST_CASE("stratification holds on uneven synthetic classes") {
  auto spec = default_synthetic_spec(3, 997, 11);
  spec.class_priors = {0.5, 0.3, 0.2};
  const Dataset ds = generate_synthetic(spec);
  const auto split = stratified_split(ds, {0.8, 0.1, 0.1}, 3);
  std::map<std::string, int> label_of;
  std::vector<double> full(3, 0.0);
  for (const auto& e : ds.examples) {
    label_of[e.id] = e.label;
    full[static_cast<std::size_t>(e.label)] += 1.0 / ds.examples.size();
  }
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    std::vector<double> freq(3, 0.0);
    for (const auto& id : *part) freq[static_cast<std::size_t>(label_of[id])] += 1.0 / part->size();
    for (int c = 0; c < 3; ++c) CHECK(std::abs(freq[static_cast<std::size_t>(c)] - full[static_cast<std::size_t>(c)]) <= 0.02);
  }
}

TEST_CASE("stratified split errors") {
  CHECK_THROWS(stratified_split(two_class(60, 40), {0.5, 0.5, 0.1}, 7));
  CHECK_THROWS(stratified_split(two_class(60, 2), {0.8, 0.1, 0.1}, 7));
}

TEST_CASE("synthetic generator contract") {
  auto spec = default_synthetic_spec(2, 300, 3);
  spec.min_triggers = spec.max_triggers = 1;
  const Dataset ds = generate_synthetic(spec);
  CHECK(ds.num_classes == 2);
  std::set<std::string> lexicon;
  for (int id : spec.trigger_lexicons[0]) lexicon.insert(synthetic_word(spec, id));
  for (const auto& ex : ds.examples) {
    if (ex.label == 1) {
      REQUIRE(ex.annotator_word_masks.size() == 1);
      const auto& mask = ex.annotator_word_masks[0];
      CHECK(std::count(mask.begin(), mask.end(), 1) == 1);
      for (std::size_t i = 0; i < ex.words.size(); ++i) CHECK((mask[i] == 1) == lexicon.contains(ex.words[i]));
    } else {
      CHECK(ex.annotator_word_masks.empty());
      for (const auto& w : ex.words) CHECK_FALSE(lexicon.contains(w));
    }
    for (const auto& tag : ex.target_groups) {
      CHECK(std::find(ex.words.begin(), ex.words.end(), tag) != ex.words.end());
    }
  }
}

TEST_CASE("synthetic ground truth with three classes") {
  const auto spec = default_synthetic_spec(3, 400, 5);
  const Dataset ds = generate_synthetic(spec);
  for (const auto& ex : ds.examples) {
    if (ex.label == 0) continue;
    std::set<std::string> lexicon;
    for (int id : spec.trigger_lexicons[static_cast<std::size_t>(ex.label - 1)]) lexicon.insert(synthetic_word(spec, id));
    REQUIRE(ex.annotator_word_masks.size() == 1);
    int marked = 0;
    for (std::size_t i = 0; i < ex.words.size(); ++i) {
      CHECK((ex.annotator_word_masks[0][i] == 1) == lexicon.contains(ex.words[i]));
      marked += ex.annotator_word_masks[0][i];
    }
    CHECK(marked >= 1);
  }
}

TEST_CASE("synthetic determinism and prior bound") {
  CHECK(generate_synthetic(default_synthetic_spec(2, 200, 3)) == generate_synthetic(default_synthetic_spec(2, 200, 3)));
  CHECK_FALSE(generate_synthetic(default_synthetic_spec(2, 200, 3)) == generate_synthetic(default_synthetic_spec(2, 200, 4)));
  const Dataset ds = generate_synthetic(default_synthetic_spec(2, 2000, 9));
  const auto ones = std::count_if(ds.examples.begin(), ds.examples.end(), [](const Example& e) { return e.label == 1; });
  CHECK(ones >= 900);
  CHECK(ones <= 1100);
}

TEST_CASE("synthetic spec validation") {
  auto spec = default_synthetic_spec(2, 10, 1);
  spec.vocab_size = 14;  // 12 triggers + 4 groups do not fit
  CHECK_THROWS(generate_synthetic(spec));
  spec = default_synthetic_spec(2, 10, 1);
  spec.class_priors = {0.7, 0.7};
  CHECK_THROWS(generate_synthetic(spec));
}

TEST_CASE("subset keeps listed order") {
  const Dataset ds = two_class(3, 3);
  const Dataset sub = subset(ds, {"e4", "e1"});
  REQUIRE(sub.examples.size() == 2);
  CHECK(sub.examples[0].id == "e4");
  CHECK(sub.examples[1].id == "e1");
  CHECK_THROWS_AS(subset(ds, {"nope"}), DataError);
}
