#include "sra/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "sra/random.hpp"

namespace sra {

using nlohmann::json;

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  for (std::string w; in >> w;) words.push_back(std::move(w));
  return words;
}

const json& require(const json& record, const char* field, const std::string& id) {
  auto it = record.find(field);
  if (it == record.end()) {
    throw DataError("record '" + id + "': missing field '" + field + "'");
  }
  return *it;
}

int hatexplain_label(const json& value, const std::string& id) {
  if (value.is_number_integer()) {
    const int label = value.get<int>();
    if (label >= 0 && label < 3) return label;
  } else if (value.is_string()) {
    const std::string name = to_lower(value.get<std::string>());
    if (name == "normal") return 0;
    if (name == "offensive") return 1;
    if (name == "hatespeech" || name == "hate" || name == "hate speech") return 2;
  }
  throw DataError("record '" + id + "': unknown annotator label " + value.dump());
}

// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerant.
std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CharSpan> parse_span_cell(const std::string& cell, const std::string& id) {
  std::vector<CharSpan> spans;
  std::stringstream items(cell);
  for (std::string item; std::getline(items, item, ';');) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw DataError("row '" + id + "': malformed span '" + item + "'");
    }
    try {
      spans.push_back({std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1))});
    } catch (const std::exception&) {
      throw DataError("row '" + id + "': malformed span '" + item + "'");
    }
  }
  return spans;
}

int hatebr_label(const std::string& raw, const std::string& id) {
  const std::string name = to_lower(trim(raw));
  if (name == "offensive" || name == "1" || name == "true") return 1;
  if (name == "non-offensive" || name == "non_offensive" || name == "0" || name == "false") {
    return 0;
  }
  throw DataError("row '" + id + "': unknown label '" + raw + "'");
}

json example_to_json(const Example& ex) {
  json spans = json::array();
  for (const auto& annotator : ex.char_spans) {
    json list = json::array();
    for (const auto& s : annotator) list.push_back({s.start, s.end});
    spans.push_back(std::move(list));
  }
  json record = {
      {"id", ex.id},
      {"words", ex.words},
      {"label", ex.label},
      {"annotator_labels", ex.annotator_labels},
      {"annotator_word_masks", ex.annotator_word_masks},
      {"char_spans", std::move(spans)},
      {"target_groups", ex.target_groups},
  };
  if (!ex.text.empty()) record["text"] = ex.text;
  return record;
}

Example example_from_json(const json& record) {
  Example ex;
  ex.id = record.at("id").get<std::string>();
  ex.text = record.value("text", std::string{});
  ex.words = record.at("words").get<std::vector<std::string>>();
  ex.label = record.at("label").get<int>();
  ex.annotator_labels = record.at("annotator_labels").get<std::vector<int>>();
  ex.annotator_word_masks = record.at("annotator_word_masks").get<std::vector<WordMask>>();
  for (const auto& annotator : record.at("char_spans")) {
    std::vector<CharSpan> spans;
    for (const auto& s : annotator) spans.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
    ex.char_spans.push_back(std::move(spans));
  }
  ex.target_groups = record.at("target_groups").get<std::set<std::string>>();
  return ex;
}

}  // namespace

void validate(const Example& ex, int num_classes) {
  const auto fail = [&](const std::string& what) {
    throw DataError("example '" + ex.id + "': " + what);
  };
  if (ex.label < 0 || ex.label >= num_classes) fail("label out of range");
  if (!ex.annotator_word_masks.empty() && !ex.char_spans.empty()) {
    fail("both word masks and character spans present");
  }
  for (const auto& mask : ex.annotator_word_masks) {
    if (mask.size() != ex.words.size()) fail("word mask length differs from word count");
  }
  const int text_len = static_cast<int>(ex.text.size());
  for (const auto& annotator : ex.char_spans) {
    for (const auto& s : annotator) {
      if (s.start < 0 || s.start >= s.end || s.end > text_len) {
        fail("span (" + std::to_string(s.start) + "," + std::to_string(s.end) +
             ") outside text bounds");
      }
    }
  }
}

void validate(const Dataset& ds) {
  if (ds.num_classes < 2) throw DataError("dataset needs at least two classes");
  std::set<std::string> seen;
  for (const auto& ex : ds.examples) {
    validate(ex, ds.num_classes);
    if (!seen.insert(ex.id).second) throw DataError("duplicate example id '" + ex.id + "'");
  }
}

int majority_label(const std::vector<int>& annotator_labels, int num_classes) {
  std::vector<int> votes(static_cast<std::size_t>(num_classes), 0);
  for (int label : annotator_labels) {
    if (label < 0 || label >= num_classes) throw DataError("annotator label out of range");
    ++votes[static_cast<std::size_t>(label)];
  }
  // max_element returns the first maximum, i.e. the lowest class index on ties.
  return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

Dataset parse_hatexplain(std::istream& in) {
  json root;
  try {
    in >> root;
  } catch (const json::parse_error& e) {
    throw DataError(std::string("HateXplain file is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw DataError("HateXplain file must map post ids to records");

  Dataset ds;
  ds.num_classes = 3;
  ds.label_names = {"normal", "offensive", "hatespeech"};
  for (const auto& [post_id, record] : root.items()) {
    if (!record.is_object()) throw DataError("record '" + post_id + "': not an object");
    Example ex;
    ex.id = post_id;
    const auto& tokens = require(record, "post_tokens", post_id);
    if (!tokens.is_array()) throw DataError("record '" + post_id + "': post_tokens not a list");
    ex.words = tokens.get<std::vector<std::string>>();

    const auto& annotators = require(record, "annotators", post_id);
    if (!annotators.is_array() || annotators.empty()) {
      throw DataError("record '" + post_id + "': missing field 'annotators'");
    }
    for (const auto& a : annotators) {
      ex.annotator_labels.push_back(hatexplain_label(require(a, "label", post_id), post_id));
      const auto& targets = require(a, "target", post_id);
      for (const auto& t : targets) {
        const auto tag = t.get<std::string>();
        if (tag != "None") ex.target_groups.insert(tag);
      }
    }
    ex.label = majority_label(ex.annotator_labels, ds.num_classes);

    for (const auto& vec : require(record, "rationales", post_id)) {
      WordMask mask;
      for (const auto& v : vec) mask.push_back(v.get<int>() != 0 ? 1 : 0);
      if (mask.size() != ex.words.size()) {
        throw DataError("record '" + post_id + "': rationale length " +
                        std::to_string(mask.size()) + " != post_tokens length " +
                        std::to_string(ex.words.size()));
      }
      ex.annotator_word_masks.push_back(std::move(mask));
    }
    ds.group_vocabulary.insert(ex.target_groups.begin(), ex.target_groups.end());
    ds.examples.push_back(std::move(ex));
  }
  validate(ds);
  return ds;
}

Dataset load_hatexplain(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_hatexplain(in);
}

Dataset parse_hatebrxplain(std::istream& in) {
  const auto rows = read_csv(in);
  if (rows.empty()) throw DataError("HateBRXplain table is empty");
  const auto& header = rows.front();
  int id_col = -1, text_col = -1, label_col = -1;
  std::vector<int> span_cols;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    const std::string name = to_lower(trim(header[static_cast<std::size_t>(i)]));
    if (name == "id") {
      id_col = i;
    } else if (name == "text") {
      text_col = i;
    } else if (name == "label") {
      label_col = i;
    } else if (name.starts_with("annotator_") && name.ends_with("_span")) {
      span_cols.push_back(i);
    }
  }
  if (id_col < 0 || text_col < 0 || label_col < 0) {
    throw DataError("HateBRXplain header must contain id, text and label columns");
  }

  Dataset ds;
  ds.num_classes = 2;
  ds.label_names = {"non-offensive", "offensive"};
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && trim(row[0]).empty()) continue;
    const auto cell = [&](int col) -> std::string {
      return col < static_cast<int>(row.size()) ? row[static_cast<std::size_t>(col)]
                                                : std::string{};
    };
    Example ex;
    ex.id = trim(cell(id_col));
    if (ex.id.empty()) ex.id = "row-" + std::to_string(r);
    ex.text = cell(text_col);
    ex.words = split_whitespace(ex.text);
    ex.label = hatebr_label(cell(label_col), ex.id);
    ex.annotator_labels = {ex.label};
    for (int col : span_cols) {
      auto spans = parse_span_cell(cell(col), ex.id);
      for (const auto& s : spans) {
        if (s.start < 0 || s.start >= s.end || s.end > static_cast<int>(ex.text.size())) {
          throw DataError("row '" + ex.id + "': span (" + std::to_string(s.start) + "," +
                          std::to_string(s.end) + ") outside text of length " +
                          std::to_string(ex.text.size()));
        }
      }
      if (!spans.empty()) ex.char_spans.push_back(std::move(spans));
    }
    ds.examples.push_back(std::move(ex));
  }
  validate(ds);
  return ds;
}

Dataset load_hatebrxplain(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_hatebrxplain(in);
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  const json header = {{"kind", "sra-dataset"},
                       {"version", 1},
                       {"num_classes", ds.num_classes},
                       {"label_names", ds.label_names},
                       {"group_vocabulary", ds.group_vocabulary},
                       {"num_examples", ds.examples.size()}};
  out << header.dump() << '\n';
  for (const auto& ex : ds.examples) out << example_to_json(ex).dump() << '\n';
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  auto out = open_output(path);
  write_dataset(out, ds);
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset file is empty");
  Dataset ds;
  try {
    const json header = json::parse(line);
    if (header.value("kind", std::string{}) != "sra-dataset") {
      throw DataError("not a canonical dataset file");
    }
    ds.num_classes = header.at("num_classes").get<int>();
    ds.label_names = header.at("label_names").get<std::vector<std::string>>();
    ds.group_vocabulary = header.at("group_vocabulary").get<std::set<std::string>>();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      try {
        ds.examples.push_back(example_from_json(json::parse(line)));
      } catch (const json::exception& e) {
        throw DataError("dataset line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("dataset header: ") + e.what());
  }
  validate(ds);
  return ds;
}

Dataset read_dataset(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_dataset(in);
}

SplitAssignment stratified_split(const Dataset& ds, std::array<double, 3> ratios,
                                 std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");
  for (double r : ratios) {
    if (r < 0.0) throw std::invalid_argument("split ratios must be non-negative");
  }

  const auto C = static_cast<std::size_t>(ds.num_classes);
  std::vector<std::vector<std::size_t>> members(C);
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    members[static_cast<std::size_t>(ds.examples[i].label)].push_back(i);
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (members[c].size() < ratios.size()) {
      throw std::invalid_argument("class " + std::to_string(c) + " has " +
                                  std::to_string(members[c].size()) +
                                  " examples, fewer than the number of splits");
    }
  }

  // Split totals: largest-remainder rounding of N * ratio.
  const auto N = static_cast<double>(ds.examples.size());
  std::array<std::size_t, 3> target{};
  {
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double q = N * ratios[s];
      target[s] = static_cast<std::size_t>(std::floor(q + 1e-9));
      frac[s] = q - static_cast<double>(target[s]);
      assigned += target[s];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; assigned < ds.examples.size(); ++k, ++assigned) {
      ++target[order[k % 3]];
    }
  }

  // Per-class quotas: floors first, then leftover units by fractional remainder
  // subject to the split totals above.
  std::vector<std::array<std::size_t, 3>> quota(C);
  std::vector<std::size_t> leftover(C);
  std::array<std::size_t, 3> filled{};
  struct Cell {
    double remainder;
    std::size_t c, s;
  };
  std::vector<Cell> cells;
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t used = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double q = static_cast<double>(members[c].size()) * ratios[s];
      quota[c][s] = static_cast<std::size_t>(std::floor(q + 1e-9));
      used += quota[c][s];
      filled[s] += quota[c][s];
      cells.push_back({q - static_cast<double>(quota[c][s]), c, s});
    }
    leftover[c] = members[c].size() - used;
  }
  std::stable_sort(cells.begin(), cells.end(),
                   [](const Cell& a, const Cell& b) { return a.remainder > b.remainder; });
  for (const auto& cell : cells) {
    if (leftover[cell.c] > 0 && filled[cell.s] < target[cell.s]) {
      ++quota[cell.c][cell.s];
      ++filled[cell.s];
      --leftover[cell.c];
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t s = 0; leftover[c] > 0 && s < 3; ++s) {
      while (leftover[c] > 0 && filled[s] < target[s]) {
        ++quota[c][s];
        ++filled[s];
        --leftover[c];
      }
    }
  }

  SplitAssignment out;
  out.seed = seed;
  out.ratios = ratios;
  std::array<std::vector<std::size_t>, 3> chosen;
  Rng rng(derive_seed(seed, "split"));
  for (std::size_t c = 0; c < C; ++c) {
    auto ids = members[c];
    rng.shuffle(ids);
    std::size_t k = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t n = 0; n < quota[c][s]; ++n) chosen[s].push_back(ids[k++]);
    }
  }
  // Keep dataset order inside each split so outputs are stable and diffable.
  std::array<std::vector<std::string>*, 3> dest{&out.train, &out.validation, &out.test};
  for (std::size_t s = 0; s < 3; ++s) {
    std::sort(chosen[s].begin(), chosen[s].end());
    for (auto i : chosen[s]) dest[s]->push_back(ds.examples[i].id);
  }
  return out;
}

void write_split(const std::filesystem::path& path, const SplitAssignment& split) {
  const json j = {{"kind", "sra-split"}, {"seed", split.seed},         {"ratios", split.ratios},
                  {"train", split.train}, {"validation", split.validation}, {"test", split.test}};
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

SplitAssignment read_split(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    const json j = json::parse(in);
    SplitAssignment split;
    split.seed = j.at("seed").get<std::uint64_t>();
    split.ratios = j.at("ratios").get<std::array<double, 3>>();
    split.train = j.at("train").get<std::vector<std::string>>();
    split.validation = j.at("validation").get<std::vector<std::string>>();
    split.test = j.at("test").get<std::vector<std::string>>();
    return split;
  } catch (const json::exception& e) {
    throw DataError("split file " + path.string() + ": " + e.what());
  }
}

Dataset subset(const Dataset& ds, const std::vector<std::string>& ids) {
  std::map<std::string, const Example*> by_id;
  for (const auto& ex : ds.examples) by_id.emplace(ex.id, &ex);
  Dataset out;
  out.num_classes = ds.num_classes;
  out.label_names = ds.label_names;
  out.group_vocabulary = ds.group_vocabulary;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("split references unknown id '" + id + "'");
    out.examples.push_back(*it->second);
  }
  return out;
}

SyntheticSpec default_synthetic_spec(int num_classes, int num_examples, std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("synthetic corpus needs at least two classes");
  constexpr int kLexiconSize = 12;
  SyntheticSpec spec;
  spec.num_examples = num_examples;
  spec.seed = seed;
  int next_id = 0;
  for (int c = 1; c < num_classes; ++c) {
    std::vector<int> lexicon(kLexiconSize);
    std::iota(lexicon.begin(), lexicon.end(), next_id);
    next_id += kLexiconSize;
    spec.trigger_lexicons.push_back(std::move(lexicon));
  }
  for (const char* tag : {"women", "muslim", "african", "jewish"}) spec.group_tokens[tag] = next_id++;
  spec.vocab_size = std::max(spec.vocab_size, next_id + 200);
  spec.class_priors.assign(static_cast<std::size_t>(num_classes), 1.0 / num_classes);
  return spec;
}

std::string synthetic_word(const SyntheticSpec& spec, int word_id) {
  for (const auto& [tag, id] : spec.group_tokens) {
    if (id == word_id) return tag;
  }
  for (const auto& lexicon : spec.trigger_lexicons) {
    if (std::find(lexicon.begin(), lexicon.end(), word_id) != lexicon.end()) {
      return "x" + std::to_string(word_id);
    }
  }
  return "w" + std::to_string(word_id);
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  const int C = static_cast<int>(spec.class_priors.size());
  if (C < 2) throw std::invalid_argument("synthetic spec needs at least two class priors");
  if (static_cast<int>(spec.trigger_lexicons.size()) != C - 1) {
    throw std::invalid_argument("need one trigger lexicon per non-normal class");
  }
  const double prior_sum = std::accumulate(spec.class_priors.begin(), spec.class_priors.end(), 0.0);
  if (std::abs(prior_sum - 1.0) > 1e-9) throw std::invalid_argument("class priors must sum to 1");
  if (spec.min_words < 1 || spec.min_words > spec.max_words) {
    throw std::invalid_argument("invalid word length range");
  }
  if (spec.min_triggers < 1 || spec.min_triggers > spec.max_triggers ||
      spec.max_triggers > spec.min_words) {
    throw std::invalid_argument("invalid trigger count range");
  }

  std::set<int> reserved;
  for (const auto& lexicon : spec.trigger_lexicons) {
    if (lexicon.empty()) throw std::invalid_argument("empty trigger lexicon");
    for (int id : lexicon) {
      if (id < 0 || id >= spec.vocab_size) throw std::invalid_argument("trigger id outside vocabulary");
      if (!reserved.insert(id).second) throw std::invalid_argument("trigger lexicons overlap");
    }
  }
  for (const auto& [tag, id] : spec.group_tokens) {
    if (id < 0 || id >= spec.vocab_size || !reserved.insert(id).second) {
      throw std::invalid_argument("group token '" + tag + "' collides or lies outside vocabulary");
    }
  }
  std::vector<int> neutral;
  for (int id = 0; id < spec.vocab_size; ++id) {
    if (!reserved.contains(id)) neutral.push_back(id);
  }
  if (neutral.empty()) {
    throw std::invalid_argument("vocabulary too small: no neutral words left after lexicons");
  }
  std::vector<std::pair<std::string, int>> groups(spec.group_tokens.begin(), spec.group_tokens.end());

  Dataset ds;
  ds.num_classes = C;
  if (C == 2) {
    ds.label_names = {"normal", "offensive"};
  } else if (C == 3) {
    ds.label_names = {"normal", "offensive", "hatespeech"};
  } else {
    for (int c = 0; c < C; ++c) ds.label_names.push_back(c == 0 ? "normal" : "class" + std::to_string(c));
  }

  Rng rng(derive_seed(spec.seed, "synthetic"));
  const int width = std::max<int>(5, static_cast<int>(std::to_string(spec.num_examples).size()));
  for (int n = 0; n < spec.num_examples; ++n) {
    Example ex;
    std::string id = std::to_string(n);
    ex.id = "syn-" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(id.size(), width), '0') + id;

    double u = rng.uniform();
    int label = C - 1;
    for (int c = 0; c < C; ++c) {
      if (u < spec.class_priors[static_cast<std::size_t>(c)]) {
        label = c;
        break;
      }
      u -= spec.class_priors[static_cast<std::size_t>(c)];
    }
    ex.label = label;
    ex.annotator_labels = {label};

    const auto length = static_cast<std::size_t>(rng.between(spec.min_words, spec.max_words));
    std::vector<int> ids(length);
    for (auto& w : ids) w = neutral[rng.below(neutral.size())];

    std::vector<std::size_t> positions(length);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    rng.shuffle(positions);
    std::size_t used = 0;
    WordMask mask(length, 0);
    if (label > 0) {
      const auto& lexicon = spec.trigger_lexicons[static_cast<std::size_t>(label - 1)];
      const auto k = static_cast<std::size_t>(rng.between(spec.min_triggers, spec.max_triggers));
      for (; used < k; ++used) {
        ids[positions[used]] = lexicon[rng.below(lexicon.size())];
        mask[positions[used]] = 1;
      }
    }
    if (!groups.empty() && used < length && rng.bernoulli(spec.group_mention_rate)) {
      const auto& [tag, word_id] = groups[rng.below(groups.size())];
      ids[positions[used++]] = word_id;
      ex.target_groups.insert(tag);
    }

    for (std::size_t i = 0; i < length; ++i) {
      ex.words.push_back(synthetic_word(spec, ids[i]));
      if (i) ex.text.push_back(' ');
      ex.text += ex.words.back();
    }
    if (label > 0) ex.annotator_word_masks.push_back(std::move(mask));
    ds.examples.push_back(std::move(ex));
  }
  for (const auto& [tag, id] : spec.group_tokens) ds.group_vocabulary.insert(tag);
  validate(ds);
  return ds;
}

}  // namespace sra
