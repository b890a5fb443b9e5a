#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace sra {

/// Raised for malformed dataset files; the message names the offending record.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Half-open character interval [start, end) into Example::text.
struct CharSpan {
  int start = 0;
  int end = 0;
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

using WordMask = std::vector<std::uint8_t>;

struct Example {
  std::string id;
  std::string text;                // may be empty for pre-tokenized corpora
  std::vector<std::string> words;
  int label = 0;
  std::vector<int> annotator_labels;
  // Word-level rationales, one mask per annotator that supplied one.
  std::vector<WordMask> annotator_word_masks;
  // Character-level rationales, one span list per annotator that supplied one.
  std::vector<std::vector<CharSpan>> char_spans;
  std::set<std::string> target_groups;

  friend bool operator==(const Example&, const Example&) = default;
};

struct Dataset {
  std::vector<Example> examples;
  int num_classes = 2;
  std::vector<std::string> label_names;
  std::set<std::string> group_vocabulary;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Throws DataError describing the first violated invariant.
void validate(const Example& ex, int num_classes);
void validate(const Dataset& ds);

// Annotator majority label; ties go to the lowest class index.
int majority_label(const std::vector<int>& annotator_labels, int num_classes);

/// HateXplain-shaped JSON: {post_id: {post_tokens, annotators[{label, target}], rationales}}.
Dataset load_hatexplain(const std::filesystem::path& path);
Dataset parse_hatexplain(std::istream& in);

/// HateBRXplain-shaped CSV with header `id,text,label,annotator_1_span,...`.
/// Span cells hold `start:end` pairs separated by `;`; an empty cell means the
/// annotator gave no rationale. Labels: offensive/non-offensive or 1/0.
Dataset load_hatebrxplain(const std::filesystem::path& path);
Dataset parse_hatebrxplain(std::istream& in);

// Canonical record-per-line format: a header line followed by one example per line.
void write_dataset(std::ostream& out, const Dataset& ds);
void write_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);

struct SplitAssignment {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};

  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

/// Per-class apportionment of examples into train/validation/test. Split sizes
/// follow largest-remainder rounding of N * ratio; within a class the members
/// are shuffled with a stream derived from `seed`.
SplitAssignment stratified_split(const Dataset& ds, std::array<double, 3> ratios,
                                 std::uint64_t seed);

void write_split(const std::filesystem::path& path, const SplitAssignment& split);
SplitAssignment read_split(const std::filesystem::path& path);

// Examples of `ds` whose ids are listed, in listed order.
Dataset subset(const Dataset& ds, const std::vector<std::string>& ids);

struct SyntheticSpec {
  int vocab_size = 240;
  int num_examples = 2000;
  int min_words = 6;
  int max_words = 20;
  // trigger_lexicons[c - 1] holds the trigger word ids of class c (c >= 1).
  std::vector<std::vector<int>> trigger_lexicons;
  int min_triggers = 1;
  int max_triggers = 2;
  std::vector<double> class_priors;
  std::map<std::string, int> group_tokens;
  double group_mention_rate = 0.3;
  std::uint64_t seed = 0;
};

/// Planted-rationale spec with `num_classes - 1` disjoint lexicons of 12 words,
/// four identity-group tokens, and uniform priors.
SyntheticSpec default_synthetic_spec(int num_classes, int num_examples, std::uint64_t seed);

// Surface form of a synthetic word id.
std::string synthetic_word(const SyntheticSpec& spec, int word_id);

Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace sra
