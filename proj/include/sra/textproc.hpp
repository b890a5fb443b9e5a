#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sra/corpus.hpp"

namespace sra {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kSepId = 3;
inline constexpr int kNumSpecialTokens = 4;

class Vocabulary {
public:
  Vocabulary();

  // Appends a (lowercased) token if absent; returns its id.
  int add(const std::string& token);
  // Id of the lowercased word, or kUnkId.
  int id_of(const std::string& word) const;
  const std::string& token(int id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(id_to_token_.size()); }

  // Four special-token header lines, then one token per line in id order.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

std::string lowercase(std::string s);

/// Words with lowercased corpus frequency >= min_freq, ordered by frequency
/// (descending) then lexicographically.
Vocabulary build_vocab(std::span<const Dataset* const> datasets, int min_freq);
Vocabulary build_vocab(const Dataset& dataset, int min_freq);

using Mask = std::vector<std::uint8_t>;

struct Encoding {
  std::vector<int> ids;
  Mask padding_mask;  // 1 on CLS, words, SEP
  Mask content_mask;  // 1 on word tokens only
  std::vector<std::optional<CharSpan>> offsets;
  std::vector<std::optional<int>> word_index;

  int length() const { return static_cast<int>(ids.size()); }
  int valid_length() const;
  int content_count() const;
  std::vector<int> content_positions() const;

  friend bool operator==(const Encoding&, const Encoding&) = default;
};

/// Layout [CLS] w_1 .. w_n [SEP] [PAD]...; words past max_len - 2 are dropped.
/// Offsets come from a left-to-right scan of `text`; with empty text they are
/// synthesized as if the words were joined by single spaces.
Encoding encode(std::span<const std::string> words, const std::string& text,
                const Vocabulary& vocab, int max_len);

/// Re-encodes only the content tokens at `keep_positions` (in position order),
/// preserving CLS/SEP. Used by the deletion-style faithfulness probes.
Encoding select_tokens(const Encoding& enc, std::span<const int> keep_positions);

using RationaleMask = std::vector<std::uint8_t>;

/// out[i] = 1 iff the fraction of masks marking word i is >= threshold.
WordMask majority_vote_word_mask(std::span<const WordMask> masks, double threshold = 0.5);

RationaleMask word_mask_to_token_mask(std::span<const std::uint8_t> word_mask, const Encoding& enc);

/// Each annotator's spans are unioned, then the per-token annotator marks are
/// majority-voted. A token is marked by a span sharing at least one character.
RationaleMask spans_to_token_mask(std::span<const std::vector<CharSpan>> annotator_spans,
                                  const Encoding& enc, double threshold = 0.5);

// Whichever rationale source the example carries; all-zero if none.
RationaleMask rationale_for(const Example& ex, const Encoding& enc);

}  // namespace sra
