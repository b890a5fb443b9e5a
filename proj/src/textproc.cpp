#include "sra/textproc.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

namespace sra {

namespace {

const char* const kSpecialTokens[kNumSpecialTokens] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};

}  // namespace

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

Vocabulary::Vocabulary() {
  for (const char* special : kSpecialTokens) {
    token_to_id_.emplace(special, static_cast<int>(id_to_token_.size()));
    id_to_token_.emplace_back(special);
  }
}

int Vocabulary::add(const std::string& token) {
  auto key = lowercase(token);
  auto [it, inserted] = token_to_id_.emplace(key, static_cast<int>(id_to_token_.size()));
  if (inserted) id_to_token_.push_back(std::move(key));
  return it->second;
}

int Vocabulary::id_of(const std::string& word) const {
  auto it = token_to_id_.find(lowercase(word));
  if (it == token_to_id_.end() || it->second < kNumSpecialTokens) return kUnkId;
  return it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write vocabulary " + path.string());
  for (const auto& token : id_to_token_) out << token << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open vocabulary " + path.string());
  Vocabulary vocab;
  std::string line;
  for (int i = 0; i < kNumSpecialTokens; ++i) {
    if (!std::getline(in, line) || line != kSpecialTokens[i]) {
      throw std::runtime_error("vocabulary " + path.string() + ": bad special-token header");
    }
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (vocab.add(line) != vocab.size() - 1) {
      throw std::runtime_error("vocabulary " + path.string() + ": duplicate token '" + line + "'");
    }
  }
  return vocab;
}

Vocabulary build_vocab(std::span<const Dataset* const> datasets, int min_freq) {
  if (min_freq < 1) throw std::invalid_argument("min_freq must be >= 1");
  std::map<std::string, long> counts;
  for (const Dataset* ds : datasets) {
    for (const auto& ex : ds->examples) {
      for (const auto& w : ex.words) ++counts[lowercase(w)];
    }
  }
  if (counts.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  // counts is already lexicographic, so a stable sort on frequency suffices.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  for (const auto& [word, count] : ranked) {
    if (count >= min_freq) vocab.add(word);
  }
  return vocab;
}

Vocabulary build_vocab(const Dataset& dataset, int min_freq) {
  const Dataset* one[] = {&dataset};
  return build_vocab(std::span<const Dataset* const>(one), min_freq);
}

int Encoding::valid_length() const {
  return static_cast<int>(std::count(padding_mask.begin(), padding_mask.end(), 1));
}

int Encoding::content_count() const {
  return static_cast<int>(std::count(content_mask.begin(), content_mask.end(), 1));
}

std::vector<int> Encoding::content_positions() const {
  std::vector<int> positions;
  for (int i = 0; i < length(); ++i) {
    if (content_mask[static_cast<std::size_t>(i)]) positions.push_back(i);
  }
  return positions;
}

namespace {

Encoding empty_layout(int max_len) {
  if (max_len < 3) throw std::invalid_argument("max_len must be >= 3");
  Encoding enc;
  const auto L = static_cast<std::size_t>(max_len);
  enc.ids.assign(L, kPadId);
  enc.padding_mask.assign(L, 0);
  enc.content_mask.assign(L, 0);
  enc.offsets.assign(L, std::nullopt);
  enc.word_index.assign(L, std::nullopt);
  return enc;
}

void close_layout(Encoding& enc, std::size_t kept) {
  enc.ids[0] = kClsId;
  enc.padding_mask[0] = 1;
  enc.ids[kept + 1] = kSepId;
  enc.padding_mask[kept + 1] = 1;
}

}  // namespace

Encoding encode(std::span<const std::string> words, const std::string& text,
                const Vocabulary& vocab, int max_len) {
  Encoding enc = empty_layout(max_len);
  const std::size_t kept = std::min(words.size(), static_cast<std::size_t>(max_len - 2));
  std::size_t cursor = 0;
  for (std::size_t w = 0; w < kept; ++w) {
    const std::size_t pos = w + 1;
    enc.ids[pos] = vocab.id_of(words[w]);
    enc.padding_mask[pos] = 1;
    enc.content_mask[pos] = 1;
    enc.word_index[pos] = static_cast<int>(w);
    if (text.empty()) {
      enc.offsets[pos] = CharSpan{static_cast<int>(cursor), static_cast<int>(cursor + words[w].size())};
      cursor += words[w].size() + 1;
    } else if (!words[w].empty()) {
      const auto found = text.find(words[w], cursor);
      if (found != std::string::npos) {
        enc.offsets[pos] = CharSpan{static_cast<int>(found), static_cast<int>(found + words[w].size())};
        cursor = found + words[w].size();
      }
    }
  }
  close_layout(enc, kept);
  return enc;
}

Encoding select_tokens(const Encoding& enc, std::span<const int> keep_positions) {
  Encoding out = empty_layout(enc.length());
  std::vector<int> keep(keep_positions.begin(), keep_positions.end());
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  std::size_t kept = 0;
  for (int p : keep) {
    const auto src = static_cast<std::size_t>(p);
    if (p < 0 || p >= enc.length() || !enc.content_mask[src]) {
      throw std::invalid_argument("select_tokens: position is not a content token");
    }
    const std::size_t dst = ++kept;
    out.ids[dst] = enc.ids[src];
    out.padding_mask[dst] = 1;
    out.content_mask[dst] = 1;
    out.offsets[dst] = enc.offsets[src];
    out.word_index[dst] = enc.word_index[src];
  }
  close_layout(out, kept);
  return out;
}

WordMask majority_vote_word_mask(std::span<const WordMask> masks, double threshold) {
  if (masks.empty()) throw std::invalid_argument("majority vote needs at least one mask");
  const std::size_t n = masks.front().size();
  std::vector<int> votes(n, 0);
  for (const auto& mask : masks) {
    if (mask.size() != n) throw std::invalid_argument("annotator masks differ in length");
    for (std::size_t i = 0; i < n; ++i) votes[i] += mask[i] ? 1 : 0;
  }
  const double annotators = static_cast<double>(masks.size());
  WordMask out(n, 0);
  for (std::size_t i = 0; i < n; ++i) out[i] = (votes[i] / annotators >= threshold) ? 1 : 0;
  return out;
}

RationaleMask word_mask_to_token_mask(std::span<const std::uint8_t> word_mask, const Encoding& enc) {
  RationaleMask r(enc.ids.size(), 0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!enc.content_mask[i] || !enc.word_index[i]) continue;
    const auto w = static_cast<std::size_t>(*enc.word_index[i]);
    if (w < word_mask.size() && word_mask[w]) r[i] = 1;
  }
  return r;
}

RationaleMask spans_to_token_mask(std::span<const std::vector<CharSpan>> annotator_spans,
                                  const Encoding& enc, double threshold) {
  const std::size_t L = enc.ids.size();
  if (annotator_spans.empty()) return RationaleMask(L, 0);
  std::vector<WordMask> per_annotator;
  for (const auto& spans : annotator_spans) {
    WordMask marks(L, 0);
    for (std::size_t i = 0; i < L; ++i) {
      if (!enc.content_mask[i] || !enc.offsets[i]) continue;
      const auto& tok = *enc.offsets[i];
      for (const auto& s : spans) {
        if (std::min(tok.end, s.end) - std::max(tok.start, s.start) >= 1) {
          marks[i] = 1;
          break;
        }
      }
    }
    per_annotator.push_back(std::move(marks));
  }
  return majority_vote_word_mask(per_annotator, threshold);
}

RationaleMask rationale_for(const Example& ex, const Encoding& enc) {
  if (!ex.annotator_word_masks.empty()) {
    return word_mask_to_token_mask(majority_vote_word_mask(ex.annotator_word_masks), enc);
  }
  if (!ex.char_spans.empty()) return spans_to_token_mask(ex.char_spans, enc);
  return RationaleMask(enc.ids.size(), 0);
}

}  // namespace sra
