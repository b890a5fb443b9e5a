#include "sra/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sra {

namespace {

std::string html_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

// Light-to-dark red ramp in the xterm 256-colour palette.
constexpr int kTerminalRamp[8] = {231, 224, 217, 210, 203, 196, 160, 124};

}  // namespace

void ExtractionStrategy::validate() const {
  if (kind == ExtractionKind::kTopKRatio && !(rho > 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("top-k ratio must lie in (0, 1]");
  }
  if (kind == ExtractionKind::kAbsolute && !(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("absolute threshold must lie in (0, 1)");
  }
}

std::string ExtractionStrategy::describe() const {
  switch (kind) {
    case ExtractionKind::kAboveUniform: return "above_uniform";
    case ExtractionKind::kTopKRatio: return "topk:" + fixed3(rho);
    case ExtractionKind::kAbsolute: return "absolute:" + fixed3(tau);
  }
  return "unknown";
}

std::vector<double> content_scores(const Vector& attention, const Encoding& enc) {
  if (attention.size() != enc.length()) throw std::invalid_argument("attention length differs from encoding");
  const auto positions = enc.content_positions();
  std::vector<double> scores;
  scores.reserve(positions.size());
  double mass = 0.0;
  for (int p : positions) {
    scores.push_back(attention(p));
    mass += attention(p);
  }
  for (auto& s : scores) s = mass > 0.0 ? s / mass : 0.0;
  return scores;
}

std::set<int> extract_rationale(const Vector& attention, const Encoding& enc, const ExtractionStrategy& strategy) {
  strategy.validate();
  const auto positions = enc.content_positions();
  const auto scores = content_scores(attention, enc);
  const std::size_t n = positions.size();
  std::set<int> out;
  if (n == 0) return out;
  switch (strategy.kind) {
    case ExtractionKind::kAboveUniform: {
      const double uniform = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (scores[i] > uniform) out.insert(positions[i]);
      }
      break;
    }
    case ExtractionKind::kTopKRatio: {
      const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(strategy.rho * static_cast<double>(n))));
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
      for (std::size_t i = 0; i < std::min(k, n); ++i) out.insert(positions[order[i]]);
      break;
    }
    case ExtractionKind::kAbsolute: {
      for (std::size_t i = 0; i < n; ++i) {
        if (scores[i] >= strategy.tau) out.insert(positions[i]);
      }
      break;
    }
  }
  return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: series differ in length");
  if (x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> attention_rationale_correlation(std::span<const InstanceEval> evals) {
  std::vector<double> scores, labels;
  int qualifying = 0;
  for (const auto& e : evals) {
    if (!e.has_gold_rationale()) continue;
    ++qualifying;
    for (std::size_t i = 0; i < e.content_positions.size(); ++i) {
      scores.push_back(e.attention[i]);
      labels.push_back(e.gold_rationale.contains(e.content_positions[i]) ? 1.0 : 0.0);
    }
  }
  if (qualifying < 2) return std::nullopt;
  return pearson(scores, labels);
}

HeatmapRow heatmap_row(const Encoding& enc, const Vector& attention, std::span<const std::string> words,
                       const RationaleMask* gold, std::string title) {
  HeatmapRow row;
  row.title = std::move(title);
  const auto positions = enc.content_positions();
  const auto scores = content_scores(attention, enc);
  const double peak = scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto p = static_cast<std::size_t>(positions[i]);
    const auto w = enc.word_index[p];
    row.tokens.push_back(w && static_cast<std::size_t>(*w) < words.size() ? words[static_cast<std::size_t>(*w)]
                                                                          : "?");
    row.intensity.push_back(peak > 0.0 ? scores[i] / peak : 0.0);
    row.gold.push_back(gold != nullptr && p < gold->size() && (*gold)[p] != 0);
  }
  return row;
}

std::string render_terminal(const HeatmapRow& row) {
  std::ostringstream out;
  if (!row.title.empty()) out << row.title << '\n';
  for (std::size_t i = 0; i < row.tokens.size(); ++i) {
    const int level = std::clamp(static_cast<int>(row.intensity[i] * 8.0), 0, 7);
    if (i) out << ' ';
    out << "\x1b[48;5;" << kTerminalRamp[level] << "m\x1b[38;5;" << (level >= 5 ? 231 : 16) << 'm';
    if (row.gold[i]) out << "\x1b[4m";
    out << row.tokens[i] << "\x1b[0m";
  }
  out << '\n';
  return out.str();
}

std::string render_html(std::span<const HeatmapRow> rows) {
  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Attention heatmap</title>\n"
         "<style>\nbody{font-family:monospace;margin:2em;}\n"
         ".row{margin:0 0 1.5em 0;line-height:2em;}\n"
         ".title{font-weight:bold;margin-bottom:0.3em;}\n"
         ".tok{padding:0.15em 0.3em;margin:0 0.1em;border-radius:3px;}\n"
         ".gold{text-decoration:underline;text-decoration-thickness:2px;}\n"
         "</style>\n</head>\n<body>\n";
  for (const auto& row : rows) {
    out << "<div class=\"row\">\n";
    if (!row.title.empty()) out << "<div class=\"title\">" << html_escape(row.title) << "</div>\n";
    for (std::size_t i = 0; i < row.tokens.size(); ++i) {
      out << "<span class=\"tok" << (row.gold[i] ? " gold" : "") << "\" title=\"" << fixed3(row.intensity[i])
          << "\" style=\"background-color:rgba(220,38,38," << fixed3(row.intensity[i]) << ")\">"
          << html_escape(row.tokens[i]) << "</span>\n";
    }
    out << "</div>\n";
  }
  out << "</body>\n</html>\n";
  return out.str();
}

void write_html(const std::filesystem::path& path, std::span<const HeatmapRow> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write heatmap " + path.string());
  out << render_html(rows);
  if (!out) throw std::runtime_error("failed writing heatmap " + path.string());
}

}  // namespace sra
