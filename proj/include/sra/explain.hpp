#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sra/metrics.hpp"
#include "sra/model.hpp"

namespace sra {

enum class ExtractionKind { kAboveUniform, kTopKRatio, kAbsolute };

struct ExtractionStrategy {
  ExtractionKind kind = ExtractionKind::kAboveUniform;
  double rho = 0.2;  // kTopKRatio, in (0, 1]
  double tau = 0.1;  // kAbsolute, in (0, 1)

  static ExtractionStrategy above_uniform() { return {}; }
  static ExtractionStrategy top_k_ratio(double rho) { return {ExtractionKind::kTopKRatio, rho, 0.1}; }
  static ExtractionStrategy absolute(double tau) { return {ExtractionKind::kAbsolute, 0.2, tau}; }

  void validate() const;
  std::string describe() const;
};

/// Attention restricted to content positions and renormalized over them,
/// aligned with enc.content_positions(). All zeros if the content mass is zero.
std::vector<double> content_scores(const Vector& attention, const Encoding& enc);

/// Predicted rationale as a set of encoding positions (always content positions).
std::set<int> extract_rationale(const Vector& attention, const Encoding& enc, const ExtractionStrategy& strategy);

std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation between pooled content-token attention scores and the
/// binary gold labels over instances with a gold rationale. Absent with fewer
/// than two such instances or zero variance.
std::optional<double> attention_rationale_correlation(std::span<const InstanceEval> evals);

/// One row of heatmap cells; intensity is attention relative to the row maximum.
struct HeatmapRow {
  std::string title;
  std::vector<std::string> tokens;
  std::vector<double> intensity;
  std::vector<bool> gold;
};

HeatmapRow heatmap_row(const Encoding& enc, const Vector& attention, std::span<const std::string> words,
                       const RationaleMask* gold, std::string title);

// ANSI background ramp quantized to 8 levels; gold tokens underlined.
std::string render_terminal(const HeatmapRow& row);

// Standalone static HTML document, no external assets.
std::string render_html(std::span<const HeatmapRow> rows);
void write_html(const std::filesystem::path& path, std::span<const HeatmapRow> rows);

}  // namespace sra
