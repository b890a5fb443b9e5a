#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "sra/model.hpp"

namespace sra {

// Added to the attention mass before normalizing.
inline constexpr double kAttentionEps = 1e-10;

/// a_i / (sum_j m_j a_j + eps). Entries with m_i = 0 pass through the same
/// scaling but are never read by the loss.
Vector normalize_attention(const Vector& a, const Mask& m);

/// Masked MSE between the normalized attention and the binary rationale,
/// averaged over positions with m = 1. Throws if the mask is empty.
double aal_loss(const Vector& a, const RationaleMask& r, const Mask& m);
// d aal_loss / d a. Zero at positions with m = 0.
Vector aal_loss_grad(const Vector& a, const RationaleMask& r, const Mask& m);

double ce_loss(const Vector& logits, int y);
Vector ce_loss_grad(const Vector& logits, int y);

struct LossBreakdown {
  double ce = 0.0;
  double aal = 0.0;  // reported 0 when the gate is closed
  bool gate = false;
  double alpha = 0.0;
  double total = 0.0;
};

// The alignment term applies only to non-normal labels with a nonempty rationale.
bool alignment_gate(int y, const RationaleMask& r);

/// ce + alpha * gate * aal, where `m_content` masks the positions the
/// alignment term is computed over.
LossBreakdown total_loss(const Vector& logits, const Vector& a, int y, const RationaleMask& r,
                         const Mask& m_content, double alpha);

/// Upstream gradient of total_loss for backward(). d_cls_attention is left
/// empty when the gate is closed.
OutputGradient total_loss_grad(const Vector& logits, const Vector& a, int y, const RationaleMask& r,
                               const Mask& m_content, double alpha);

struct GradCheckReport {
  int probes = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_location;
  bool passed = false;
};

struct GradCheckOptions {
  int n_probes = 200;
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor for the relative error, so that gradients that are
  // zero up to rounding are compared absolutely.
  double relative_floor = 1e-6;
  std::uint64_t seed = 0;
};

/// Compares `analytic` against central differences (f(x+h) - f(x-h)) / 2h of
/// `loss` on randomly chosen scalars. Every tensor is probed at least once
/// (round-robin) when n_probes allows it.
GradCheckReport grad_check(const std::function<double(const Parameters&)>& loss, const Parameters& params,
                           const Gradients& analytic, const GradCheckOptions& options);

/// Flat-vector variant for toy losses.
GradCheckReport grad_check(const std::function<double(const std::vector<double>&)>& loss,
                           const std::vector<double>& x, const std::vector<double>& analytic,
                           const GradCheckOptions& options);

}  // namespace sra
