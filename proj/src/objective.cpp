#include "sra/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sra {

namespace {

void check_lengths(const Vector& a, std::size_t r, std::size_t m) {
  if (static_cast<std::size_t>(a.size()) != r || r != m) {
    throw std::invalid_argument("attention, rationale and mask lengths differ");
  }
}

double masked_mass(const Vector& a, const Mask& m) {
  double mass = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (m[static_cast<std::size_t>(i)]) mass += a(i);
  }
  return mass;
}

int mask_count(const Mask& m) { return static_cast<int>(std::count(m.begin(), m.end(), 1)); }

struct Probe {
  double analytic;
  double numeric;
};

double relative_error(const Probe& p, double floor) {
  const double denom = std::max({std::abs(p.analytic), std::abs(p.numeric), floor});
  return std::abs(p.analytic - p.numeric) / denom;
}

void record(GradCheckReport& report, const Probe& p, double floor, const std::string& where) {
  const double rel = relative_error(p, floor);
  report.max_abs_error = std::max(report.max_abs_error, std::abs(p.analytic - p.numeric));
  if (report.probes == 0 || rel > report.max_rel_error) {
    report.max_rel_error = rel;
    report.worst_location = where;
  }
  ++report.probes;
}

}  // namespace

Vector normalize_attention(const Vector& a, const Mask& m) {
  if (static_cast<std::size_t>(a.size()) != m.size()) throw std::invalid_argument("attention/mask length");
  return a / (masked_mass(a, m) + kAttentionEps);
}

double aal_loss(const Vector& a, const RationaleMask& r, const Mask& m) {
  check_lengths(a, r.size(), m.size());
  const int count = mask_count(m);
  if (count == 0) throw std::invalid_argument("alignment loss over an empty mask");
  const Vector normalized = normalize_attention(a, m);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (!m[static_cast<std::size_t>(i)]) continue;
    const double diff = normalized(i) - static_cast<double>(r[static_cast<std::size_t>(i)]);
    sum += diff * diff;
  }
  return sum / count;
}

Vector aal_loss_grad(const Vector& a, const RationaleMask& r, const Mask& m) {
  check_lengths(a, r.size(), m.size());
  const int count = mask_count(m);
  if (count == 0) throw std::invalid_argument("alignment loss over an empty mask");
  // With S = sum_j m_j a_j + eps and e_i = a_i / S - r_i:
  //   dL/da_k = (2 / count) * m_k * (e_k - sum_i m_i e_i a_i / S) / S.
  const double S = masked_mass(a, m) + kAttentionEps;
  double cross = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (!m[static_cast<std::size_t>(i)]) continue;
    cross += (a(i) / S - r[static_cast<std::size_t>(i)]) * a(i) / S;
  }
  Vector grad = Vector::Zero(a.size());
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    if (!m[static_cast<std::size_t>(k)]) continue;
    const double e = a(k) / S - r[static_cast<std::size_t>(k)];
    grad(k) = 2.0 * (e - cross) / (S * count);
  }
  return grad;
}

double ce_loss(const Vector& logits, int y) {
  if (y < 0 || y >= logits.size()) throw std::invalid_argument("label outside logits");
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return lse - logits(y);
}

Vector ce_loss_grad(const Vector& logits, int y) {
  if (y < 0 || y >= logits.size()) throw std::invalid_argument("label outside logits");
  const double mx = logits.maxCoeff();
  Vector p = (logits.array() - mx).exp();
  p /= p.sum();
  p(y) -= 1.0;
  return p;
}

bool alignment_gate(int y, const RationaleMask& r) {
  return y > 0 && std::any_of(r.begin(), r.end(), [](std::uint8_t v) { return v != 0; });
}

LossBreakdown total_loss(const Vector& logits, const Vector& a, int y, const RationaleMask& r,
                         const Mask& m_content, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("alpha must be non-negative");
  LossBreakdown out;
  out.alpha = alpha;
  out.ce = ce_loss(logits, y);
  out.gate = alignment_gate(y, r);
  out.aal = out.gate ? aal_loss(a, r, m_content) : 0.0;
  out.total = out.ce + alpha * (out.gate ? 1.0 : 0.0) * out.aal;
  return out;
}

OutputGradient total_loss_grad(const Vector& logits, const Vector& a, int y, const RationaleMask& r,
                               const Mask& m_content, double alpha) {
  OutputGradient g;
  g.d_logits = ce_loss_grad(logits, y);
  if (alignment_gate(y, r)) g.d_cls_attention = alpha * aal_loss_grad(a, r, m_content);
  return g;
}

GradCheckReport grad_check(const std::function<double(const Parameters&)>& loss, const Parameters& params,
                           const Gradients& analytic, const GradCheckOptions& options) {
  if (!(analytic.config() == params.config())) throw std::invalid_argument("gradient shape mismatch");
  Parameters probe = params;
  Rng rng(derive_seed(options.seed, "grad_check"));
  GradCheckReport report;
  const std::size_t tensors = params.tensor_count();
  for (int n = 0; n < options.n_probes; ++n) {
    const std::size_t t = static_cast<std::size_t>(n) % tensors;
    auto& tensor = probe.tensor(t);
    const auto k = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(tensor.size())));
    const double original = tensor.data()[k];
    tensor.data()[k] = original + options.step;
    const double up = loss(probe);
    tensor.data()[k] = original - options.step;
    const double down = loss(probe);
    tensor.data()[k] = original;
    const Probe p{analytic.tensor(t).data()[k], (up - down) / (2.0 * options.step)};
    record(report, p, options.relative_floor, params.name(t) + "[" + std::to_string(k) + "]");
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

GradCheckReport grad_check(const std::function<double(const std::vector<double>&)>& loss,
                           const std::vector<double>& x, const std::vector<double>& analytic,
                           const GradCheckOptions& options) {
  if (x.size() != analytic.size() || x.empty()) throw std::invalid_argument("gradient shape mismatch");
  std::vector<double> probe = x;
  Rng rng(derive_seed(options.seed, "grad_check"));
  GradCheckReport report;
  for (int n = 0; n < options.n_probes; ++n) {
    const auto k = static_cast<std::size_t>(rng.below(x.size()));
    probe[k] = x[k] + options.step;
    const double up = loss(probe);
    probe[k] = x[k] - options.step;
    const double down = loss(probe);
    probe[k] = x[k];
    record(report, {analytic[k], (up - down) / (2.0 * options.step)}, options.relative_floor,
           "x[" + std::to_string(k) + "]");
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace sra
