#include "tenips/bounds.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace tenips {

double relative_error(const TensorXd& estimate, const TensorXd& truth) {
  if (estimate.shape() != truth.shape()) throw std::invalid_argument("relative_error: shape mismatch");
  const double denom = frobenius_norm(truth);
  if (denom == 0) throw std::invalid_argument("relative_error: truth tensor is zero");
  return (estimate.data() - truth.data()).norm() / denom;
}

double BoundInputs::tail(Index mode, Index r) const {
  const auto& s = mode_singular_values.at(static_cast<std::size_t>(mode));
  if (r >= s.size()) return 0.0;
  return s.tail(s.size() - r).squaredNorm();
}

BoundInputs compute_bound_inputs(const TensorXd& data, const TensorXd& parameter, const LinkFunction& link,
                                 const RankProfile& ranks, double tau, double gamma, double epsilon) {
  if (data.shape() != parameter.shape()) throw std::invalid_argument("compute_bound_inputs: shape mismatch");
  ranks.check(data.shape());
  BoundInputs in;
  const double size = static_cast<double>(data.size());
  in.total_size = data.size();
  in.data_fnorm = frobenius_norm(data);
  in.psi = max_abs(data);
  in.alpha = max_abs(parameter);
  const UnfoldingSpec square = square_set(data.shape());
  in.square_rows = square.row_dim();
  in.square_cols = square.col_dim();
  in.theta = nuclear_norm(unfold(parameter, square)) / std::sqrt(size);
  in.alpha_sp = in.data_fnorm > 0 ? in.psi * std::sqrt(size) / in.data_fnorm : 0.0;
  in.l_gamma = link.l_gamma(gamma);
  in.tau = tau;
  in.gamma = gamma;
  in.epsilon = epsilon;
  in.link_at_minus_gamma = link.value(-gamma);
  in.link_at_minus_alpha = link.value(-in.alpha);
  for (Index n = 0; n < data.order(); ++n) {
    in.mode_singular_values.push_back(singular_values(unfold(data, n)));
    const auto& s = in.mode_singular_values.back();
    const Index r = ranks[n];
    in.kappa.push_back(r <= s.size() && s[r - 1] > 0 ? s[0] / s[r - 1] : std::numeric_limits<double>::infinity());
  }
  return in;
}

double spectral_slack(const TensorXd& estimate, const TensorXd& data) {
  if (estimate.shape() != data.shape()) throw std::invalid_argument("spectral_slack: shape mismatch");
  const double denom = frobenius_norm(data);
  if (denom == 0) throw std::invalid_argument("spectral_slack: data tensor is zero");
  const TensorXd diff = estimate - data;
  double worst = 0;
  for (Index n = 0; n < data.order(); ++n) worst = std::max(worst, spectral_norm(unfold(diff, n)));
  return worst / denom;
}

double propensity_error_bound(const BoundInputs& in, const UnfoldingSpec& spec, double tau) {
  return 4.0 * std::numbers::e * in.l_gamma * tau *
         (1.0 / std::sqrt(static_cast<double>(spec.row_dim())) + 1.0 / std::sqrt(static_cast<double>(spec.col_dim())));
}

double reweighting_error_bound(const BoundInputs& in) {
  const double propensity = 4.0 * std::numbers::e * in.l_gamma * in.tau *
                            (1.0 / std::sqrt(static_cast<double>(in.square_rows)) +
                             1.0 / std::sqrt(static_cast<double>(in.square_cols)));
  return in.alpha_sp * in.data_fnorm / (in.link_at_minus_gamma * in.link_at_minus_alpha) * std::sqrt(propensity);
}

CompletionBound completion_error_bound(const BoundInputs& in, const RankProfile& ranks,
                                       std::optional<double> reweighting_error) {
  const Index order = static_cast<Index>(in.mode_singular_values.size());
  if (ranks.order() != order) throw std::invalid_argument("completion_error_bound: rank profile order mismatch");
  if (!(in.data_fnorm > 0)) throw std::invalid_argument("completion_error_bound: data tensor is zero");
  CompletionBound out;
  const double f = reweighting_error ? *reweighting_error : reweighting_error_bound(in);
  const double b = in.data_fnorm;
  out.reweighting_error = f;

  out.projection_term = std::numeric_limits<double>::infinity();
  for (Index n = 0; n < order; ++n) {
    const double v = static_cast<double>(ranks[n]) * std::pow(f / b + in.epsilon, 2);
    out.projection_term = std::min(out.projection_term, v);
  }

  const double slack = f + in.epsilon * b;
  for (Index n = 0; n < order; ++n) {
    const auto& s = in.mode_singular_values[static_cast<std::size_t>(n)];
    const Index r = ranks[n];
    if (r > s.size()) throw std::invalid_argument("completion_error_bound: rank exceeds unfolding size");
    const double s1 = s[0];
    const double sr = s[r - 1];
    const double sr1 = r < s.size() ? s[r] : 0.0;
    const double gap = sr - sr1;
    if (!(gap > 0)) {
      out.finite = false;
      out.perturbation_term = std::numeric_limits<double>::infinity();
      out.diagnostic += "vanishing spectral gap on mode " + std::to_string(n) + " at rank " + std::to_string(r) + "; ";
      continue;
    }
    const double r_d = static_cast<double>(r);
    out.perturbation_term += 12.0 * r_d * s1 * s1 / (b * b) * std::pow(2.0 * s1 + slack, 2) /
                             std::pow(sr + sr1, 2) * (slack * slack) / (gap * gap);
  }

  for (Index n = 0; n < order; ++n) out.tail_term += in.tail(n, ranks[n]);
  out.tail_term /= b * b;

  out.squared = out.projection_term + out.perturbation_term + out.tail_term;
  out.relative = std::sqrt(out.squared);
  return out;
}

}  // namespace tenips
