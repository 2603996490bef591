#pragma once

// Error metrics and the error-magnitude sides of the propensity and
// completion bounds. Probability statements and their universal constants
// are not evaluated.

#include "tenips/decomposition.hpp"
#include "tenips/link.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tenips {

/// ||estimate - truth||_F / ||truth||_F.
double relative_error(const TensorXd& estimate, const TensorXd& truth);

struct BoundInputs {
  double psi = 0;       // ||B||_max
  double alpha = 0;     // ||A||_max
  double theta = 0;     // ||A_square||_* / sqrt(I)
  double alpha_sp = 0;  // spikiness psi * sqrt(I) / ||B||_F
  double l_gamma = 0;   // sup_{|x|<=gamma} |s'| / (s (1 - s))
  double tau = 0;
  double gamma = 0;
  double epsilon = 0;  // spectral slack, relative to ||B||_F
  double data_fnorm = 0;
  double link_at_minus_gamma = 0;  // s(-gamma)
  double link_at_minus_alpha = 0;  // s(-alpha)
  Index total_size = 0;
  Index square_rows = 0, square_cols = 0;
  std::vector<Eigen::VectorXd> mode_singular_values;  // of each B_(n), non-increasing
  std::vector<double> kappa;                          // sigma_1 / sigma_{r_n} per mode

  /// Tail energy sum_{i > r} sigma_i^2 of the mode-n unfolding.
  double tail(Index mode, Index r) const;
};

/// Collects every quantity the bounds need from the data tensor B and the
/// parameter tensor A. `ranks` selects the condition numbers reported in kappa.
BoundInputs compute_bound_inputs(const TensorXd& data, const TensorXd& parameter, const LinkFunction& link,
                                 const RankProfile& ranks, double tau, double gamma, double epsilon);

/// max_n ||X_(n) - B_(n)||_2 / ||B||_F: the realized spectral deviation of an
/// estimate X from B, the quantity the slack epsilon has to dominate.
double spectral_slack(const TensorXd& estimate, const TensorXd& data);

/// 4 e L_gamma tau (I_S^{-1/2} + I_{S^C}^{-1/2}): bound on the mean squared
/// propensity error when estimating on unfolding `spec`.
double propensity_error_bound(const BoundInputs& in, const UnfoldingSpec& spec, double tau);

/// Bound on ||Xbar(P_hat) - Xbar(P)||_F implied by the propensity bound on the
/// square unfolding.
double reweighting_error_bound(const BoundInputs& in);

struct CompletionBound {
  double projection_term = 0;    // min_n r_n (F/||B|| + eps)^2
  double perturbation_term = 0;  // subspace perturbation sum over modes
  double tail_term = 0;          // sum_n tail_n / ||B||^2
  double squared = 0;            // sum of the three terms, bounds rel_err^2
  double relative = 0;           // sqrt(squared), comparable to rel_err
  double reweighting_error = 0;  // F used in the terms
  bool finite = true;
  std::string diagnostic;
};

/// Three-term bound on the squared relative completion error. When
/// `reweighting_error` is absent the implied bound is used. A vanishing
/// spectral gap sigma_r == sigma_{r+1} on any mode yields +inf.
CompletionBound completion_error_bound(const BoundInputs& in, const RankProfile& ranks,
                                       std::optional<double> reweighting_error = std::nullopt);

}  // namespace tenips
