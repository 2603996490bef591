#pragma once

// Completion from inverse-propensity-reweighted observations: the HOSVD
// estimator and the matrix/weighted baselines it is compared against.

#include "tenips/decomposition.hpp"

#include <optional>
#include <string>

namespace tenips {

/// Partially observed tensor: explicit zeros at unobserved entries plus the mask.
class ObservedInstance {
 public:
  ObservedInstance(TensorXd observed, Mask mask);

  /// Keeps the entries of `full` selected by `mask`.
  static ObservedInstance observe(const TensorXd& full, const Mask& mask);

  const TensorXd& observed() const { return observed_; }
  const Mask& mask() const { return mask_; }
  const Shape& shape() const { return observed_.shape(); }

 private:
  TensorXd observed_;
  Mask mask_;
};

struct ReweightOptions {
  /// Propensities in (0, floor) are raised to floor before division.
  double floor = 1e-6;
};

struct Reweighted {
  TensorXd tensor;
  Index clamped = 0;  // observed entries whose propensity was raised to the floor
};

/// Observed entries divided by their propensity; zero elsewhere. Throws if an
/// observed entry has a non-positive propensity.
Reweighted ips_reweight_counted(const ObservedInstance& inst, const TensorXd& propensity,
                                const ReweightOptions& opts = {});
TensorXd ips_reweight(const ObservedInstance& inst, const TensorXd& propensity, const ReweightOptions& opts = {});

struct CompletionResult {
  TensorXd estimate;
  /// Tucker form of the estimate when the method produces one (HOSVD
  /// estimator and mode unfolding baseline).
  std::optional<TuckerXd> decomposition;
  std::string method;
  double seconds = 0;
  Index clamped_propensities = 0;
};

/// HOSVD of the reweighted observations at the target multilinear rank.
CompletionResult tenips_complete(const ObservedInstance& inst, const TensorXd& propensity, const RankProfile& ranks,
                                 const ReweightOptions& opts = {});

/// Rank-r truncated SVD of the square unfolding of the reweighted observations.
CompletionResult sq_unfold_complete(const ObservedInstance& inst, const TensorXd& propensity, Index rank,
                                    const ReweightOptions& opts = {});

/// Rank-r truncated SVD of the mode-`mode` unfolding of the reweighted observations.
CompletionResult rect_unfold_complete(const ObservedInstance& inst, const TensorXd& propensity, Index rank,
                                      Index mode = 0, const ReweightOptions& opts = {});

/// Weighted HOSVD: scale observations by p^{-1/2}, take the HOSVD
/// reconstruction, scale by p^{-1/2} again.
CompletionResult hosvd_w_complete(const ObservedInstance& inst, const TensorXd& propensity, const RankProfile& ranks,
                                  const ReweightOptions& opts = {});

/// Matrix rank induced on an unfolding by a multilinear rank profile:
/// min(prod of row-mode ranks, prod of column-mode ranks).
Index induced_rank(const RankProfile& ranks, const UnfoldingSpec& spec);

}  // namespace tenips
