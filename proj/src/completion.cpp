#include "tenips/completion.hpp"

#include <chrono>
#include <cmath>

namespace tenips {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_propensity_shape(const ObservedInstance& inst, const TensorXd& p) {
  if (p.shape() != inst.shape()) throw std::invalid_argument("propensity shape does not match the instance");
}

// Best rank-r approximation via projection onto the top-r left singular space.
Eigen::MatrixXd truncate(const Eigen::MatrixXd& m, Index rank) {
  const auto left = truncated_left_singular(m, rank);
  return left.basis * (left.basis.transpose() * m);
}

}  // namespace

ObservedInstance::ObservedInstance(TensorXd observed, Mask mask)
    : observed_(std::move(observed)), mask_(std::move(mask)) {
  if (observed_.shape() != mask_.shape()) throw std::invalid_argument("ObservedInstance: shape mismatch");
  for (Index i = 0; i < observed_.size(); ++i)
    if (!mask_[i] && observed_[i] != 0)
      throw std::invalid_argument("ObservedInstance: unobserved entries must be zero");
}

ObservedInstance ObservedInstance::observe(const TensorXd& full, const Mask& mask) {
  return ObservedInstance(hadamard(full, mask), mask);
}

Reweighted ips_reweight_counted(const ObservedInstance& inst, const TensorXd& propensity, const ReweightOptions& opts) {
  check_propensity_shape(inst, propensity);
  if (!(opts.floor > 0)) throw std::invalid_argument("ips_reweight: floor must be positive");
  Reweighted out{TensorXd(inst.shape()), 0};
  const Mask& mask = inst.mask();
  for (Index i = 0; i < out.tensor.size(); ++i) {
    if (!mask[i]) continue;
    double p = propensity[i];
    if (!(p > 0))
      throw std::invalid_argument("ips_reweight: non-positive propensity at observed entry " + std::to_string(i));
    if (p < opts.floor) {
      p = opts.floor;
      ++out.clamped;
    }
    out.tensor[i] = inst.observed()[i] / p;
  }
  return out;
}

TensorXd ips_reweight(const ObservedInstance& inst, const TensorXd& propensity, const ReweightOptions& opts) {
  return ips_reweight_counted(inst, propensity, opts).tensor;
}

CompletionResult tenips_complete(const ObservedInstance& inst, const TensorXd& propensity, const RankProfile& ranks,
                                 const ReweightOptions& opts) {
  const auto start = Clock::now();
  ranks.check(inst.shape());
  Reweighted x = ips_reweight_counted(inst, propensity, opts);
  CompletionResult out;
  out.method = "TenIPS";
  out.decomposition = hosvd(x.tensor, ranks);
  out.estimate = reconstruct(*out.decomposition);
  out.clamped_propensities = x.clamped;
  out.seconds = seconds_since(start);
  return out;
}

CompletionResult sq_unfold_complete(const ObservedInstance& inst, const TensorXd& propensity, Index rank,
                                    const ReweightOptions& opts) {
  const auto start = Clock::now();
  const UnfoldingSpec spec = square_set(inst.shape());
  Reweighted x = ips_reweight_counted(inst, propensity, opts);
  CompletionResult out;
  out.method = "SqUnfold";
  out.estimate = fold(truncate(unfold(x.tensor, spec), rank), spec, inst.shape());
  out.clamped_propensities = x.clamped;
  out.seconds = seconds_since(start);
  return out;
}

CompletionResult rect_unfold_complete(const ObservedInstance& inst, const TensorXd& propensity, Index rank,
                                      Index mode, const ReweightOptions& opts) {
  const auto start = Clock::now();
  check_mode(inst.shape(), mode);
  Reweighted x = ips_reweight_counted(inst, propensity, opts);
  const Eigen::MatrixXd m = unfold(x.tensor, mode);
  const auto left = truncated_left_singular(m, rank);

  // Tucker form: the truncated basis on `mode`, identities elsewhere.
  TuckerXd d;
  const Shape& shape = inst.shape();
  for (Index n = 0; n < shape.order(); ++n)
    d.factors.push_back(n == mode ? left.basis : Eigen::MatrixXd::Identity(shape[n], shape[n]));
  d.core = fold(Eigen::MatrixXd(left.basis.transpose() * m), mode, shape.with_mode(mode, rank));

  CompletionResult out;
  out.method = "RectUnfold";
  out.estimate = fold(Eigen::MatrixXd(left.basis * (left.basis.transpose() * m)), mode, shape);
  out.decomposition = std::move(d);
  out.clamped_propensities = x.clamped;
  out.seconds = seconds_since(start);
  return out;
}

CompletionResult hosvd_w_complete(const ObservedInstance& inst, const TensorXd& propensity, const RankProfile& ranks,
                                  const ReweightOptions& opts) {
  const auto start = Clock::now();
  check_propensity_shape(inst, propensity);
  ranks.check(inst.shape());
  if (!(opts.floor > 0)) throw std::invalid_argument("hosvd_w: floor must be positive");
  const Mask& mask = inst.mask();
  Index clamped = 0;
  Eigen::VectorXd inv_sqrt(propensity.size());
  for (Index i = 0; i < propensity.size(); ++i) {
    double p = propensity[i];
    if (mask[i] && !(p > 0))
      throw std::invalid_argument("hosvd_w: non-positive propensity at observed entry " + std::to_string(i));
    if (!(p >= opts.floor)) {
      p = opts.floor;
      ++clamped;
    }
    inv_sqrt[i] = 1.0 / std::sqrt(p);
  }
  TensorXd y(inst.shape());
  for (Index i = 0; i < y.size(); ++i)
    if (mask[i]) y[i] = inst.observed()[i] * inv_sqrt[i];
  TensorXd d = reconstruct(hosvd(y, ranks));
  d.data().array() *= inv_sqrt.array();

  CompletionResult out;
  out.method = "HOSVD_w";
  out.estimate = std::move(d);
  out.clamped_propensities = clamped;
  out.seconds = seconds_since(start);
  return out;
}

Index induced_rank(const RankProfile& ranks, const UnfoldingSpec& spec) {
  if (ranks.order() != spec.order()) throw std::invalid_argument("induced_rank: order mismatch");
  return std::min(ranks.product(spec.row_modes()), ranks.product(spec.col_modes()));
}

}  // namespace tenips
