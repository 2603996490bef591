#pragma once

// SVD building blocks: truncated left singular spaces, one-pass HOSVD, Tucker
// reconstruction, tail energy and the two projections used by the convex
// propensity estimator.

#include "tenips/tensor.hpp"

#include <functional>
#include <string>
#include <vector>

namespace tenips {

/// Target multilinear rank (r_0, ..., r_{N-1}).
class RankProfile {
 public:
  RankProfile() = default;
  RankProfile(std::initializer_list<Index> ranks) : RankProfile(std::vector<Index>(ranks)) {}
  explicit RankProfile(std::vector<Index> ranks) : ranks_(std::move(ranks)) {
    for (Index r : ranks_)
      if (r < 1) throw std::invalid_argument("RankProfile: ranks must be positive");
  }
  static RankProfile Uniform(Index order, Index r) {
    return RankProfile(std::vector<Index>(static_cast<std::size_t>(order), r));
  }

  Index order() const { return static_cast<Index>(ranks_.size()); }
  Index operator[](Index n) const { return ranks_[static_cast<std::size_t>(n)]; }
  const std::vector<Index>& ranks() const { return ranks_; }

  void check(const Shape& shape) const {
    if (order() != shape.order())
      throw std::invalid_argument("RankProfile: order does not match shape " + shape.to_string());
    for (Index n = 0; n < order(); ++n)
      if ((*this)[n] > shape[n])
        throw std::invalid_argument("RankProfile: rank " + std::to_string((*this)[n]) +
                                    " exceeds mode size " + std::to_string(shape[n]));
  }

  /// Product of the ranks over the given modes.
  Index product(const std::vector<Index>& modes) const {
    Index p = 1;
    for (Index m : modes) p *= (*this)[m];
    return p;
  }

  std::string to_string() const {
    std::string s;
    for (std::size_t i = 0; i < ranks_.size(); ++i) s += (i ? "," : "") + std::to_string(ranks_[i]);
    return s;
  }

  bool operator==(const RankProfile& o) const { return ranks_ == o.ranks_; }

 private:
  std::vector<Index> ranks_;
};

template <typename Scalar>
struct Tucker {
  Tensor<Scalar> core;
  std::vector<MatrixX<Scalar>> factors;  // factor n is I_n x r_n

  Index order() const { return core.order(); }

  Shape shape() const {
    std::vector<Index> dims;
    for (const auto& f : factors) dims.push_back(f.rows());
    return Shape(dims);
  }

  RankProfile ranks() const { return RankProfile(core.shape().dims()); }
};

using TuckerXd = Tucker<double>;

/// Flips each column so its largest-magnitude entry is positive. Ties go to
/// the first such entry.
template <typename Derived>
void canonicalize_signs(Eigen::MatrixBase<Derived>& basis) {
  for (Index j = 0; j < basis.cols(); ++j) {
    Index arg = 0;
    basis.col(j).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, j) < 0) basis.col(j) *= -1;
  }
}

template <typename Scalar>
struct LeftSingular {
  MatrixX<Scalar> basis;   // rows x r, orthonormal columns
  VectorX<Scalar> values;  // sigma_1 >= ... >= sigma_r
};

/// Top-r left singular vectors of m with a deterministic sign convention.
/// When sigma_r == sigma_{r+1} the first r in the solver's order are kept.
template <typename Derived>
LeftSingular<typename Derived::Scalar> truncated_left_singular(const Eigen::MatrixBase<Derived>& m,
                                                              Index r) {
  using Scalar = typename Derived::Scalar;
  if (r < 1 || r > std::min(m.rows(), m.cols()))
    throw std::invalid_argument("truncated_left_singular: rank " + std::to_string(r) +
                                " out of range for " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()));
  detail::require_finite(m, "truncated_left_singular");
  Eigen::BDCSVD<MatrixX<Scalar>> svd(m.derived().eval(), Eigen::ComputeThinU);
  if (svd.info() != Eigen::Success) throw std::runtime_error("truncated_left_singular: SVD did not converge");
  LeftSingular<Scalar> out{svd.matrixU().leftCols(r), svd.singularValues().head(r)};
  canonicalize_signs(out.basis);
  return out;
}

/// Applies factor n (or its transpose) along every mode n.
template <typename Scalar>
Tensor<Scalar> multi_mode_product(const Tensor<Scalar>& t, const std::vector<MatrixX<Scalar>>& factors,
                                  bool transpose) {
  if (static_cast<Index>(factors.size()) != t.order())
    throw std::invalid_argument("multi_mode_product: one factor per mode required");
  Tensor<Scalar> out = t;
  for (Index n = 0; n < t.order(); ++n) {
    const auto& f = factors[static_cast<std::size_t>(n)];
    out = transpose ? mode_product(out, f.transpose(), n) : mode_product(out, f, n);
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> reconstruct(const Tucker<Scalar>& d) {
  if (static_cast<Index>(d.factors.size()) != d.core.order())
    throw std::invalid_argument("reconstruct: factor count does not match core order");
  for (Index n = 0; n < d.core.order(); ++n)
    if (d.factors[static_cast<std::size_t>(n)].cols() != d.core.shape()[n])
      throw std::invalid_argument("reconstruct: factor " + std::to_string(n) +
                                  " column count does not match core");
  return multi_mode_product(d.core, d.factors, false);
}

/// One-pass HOSVD: Q_n spans the top r_n left singular vectors of the mode-n
/// unfolding, and the core is t x_1 Q_1^T ... x_N Q_N^T.
template <typename Scalar>
Tucker<Scalar> hosvd(const Tensor<Scalar>& t, const RankProfile& ranks) {
  ranks.check(t.shape());
  Tucker<Scalar> out;
  for (Index n = 0; n < t.order(); ++n)
    out.factors.push_back(truncated_left_singular(unfold(t, n), ranks[n]).basis);
  out.core = multi_mode_product(t, out.factors, true);
  return out;
}

/// Sum of sigma_i^2 for i > r.
template <typename Derived>
typename Derived::Scalar tail_energy(const Eigen::MatrixBase<Derived>& m, Index r) {
  if (r < 0 || r > std::min(m.rows(), m.cols()))
    throw std::invalid_argument("tail_energy: rank out of range");
  const auto s = singular_values(m);
  return s.tail(s.size() - r).squaredNorm();
}

/// Euclidean projection onto {x : ||x||_1 <= radius}, sort-based.
template <typename Scalar>
VectorX<Scalar> project_l1_ball(const VectorX<Scalar>& v, Scalar radius) {
  if (!(radius > 0)) throw std::invalid_argument("project_l1_ball: radius must be positive");
  if (v.cwiseAbs().sum() <= radius) return v;
  std::vector<Scalar> mags(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(v[i]);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  Scalar cumsum = 0, theta = 0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    cumsum += mags[k];
    const Scalar candidate = (cumsum - radius) / static_cast<Scalar>(k + 1);
    if (mags[k] > candidate) theta = candidate;
    else break;
  }
  VectorX<Scalar> out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const Scalar shrunk = std::max(std::abs(v[i]) - theta, Scalar(0));
    out[i] = v[i] < 0 ? -shrunk : shrunk;
  }
  return out;
}

/// Frobenius-nearest matrix with nuclear norm at most `radius`.
template <typename Derived>
MatrixX<typename Derived::Scalar> project_nuclear_ball(const Eigen::MatrixBase<Derived>& m,
                                                       typename Derived::Scalar radius) {
  using Scalar = typename Derived::Scalar;
  if (!(radius > 0)) throw std::invalid_argument("project_nuclear_ball: radius must be positive");
  detail::require_finite(m, "project_nuclear_ball");
  Eigen::BDCSVD<MatrixX<Scalar>> svd(m.derived().eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw std::runtime_error("project_nuclear_ball: SVD did not converge");
  const VectorX<Scalar>& s = svd.singularValues();
  if (s.sum() <= radius) return m;
  const VectorX<Scalar> shrunk = project_l1_ball<Scalar>(s, radius);
  Index keep = 0;
  while (keep < shrunk.size() && shrunk[keep] > 0) ++keep;
  return svd.matrixU().leftCols(keep) * shrunk.head(keep).asDiagonal() *
         svd.matrixV().leftCols(keep).transpose();
}

/// Entrywise clamp to [-gamma, gamma].
template <typename Scalar>
Tensor<Scalar> project_box(const Tensor<Scalar>& t, Scalar gamma) {
  if (!(gamma > 0)) throw std::invalid_argument("project_box: gamma must be positive");
  return Tensor<Scalar>(t.shape(), t.data().cwiseMax(-gamma).cwiseMin(gamma));
}

}  // namespace tenips
