#pragma once

#include <memory>
#include <string_view>

namespace tenips {

/// Differentiable map R -> (0, 1) turning parameters into propensities.
class LinkFunction {
 public:
  virtual ~LinkFunction() = default;

  virtual std::string_view name() const = 0;
  virtual double value(double x) const = 0;
  virtual double derivative(double x) const = 0;

  /// -y log s(x) - (1 - y) log(1 - s(x)); y may be any real in [0, 1].
  virtual double loss(double x, double y) const;
  /// d loss / dx.
  virtual double loss_derivative(double x, double y) const;
  /// Upper bound on d^2 loss / dx^2 over x, used for the gradient step 1/L.
  virtual double loss_curvature_bound() const = 0;
  /// sup over |x| <= gamma of |s'(x)| / (s(x)(1 - s(x))).
  virtual double l_gamma(double gamma) const;
};

class LogisticLink final : public LinkFunction {
 public:
  std::string_view name() const override { return "logistic"; }
  double value(double x) const override;
  double derivative(double x) const override;
  double loss(double x, double y) const override;
  double loss_derivative(double x, double y) const override;
  double loss_curvature_bound() const override { return 0.25; }
  /// s' = s(1 - s), so the ratio is identically one.
  double l_gamma(double) const override { return 1.0; }
};

std::shared_ptr<const LinkFunction> logistic_link();

/// log(1 + e^x) without overflow.
double softplus(double x);

}  // namespace tenips
