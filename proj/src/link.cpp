#include "tenips/link.hpp"

#include <algorithm>
#include <cmath>

namespace tenips {

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double LinkFunction::loss(double x, double y) const {
  const double s = value(x);
  return -y * std::log(s) - (1.0 - y) * std::log1p(-s);
}

double LinkFunction::loss_derivative(double x, double y) const {
  const double s = value(x);
  const double ds = derivative(x);
  return -y * ds / s + (1.0 - y) * ds / (1.0 - s);
}

double LinkFunction::l_gamma(double gamma) const {
  // Grid search; exact instances override this.
  constexpr int kSteps = 2000;
  double best = 0;
  for (int k = 0; k <= kSteps; ++k) {
    const double x = -gamma + 2.0 * gamma * k / kSteps;
    const double s = value(x);
    best = std::max(best, std::abs(derivative(x)) / (s * (1.0 - s)));
  }
  return best;
}

double LogisticLink::value(double x) const {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double LogisticLink::derivative(double x) const {
  const double s = value(x);
  return s * (1.0 - s);
}

// -y log s(x) = y softplus(-x), -(1-y) log(1 - s(x)) = (1-y) softplus(x).
double LogisticLink::loss(double x, double y) const {
  return y * softplus(-x) + (1.0 - y) * softplus(x);
}

double LogisticLink::loss_derivative(double x, double y) const { return value(x) - y; }

std::shared_ptr<const LinkFunction> logistic_link() {
  static const auto instance = std::make_shared<const LogisticLink>();
  return instance;
}

}  // namespace tenips
