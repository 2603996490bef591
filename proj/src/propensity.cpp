#include "tenips/propensity.hpp"

#include "tenips/random.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace tenips {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double relative_change(double before, double after) {
  return std::abs(before - after) / std::max(std::abs(before), std::numeric_limits<double>::min());
}

Eigen::VectorXd loss_derivative(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const LinkFunction& link) {
  Eigen::VectorXd out(x.size());
  for (Index i = 0; i < x.size(); ++i) out[i] = link.loss_derivative(x[i], y[i]);
  return out;
}

void add_mask_warnings(const Mask& mask, std::vector<std::string>& warnings) {
  const Index seen = mask.observed_count();
  if (seen == 0) warnings.emplace_back("degenerate mask: no observed entries");
  if (seen == mask.size()) warnings.emplace_back("degenerate mask: every entry observed");
}

// Gradients at a precomputed A = reconstruct(d).
TuckerGradients gradients_at(const TuckerXd& d, const TensorXd& a, const TensorXd& observed,
                             const LinkFunction& link) {
  const TensorXd residual(a.shape(), loss_derivative(a.data(), observed.data(), link));
  const Index order = d.order();
  TuckerGradients g;
  g.core = multi_mode_product(residual, d.factors, true);
  for (Index n = 0; n < order; ++n) {
    TensorXd z = residual;
    for (Index m = 0; m < order; ++m)
      if (m != n) z = mode_product(z, d.factors[static_cast<std::size_t>(m)].transpose(), m);
    g.factors.push_back(unfold(z, n) * unfold(d.core, n).transpose());
  }
  return g;
}

void check_tucker(const TuckerXd& d, const Shape& shape) {
  if (static_cast<Index>(d.factors.size()) != d.core.order() || d.core.order() != shape.order())
    throw std::invalid_argument("Tucker parameters do not match the mask order");
  for (Index n = 0; n < shape.order(); ++n) {
    const auto& f = d.factors[static_cast<std::size_t>(n)];
    if (f.rows() != shape[n] || f.cols() != d.core.shape()[n])
      throw std::invalid_argument("Tucker factor " + std::to_string(n) + " has inconsistent dimensions");
  }
}

}  // namespace

TensorXd PropensityModel::evaluate() const {
  if (!link) throw std::invalid_argument("PropensityModel: missing link function");
  TensorXd p(parameter.shape());
  for (Index i = 0; i < p.size(); ++i) p[i] = link->value(parameter[i]);
  return p;
}

double negative_log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& parameter,
                               const Eigen::Ref<const Eigen::VectorXd>& observed, const LinkFunction& link) {
  if (parameter.size() != observed.size())
    throw std::invalid_argument("negative_log_likelihood: size mismatch");
  double total = 0;
  for (Index i = 0; i < parameter.size(); ++i) total += link.loss(parameter[i], observed[i]);
  return total;
}

double negative_log_likelihood(const TensorXd& parameter, const Mask& mask, const LinkFunction& link) {
  if (parameter.shape() != mask.shape()) throw std::invalid_argument("negative_log_likelihood: shape mismatch");
  return negative_log_likelihood(parameter.data(), mask.as_tensor().data(), link);
}

double negative_log_likelihood(const TensorXd& parameter, const TensorXd& observed, const LinkFunction& link) {
  if (parameter.shape() != observed.shape())
    throw std::invalid_argument("negative_log_likelihood: shape mismatch");
  return negative_log_likelihood(parameter.data(), observed.data(), link);
}

void ConvexPEConfig::validate() const {
  if (!(tau > 0)) throw std::invalid_argument("ConvexPEConfig: tau must be positive");
  if (!(gamma > 0)) throw std::invalid_argument("ConvexPEConfig: gamma must be positive");
  if (step < 0) throw std::invalid_argument("ConvexPEConfig: step must be positive (or 0 for the default)");
  if (max_iterations < 1) throw std::invalid_argument("ConvexPEConfig: max_iterations must be >= 1");
}

nlohmann::json to_json(const SolveReport& r, std::size_t max_trace) {
  std::vector<double> trace = r.objective_trace;
  if (max_trace > 0 && trace.size() > max_trace) {
    std::vector<double> thin;
    const double stride = static_cast<double>(trace.size() - 1) / static_cast<double>(max_trace - 1);
    for (std::size_t k = 0; k < max_trace; ++k)
      thin.push_back(trace[static_cast<std::size_t>(std::llround(stride * static_cast<double>(k)))]);
    trace = std::move(thin);
  }
  return {
      {"iterations", r.iterations},
      {"converged", r.converged},
      {"initial_objective", r.initial_objective},
      {"final_objective", r.final_objective},
      {"objective_trace", trace},
      {"nuclear_norm", r.nuclear_norm},
      {"nuclear_radius", r.nuclear_radius},
      {"nuclear_excess_before_shrink", r.nuclear_excess_before_shrink},
      {"nuclear_residual", r.nuclear_residual},
      {"max_abs", r.max_abs},
      {"box_residual", r.box_residual},
      {"seconds", r.seconds},
      {"unfolding", r.unfolding},
      {"warnings", r.warnings},
  };
}

ConvexPEResult convex_pe(const Mask& mask, std::shared_ptr<const LinkFunction> link, const ConvexPEConfig& cfg) {
  return convex_pe_on_spec(mask, std::move(link), cfg, square_set(mask.shape()));
}

// Projected gradient: a gradient step of size 1/L, then the nuclear-ball
// projection, then the box clamp. The composition is not the projection onto
// the intersection, so the final iterate is shrunk toward the origin if its
// nuclear norm still exceeds the radius (both sets contain the origin and
// are convex, so the shrink keeps the box constraint).
ConvexPEResult convex_pe_on_spec(const Mask& mask, std::shared_ptr<const LinkFunction> link,
                                 const ConvexPEConfig& cfg, const UnfoldingSpec& spec) {
  cfg.validate();
  if (!link) throw std::invalid_argument("convex_pe: missing link function");
  if (!spec.matches(mask.shape())) throw std::invalid_argument("convex_pe: unfolding does not match mask");
  const auto start = Clock::now();

  SolveReport report;
  report.unfolding = spec.to_string();
  add_mask_warnings(mask, report.warnings);

  const Eigen::MatrixXd observed = unfold(mask.as_tensor(), spec);
  const Eigen::Map<const Eigen::VectorXd> y(observed.data(), observed.size());
  const double radius = cfg.tau * std::sqrt(static_cast<double>(mask.size()));
  const double step = cfg.step > 0 ? cfg.step : 1.0 / link->loss_curvature_bound();
  report.nuclear_radius = radius;

  Eigen::MatrixXd gamma_mat = Eigen::MatrixXd::Zero(observed.rows(), observed.cols());
  double objective = negative_log_likelihood(
      Eigen::Map<const Eigen::VectorXd>(gamma_mat.data(), gamma_mat.size()), y, *link);
  report.initial_objective = objective;
  Eigen::MatrixXd best = gamma_mat;
  double best_objective = objective;

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    Eigen::MatrixXd grad(gamma_mat.rows(), gamma_mat.cols());
    for (Index i = 0; i < grad.size(); ++i) grad.data()[i] = link->loss_derivative(gamma_mat.data()[i], y[i]);
    Eigen::MatrixXd next = project_nuclear_ball(gamma_mat - step * grad, radius);
    next = next.cwiseMax(-cfg.gamma).cwiseMin(cfg.gamma);
    const double next_objective =
        negative_log_likelihood(Eigen::Map<const Eigen::VectorXd>(next.data(), next.size()), y, *link);
    if (cfg.keep_trace) report.objective_trace.push_back(next_objective);
    const double change = relative_change(objective, next_objective);
    gamma_mat = std::move(next);
    objective = next_objective;
    report.iterations = it;
    if (objective < best_objective) {
      best_objective = objective;
      best = gamma_mat;
    }
    if (change < cfg.tolerance) {
      report.converged = true;
      break;
    }
  }
  if (!report.converged) {
    report.warnings.emplace_back("did not converge within " + std::to_string(cfg.max_iterations) +
                                 " iterations; returning the best iterate");
    gamma_mat = std::move(best);
  }

  double nuclear = nuclear_norm(gamma_mat);
  report.nuclear_excess_before_shrink = std::max(0.0, nuclear - radius);
  if (nuclear > radius) {
    gamma_mat *= radius / nuclear;
    nuclear = nuclear_norm(gamma_mat);
  }
  report.nuclear_norm = nuclear;
  report.nuclear_residual = std::max(0.0, nuclear - radius);
  report.max_abs = gamma_mat.cwiseAbs().maxCoeff();
  report.box_residual = std::max(0.0, report.max_abs - cfg.gamma);
  report.final_objective =
      negative_log_likelihood(Eigen::Map<const Eigen::VectorXd>(gamma_mat.data(), gamma_mat.size()), y, *link);
  report.seconds = seconds_since(start);

  ConvexPEResult out;
  out.model.link = std::move(link);
  out.model.parameter = fold(gamma_mat, spec, mask.shape());
  out.report = std::move(report);
  return out;
}

TuckerGradients tucker_gradients(const TuckerXd& d, const TensorXd& observed, const LinkFunction& link) {
  check_tucker(d, observed.shape());
  return gradients_at(d, reconstruct(d), observed, link);
}

TuckerGradients tucker_gradients(const TuckerXd& d, const Mask& mask, const LinkFunction& link) {
  return tucker_gradients(d, mask.as_tensor(), link);
}

TuckerXd uniform_initialization(const Shape& shape, const RankProfile& ranks, std::uint64_t seed) {
  ranks.check(shape);
  Rng rng(seed);
  TuckerXd d;
  d.core = TensorXd(Shape(ranks.ranks()));
  for (Index i = 0; i < d.core.size(); ++i) d.core[i] = rng.uniform(-1.0, 1.0);
  for (Index n = 0; n < shape.order(); ++n) d.factors.push_back(rng.uniform_matrix(shape[n], ranks[n], -1.0, 1.0));
  return d;
}

void NonconvexPEConfig::validate() const {
  if (step < 0 || !std::isfinite(step)) throw std::invalid_argument("NonconvexPEConfig: step must be >= 0");
  if (ranks.order() == 0) throw std::invalid_argument("NonconvexPEConfig: rank profile required");
  if (!initializer) throw std::invalid_argument("NonconvexPEConfig: initializer required");
  if (max_iterations < 1) throw std::invalid_argument("NonconvexPEConfig: max_iterations must be >= 1");
  if (!(divergence_factor > 1)) throw std::invalid_argument("NonconvexPEConfig: divergence_factor must exceed 1");
}

NonconvexPEResult nonconvex_pe(const Mask& mask, std::shared_ptr<const LinkFunction> link,
                               const NonconvexPEConfig& cfg) {
  cfg.validate();
  if (!link) throw std::invalid_argument("nonconvex_pe: missing link function");
  cfg.ranks.check(mask.shape());
  const auto start = Clock::now();

  NonconvexPEResult out;
  add_mask_warnings(mask, out.warnings);
  const TensorXd observed = mask.as_tensor();
  TuckerXd d = cfg.initializer(mask.shape(), cfg.ranks, cfg.seed);
  check_tucker(d, mask.shape());

  TensorXd a = reconstruct(d);
  double objective = negative_log_likelihood(a, observed, *link);
  const double initial = objective;
  out.objective_trace.push_back(objective);

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const TuckerGradients g = gradients_at(d, a, observed, *link);
    d.core -= cfg.step * g.core;
    for (std::size_t n = 0; n < d.factors.size(); ++n) d.factors[n] -= cfg.step * g.factors[n];
    a = reconstruct(d);
    const double next = negative_log_likelihood(a, observed, *link);
    out.objective_trace.push_back(next);
    out.iterations = it;
    if (!std::isfinite(next) || next > cfg.divergence_factor * initial) {
      throw DivergenceError("nonconvex_pe: objective diverged at iteration " + std::to_string(it) + " (" +
                                std::to_string(next) + " vs initial " + std::to_string(initial) +
                                "); reduce the step size",
                            it, out.objective_trace);
    }
    const double change = relative_change(objective, next);
    objective = next;
    if (change < cfg.tolerance) {
      out.converged = true;
      break;
    }
  }

  out.model.link = std::move(link);
  out.model.parameter = std::move(a);
  out.model.factors = std::move(d);
  out.seconds = seconds_since(start);
  return out;
}

StepSearchResult nonconvex_pe_step_search(const Mask& mask, std::shared_ptr<const LinkFunction> link,
                                          const NonconvexPEConfig& cfg, int max_halvings) {
  if (max_halvings < 0) throw std::invalid_argument("nonconvex_pe_step_search: max_halvings must be >= 0");
  StepSearchResult out;
  NonconvexPEConfig trial = cfg;
  std::vector<double> last_trace;
  for (int k = 0; k <= max_halvings; ++k, trial.step *= 0.5) {
    try {
      NonconvexPEResult r = nonconvex_pe(mask, link, trial);
      const auto& t = r.objective_trace;
      bool monotone = true;
      for (std::size_t i = 1; i < t.size() && monotone; ++i)
        monotone = t[i] <= t[i - 1] * (1 + 1e-12);
      if (monotone) {
        out.step = trial.step;
        out.result = std::move(r);
        return out;
      }
      last_trace = t;
    } catch (const DivergenceError& e) {
      last_trace = e.trace();
    }
    out.rejected.push_back(trial.step);
  }
  throw DivergenceError("nonconvex_pe_step_search: no monotone step down to " + std::to_string(trial.step * 2),
                        static_cast<int>(last_trace.size()) - 1, last_trace);
}

}  // namespace tenips
