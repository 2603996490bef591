#pragma once

// Propensity estimation from a binary mask: the convex estimator runs
// projected gradient descent on an unfolding under nuclear-norm and max-norm
// constraints; the nonconvex estimator runs plain gradient descent on a
// Tucker parameterization.

#include "tenips/decomposition.hpp"
#include "tenips/link.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tenips {

struct PropensityModel {
  std::shared_ptr<const LinkFunction> link;
  TensorXd parameter;                 // the parameter tensor A
  std::optional<TuckerXd> factors;    // set when A is held in Tucker form

  /// Entrywise link applied to the parameter tensor.
  TensorXd evaluate() const;
};

// --- objective ------------------------------------------------------------

/// Sum over entries of -y log s(x) - (1 - y) log(1 - s(x)). `observed` is
/// usually a 0/1 mask but any values in [0, 1] are accepted.
double negative_log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& parameter,
                               const Eigen::Ref<const Eigen::VectorXd>& observed,
                               const LinkFunction& link);
double negative_log_likelihood(const TensorXd& parameter, const Mask& mask, const LinkFunction& link);
double negative_log_likelihood(const TensorXd& parameter, const TensorXd& observed,
                               const LinkFunction& link);

// --- convex estimator -----------------------------------------------------

struct ConvexPEConfig {
  double tau = 1.0;    // nuclear radius is tau * sqrt(total size)
  double gamma = 1.0;  // max-norm bound
  /// Gradient step; zero selects 1 / (curvature bound of the link loss).
  double step = 0.0;
  int max_iterations = 2000;
  double tolerance = 1e-6;  // on relative objective change
  bool keep_trace = true;

  void validate() const;
};

struct SolveReport {
  int iterations = 0;
  bool converged = false;
  double initial_objective = 0;
  double final_objective = 0;
  std::vector<double> objective_trace;  // objective after each iteration
  double nuclear_norm = 0;              // of the returned unfolding
  double nuclear_radius = 0;
  /// Excess of the nuclear norm over the radius after the final box step,
  /// before the radial shrink that restores feasibility.
  double nuclear_excess_before_shrink = 0;
  double nuclear_residual = 0;  // max(0, nuclear_norm - radius)
  double max_abs = 0;
  double box_residual = 0;  // max(0, max_abs - gamma)
  double seconds = 0;
  std::string unfolding;
  std::vector<std::string> warnings;
};

/// `max_trace` > 0 thins the objective trace to about that many points.
nlohmann::json to_json(const SolveReport& report, std::size_t max_trace = 0);

struct ConvexPEResult {
  PropensityModel model;
  SolveReport report;
};

/// Estimator on the square unfolding of the mask.
ConvexPEResult convex_pe(const Mask& mask, std::shared_ptr<const LinkFunction> link,
                         const ConvexPEConfig& cfg);

/// Same estimator on an arbitrary unfolding.
ConvexPEResult convex_pe_on_spec(const Mask& mask, std::shared_ptr<const LinkFunction> link,
                                 const ConvexPEConfig& cfg, const UnfoldingSpec& spec);

// --- Tucker gradients -----------------------------------------------------

struct TuckerGradients {
  TensorXd core;
  std::vector<Eigen::MatrixXd> factors;
};

/// Gradients of the objective at A = core x_1 U_1 ... x_N U_N. With residual
/// R = dloss/dA, dU_n = [R x_{m != n} U_m^T]_(n) G_(n)^T and
/// dG = R x_1 U_1^T ... x_N U_N^T. The Kronecker products never materialize.
TuckerGradients tucker_gradients(const TuckerXd& d, const TensorXd& observed, const LinkFunction& link);
TuckerGradients tucker_gradients(const TuckerXd& d, const Mask& mask, const LinkFunction& link);

// --- nonconvex estimator --------------------------------------------------

/// Produces the starting Tucker parameters for a shape and rank profile.
using TuckerInitializer = std::function<TuckerXd(const Shape&, const RankProfile&, std::uint64_t seed)>;

/// I.i.d. Uniform[-1, 1] core and factors.
TuckerXd uniform_initialization(const Shape& shape, const RankProfile& ranks, std::uint64_t seed);

struct NonconvexPEConfig {
  double step = 1e-3;
  RankProfile ranks;
  TuckerInitializer initializer = uniform_initialization;
  std::uint64_t seed = 0;
  int max_iterations = 1000;
  double tolerance = 1e-8;  // on relative objective change
  double divergence_factor = 10.0;

  void validate() const;
};

struct NonconvexPEResult {
  PropensityModel model;
  std::vector<double> objective_trace;  // entry 0 is the initial objective
  int iterations = 0;
  bool converged = false;
  double seconds = 0;
  std::vector<std::string> warnings;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int iteration, std::vector<double> trace)
      : std::runtime_error(what), iteration_(iteration), trace_(std::move(trace)) {}
  int iteration() const { return iteration_; }
  const std::vector<double>& trace() const { return trace_; }

 private:
  int iteration_;
  std::vector<double> trace_;
};

/// Throws DivergenceError when the objective exceeds divergence_factor times
/// its initial value or stops being finite.
NonconvexPEResult nonconvex_pe(const Mask& mask, std::shared_ptr<const LinkFunction> link,
                               const NonconvexPEConfig& cfg);

struct StepSearchResult {
  double step = 0;                   // accepted step
  NonconvexPEResult result;          // run at the accepted step
  std::vector<double> rejected;      // larger steps that were tried first
};

/// Runs nonconvex_pe at cfg.step, halving the step until the objective trace
/// decreases monotonically without diverging. Throws DivergenceError when no
/// step within `max_halvings` halvings qualifies.
StepSearchResult nonconvex_pe_step_search(const Mask& mask, std::shared_ptr<const LinkFunction> link,
                                          const NonconvexPEConfig& cfg, int max_halvings = 8);

}  // namespace tenips
