#include "tenips/bounds.hpp"
#include "tenips/completion.hpp"
#include "tenips/config.hpp"
#include "tenips/experiment.hpp"
#include "tenips/propensity.hpp"
#include "tenips/synthesis.hpp"
#include "tenips/tensor_io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace tenips;

namespace {

RankProfile ranks_for(const Shape& shape, const std::vector<Index>& given) {
  if (given.empty()) throw std::invalid_argument("--ranks is required");
  if (given.size() == 1) return RankProfile::Uniform(shape.order(), given[0]);
  RankProfile r(given);
  r.check(shape);
  return r;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

struct GenArgs {
  std::string model = "B";
  std::vector<Index> shape{30, 30, 30, 30};
  std::vector<Index> ranks{5};
  double core_std = 100.0;
  std::optional<double> parameter_core_std;
  double noise = 0.1;
  double ratio = 0.4;
  std::uint64_t seed = 0;
  fs::path out_dir = ".";
};

void run_gen(const GenArgs& a) {
  fs::create_directories(a.out_dir);
  const auto link = logistic_link();
  const Shape shape(a.shape);
  TensorXd data, parameter;
  if (a.model == "video") {
    VideoInstance v = video_like_instance(shape, a.seed);
    data = std::move(v.data);
    parameter = std::move(v.model.parameter);
  } else {
    const RankProfile ranks = ranks_for(shape, a.ranks);
    GeneratorConfig g{shape, ranks, a.core_std, a.noise, derive_seed(a.seed, 1)};
    data = add_relative_noise(random_tucker(g).tensor, a.noise, derive_seed(a.seed, 2));
    if (a.model == "A") {
      parameter = TensorXd::Constant(shape, std::log(a.ratio / (1 - a.ratio)));
      model_a_propensity(shape, a.ratio);  // validates the ratio
    } else if (a.model == "B") {
      const double s = a.parameter_core_std.value_or(scaled_core_std(100.0, 100, shape[0], shape.order()));
      parameter = model_b_propensity({shape, ranks, s, a.noise, derive_seed(a.seed, 3)}, link).parameter;
    } else {
      throw std::invalid_argument("--model must be A, B or video");
    }
  }
  const TensorXd p = PropensityModel{link, parameter, std::nullopt}.evaluate();
  const Mask mask = sample_mask(p, derive_seed(a.seed, 4));
  save_tensor(a.out_dir / "data.tnsr", data);
  save_tensor(a.out_dir / "parameter.tnsr", parameter);
  save_tensor(a.out_dir / "propensity.tnsr", p);
  save_mask(a.out_dir / "mask.mask", mask);
  std::cout << "wrote " << shape.to_string() << " instance to " << a.out_dir.string() << " (observed ratio "
            << mask.observed_ratio() << ")\n";
}

struct EstimateArgs {
  fs::path mask;
  std::string method = "ConvexPE";
  std::optional<double> tau, gamma, step;
  std::vector<Index> ranks;
  std::uint64_t seed = 0;
  int max_iterations = 0;
  fs::path truth;
  fs::path out_dir = ".";
};

void run_estimate(const EstimateArgs& a) {
  const Mask mask = load_mask(a.mask);
  const auto link = logistic_link();
  fs::create_directories(a.out_dir);
  PropensityModel model;
  nlohmann::json report;
  if (a.method == "ConvexPE") {
    if (!a.tau || !a.gamma) throw std::invalid_argument("ConvexPE needs --tau and --gamma");
    ConvexPEConfig c;
    c.tau = *a.tau;
    c.gamma = *a.gamma;
    if (a.step) c.step = *a.step;
    if (a.max_iterations > 0) c.max_iterations = a.max_iterations;
    ConvexPEResult r = convex_pe(mask, link, c);
    model = std::move(r.model);
    report = to_json(r.report, 500);
  } else if (a.method == "NonconvexPE") {
    NonconvexPEConfig c;
    c.ranks = ranks_for(mask.shape(), a.ranks);
    c.step = a.step.value_or(scaled_nonconvex_step(mask.shape()));
    c.seed = a.seed;
    if (a.max_iterations > 0) c.max_iterations = a.max_iterations;
    NonconvexPEResult r = nonconvex_pe(mask, link, c);
    model = std::move(r.model);
    report = {{"step", c.step},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"objective_trace", r.objective_trace},
              {"seconds", r.seconds},
              {"warnings", r.warnings}};
  } else {
    throw std::invalid_argument("--method must be ConvexPE or NonconvexPE");
  }
  const TensorXd p = model.evaluate();
  if (!a.truth.empty()) report["propensity_rel_error"] = relative_error(p, load_tensor(a.truth));
  save_tensor(a.out_dir / "propensity_hat.tnsr", p);
  save_tensor(a.out_dir / "parameter_hat.tnsr", model.parameter);
  write_json(a.out_dir / "estimate_report.json", report);
  report.erase("objective_trace");
  std::cout << report.dump(2) << '\n';
}

struct CompleteArgs {
  fs::path data, mask, propensity, truth;
  std::string method = "TenIPS";
  std::vector<Index> ranks;
  Index mode = 0;
  fs::path out_dir = ".";
};

void run_complete(const CompleteArgs& a) {
  const TensorXd data = load_tensor(a.data);
  const Mask mask = load_mask(a.mask);
  const TensorXd p = load_tensor(a.propensity);
  const ObservedInstance inst = ObservedInstance::observe(data, mask);
  const RankProfile ranks = ranks_for(data.shape(), a.ranks);
  CompletionResult r;
  if (a.method == "TenIPS") r = tenips_complete(inst, p, ranks);
  else if (a.method == "HOSVD_w") r = hosvd_w_complete(inst, p, ranks);
  else if (a.method == "SqUnfold") r = sq_unfold_complete(inst, p, induced_rank(ranks, square_set(data.shape())));
  else if (a.method == "RectUnfold") r = rect_unfold_complete(inst, p, ranks[a.mode], a.mode);
  else throw std::invalid_argument("--method must be TenIPS, HOSVD_w, SqUnfold or RectUnfold");
  fs::create_directories(a.out_dir);
  save_tensor(a.out_dir / "completed.tnsr", r.estimate);
  nlohmann::json out = {{"method", r.method}, {"seconds", r.seconds}, {"clamped_propensities", r.clamped_propensities}};
  if (!a.truth.empty()) out["completion_rel_error"] = relative_error(r.estimate, load_tensor(a.truth));
  std::cout << out.dump(2) << '\n';
}

struct BoundArgs {
  fs::path data, parameter, mask, estimate;
  std::vector<Index> ranks;
  std::optional<double> tau, gamma;
};

void run_bound(const BoundArgs& a) {
  const auto link = logistic_link();
  const TensorXd data = load_tensor(a.data);
  const TensorXd parameter = load_tensor(a.parameter);
  const RankProfile ranks = ranks_for(data.shape(), a.ranks);
  const UnfoldingSpec square = square_set(data.shape());
  const double tau = a.tau.value_or(nuclear_norm(unfold(parameter, square)) / std::sqrt(double(data.size())));
  const double gamma = a.gamma.value_or(max_abs(parameter));

  double epsilon = 0;
  std::optional<double> f;
  if (!a.mask.empty()) {
    const Mask mask = load_mask(a.mask);
    const ObservedInstance inst = ObservedInstance::observe(data, mask);
    const TensorXd p = PropensityModel{link, parameter, std::nullopt}.evaluate();
    const TensorXd xbar = ips_reweight(inst, p);
    epsilon = spectral_slack(xbar, data);
    f = 0.0;
    if (!a.estimate.empty()) f = (ips_reweight(inst, load_tensor(a.estimate)).data() - xbar.data()).norm();
  }
  const BoundInputs in = compute_bound_inputs(data, parameter, *link, ranks, tau, gamma, epsilon);
  const CompletionBound b = completion_error_bound(in, ranks, f);
  nlohmann::json out = {
      {"psi", in.psi},
      {"alpha", in.alpha},
      {"theta", in.theta},
      {"alpha_sp", in.alpha_sp},
      {"kappa", in.kappa},
      {"l_gamma", in.l_gamma},
      {"tau", tau},
      {"gamma", gamma},
      {"epsilon", epsilon},
      {"propensity_bound_square", propensity_error_bound(in, square, tau)},
      {"propensity_bound_mode0", propensity_error_bound(in, UnfoldingSpec(data.shape(), {0}), tau)},
      {"reweighting_error", b.reweighting_error},
      {"reweighting_error_empirical", f.has_value()},
      {"projection_term", b.projection_term},
      {"perturbation_term", b.perturbation_term},
      {"tail_term", b.tail_term},
      {"relative_error_bound", b.finite ? nlohmann::json(b.relative) : nlohmann::json("inf")},
      {"diagnostic", b.diagnostic},
  };
  std::cout << out.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor completion under entry-dependent missingness"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "write a synthetic instance (data, parameter, propensity, mask)");
  g->add_option("--model", gen.model, "A (uniform), B (low-rank parameter) or video")->capture_default_str();
  g->add_option("--shape", gen.shape, "mode sizes")->delimiter(',')->capture_default_str();
  g->add_option("--ranks", gen.ranks, "multilinear rank, one value or one per mode")->delimiter(',');
  g->add_option("--core-std", gen.core_std, "core std of the data tensor")->capture_default_str();
  g->add_option("--parameter-core-std", gen.parameter_core_std, "core std of the parameter tensor");
  g->add_option("--noise", gen.noise, "relative noise level")->capture_default_str();
  g->add_option("--ratio", gen.ratio, "observation ratio for model A")->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--out-dir", gen.out_dir)->capture_default_str();

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "estimate propensities from a mask file");
  e->add_option("--mask", est.mask)->required();
  e->add_option("--method", est.method, "ConvexPE or NonconvexPE")->capture_default_str();
  e->add_option("--tau", est.tau);
  e->add_option("--gamma", est.gamma);
  e->add_option("--step", est.step);
  e->add_option("--ranks", est.ranks)->delimiter(',');
  e->add_option("--seed", est.seed);
  e->add_option("--max-iterations", est.max_iterations);
  e->add_option("--truth", est.truth, "true propensity tensor, for the error report");
  e->add_option("--out-dir", est.out_dir)->capture_default_str();

  CompleteArgs comp;
  auto* c = app.add_subcommand("complete", "complete a tensor from observations and propensities");
  c->add_option("--data", comp.data, "data tensor; entries outside the mask are ignored")->required();
  c->add_option("--mask", comp.mask)->required();
  c->add_option("--propensity", comp.propensity)->required();
  c->add_option("--method", comp.method, "TenIPS, HOSVD_w, SqUnfold or RectUnfold")->capture_default_str();
  c->add_option("--ranks", comp.ranks)->delimiter(',')->required();
  c->add_option("--mode", comp.mode, "unfolding mode for RectUnfold");
  c->add_option("--truth", comp.truth, "full tensor, for the error report");
  c->add_option("--out-dir", comp.out_dir)->capture_default_str();

  ExperimentConfig exp;
  fs::path config_path;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> methods;
  std::optional<Index> rank;
  std::optional<double> scale;
  std::string preset, out_dir;
  auto* x = app.add_subcommand("experiment", "run an experiment preset");
  x->add_option("--preset", preset, "fig1, fig2, table2, fig3, video or sensitivity");
  x->add_option("--config", config_path, "key = value file; flags override it");
  x->add_option("--seed", seeds, "seed list")->delimiter(',');
  x->add_option("--out-dir", out_dir);
  x->add_option("--method", methods, "completion methods to run")->delimiter(',');
  x->add_option("--ranks", rank, "true multilinear rank per mode");
  x->add_option("--tau", exp.tau);
  x->add_option("--gamma", exp.gamma);
  x->add_option("--step", exp.step);
  x->add_option("--scale", scale, "multiplier on every mode size");
  bool save_tensors = false;
  x->add_flag("--save-tensors", save_tensors, "write TNSR/MASK inputs of every instance");

  BoundArgs bnd;
  auto* b = app.add_subcommand("bound", "evaluate the propensity and completion error bounds");
  b->add_option("--data", bnd.data)->required();
  b->add_option("--parameter", bnd.parameter)->required();
  b->add_option("--ranks", bnd.ranks)->delimiter(',')->required();
  b->add_option("--mask", bnd.mask, "mask for the spectral slack and reweighting error");
  b->add_option("--estimate", bnd.estimate, "estimated propensity tensor");
  b->add_option("--tau", bnd.tau);
  b->add_option("--gamma", bnd.gamma);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) run_gen(gen);
    if (*e) run_estimate(est);
    if (*c) run_complete(comp);
    if (*b) run_bound(bnd);
    if (*x) {
      ExperimentConfig cfg;
      if (!config_path.empty()) apply_config(cfg, load_config(config_path));
      if (!preset.empty()) cfg.preset = preset;
      if (!seeds.empty()) cfg.seeds = seeds;
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      if (cfg.out_dir.empty()) cfg.out_dir = "results/" + cfg.preset;
      if (!methods.empty()) cfg.methods = methods;
      if (rank) cfg.rank = rank;
      if (scale) cfg.scale = *scale;
      if (exp.tau) cfg.tau = exp.tau;
      if (exp.gamma) cfg.gamma = exp.gamma;
      if (exp.step) cfg.step = exp.step;
      if (save_tensors) cfg.save_tensors = true;
      const ExperimentResult r = run_experiment(cfg);
      std::size_t failed = 0;
      for (const auto& rec : r.records) failed += !rec.error.empty();
      std::cout << cfg.preset << ": " << r.records.size() << " records (" << failed << " with errors) written to "
                << cfg.out_dir.string() << '\n';
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
