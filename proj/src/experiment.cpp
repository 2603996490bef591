#include "tenips/experiment.hpp"

#include "tenips/bounds.hpp"
#include "tenips/completion.hpp"
#include "tenips/propensity.hpp"
#include "tenips/synthesis.hpp"
#include "tenips/tensor_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>

namespace tenips {
namespace {

const std::vector<std::string> kMethods{"TenIPS", "HOSVD_w", "SqUnfold", "RectUnfold"};
const std::vector<std::string> kSources{"true", "ConvexPE", "NonconvexPE"};

constexpr double kNoise = 0.1;
constexpr double kDataCoreStd = 100.0;
constexpr double kFig1CoreStd = 10.0;
constexpr Index kFig1ReferenceSize = 8;
constexpr double kParameterCoreStd = 100.0;
constexpr Index kReferenceSize = 100;
constexpr double kModelARatio = 0.4;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

enum Stream : std::uint64_t { kData = 1, kDataNoise, kParameter, kMask, kInit };

std::uint64_t keyed_seed(const std::string& key, std::uint64_t seed, Stream stream) {
  return derive_seed(derive_seed(fnv1a(key), seed), stream);
}

Shape cube(Index order, Index size) { return Shape(std::vector<Index>(static_cast<std::size_t>(order), size)); }

Index scaled(Index size, double scale) { return std::max<Index>(1, std::llround(static_cast<double>(size) * scale)); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string file_stem(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

double theta(const TensorXd& a, const UnfoldingSpec& spec) {
  return nuclear_norm(unfold(a, spec)) / std::sqrt(static_cast<double>(a.size()));
}

TensorXd constant_parameter(const Shape& shape, double ratio, const LinkFunction& link) {
  // Inverts the link by bisection so that any link works.
  double lo = -50, hi = 50;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (link.value(mid) < ratio ? lo : hi) = mid;
  }
  return TensorXd::Constant(shape, 0.5 * (lo + hi));
}

// One synthetic problem: data B, parameter A, propensity P and the mask.
struct Instance {
  TensorXd data;
  TensorXd parameter;
  TensorXd propensity;
  Mask mask;
};

TensorXd data_tensor(const Shape& shape, Index rank, double noise, const std::string& key, std::uint64_t seed) {
  GeneratorConfig g{shape, RankProfile::Uniform(shape.order(), rank), kDataCoreStd, noise,
                    keyed_seed(key, seed, kData)};
  return add_relative_noise(random_tucker(g).tensor, noise, keyed_seed(key, seed, kDataNoise));
}

TensorXd model_b_parameter(const Shape& shape, Index rank, double core_std, double noise, const std::string& key,
                           std::uint64_t seed) {
  GeneratorConfig g{shape, RankProfile::Uniform(shape.order(), rank), core_std, noise,
                    keyed_seed(key, seed, kParameter)};
  return model_b_propensity(g, logistic_link()).parameter;
}

Instance finish_instance(TensorXd data, TensorXd parameter, const std::string& key, std::uint64_t seed) {
  const auto link = logistic_link();
  TensorXd p(parameter.shape());
  for (Index i = 0; i < p.size(); ++i) p[i] = link->value(parameter[i]);
  Mask mask = sample_mask(p, keyed_seed(key, seed, kMask));
  return {std::move(data), std::move(parameter), std::move(p), std::move(mask)};
}

CompletionResult complete(const std::string& method, const ObservedInstance& inst, const TensorXd& p, Index target) {
  const RankProfile ranks = RankProfile::Uniform(inst.shape().order(), target);
  if (method == "TenIPS") return tenips_complete(inst, p, ranks);
  if (method == "HOSVD_w") return hosvd_w_complete(inst, p, ranks);
  if (method == "SqUnfold") return sq_unfold_complete(inst, p, induced_rank(ranks, square_set(inst.shape())));
  if (method == "RectUnfold") return rect_unfold_complete(inst, p, target, 0);
  throw std::invalid_argument("unknown completion method " + method);
}

nlohmann::json thin(const std::vector<double>& trace, std::size_t points) {
  SolveReport r;
  r.objective_trace = trace;
  return to_json(r, points)["objective_trace"];
}

class Runner {
 public:
  explicit Runner(const ExperimentConfig& cfg) : cfg_(cfg) {}

  const ExperimentConfig& cfg() const { return cfg_; }
  std::vector<MetricsRecord>& records() { return records_; }
  nlohmann::json& reports() { return reports_; }

  // Runs `body` on a copy of `base`; any exception becomes an error tag on
  // the emitted record instead of aborting the grid.
  template <typename F>
  void attempt(const MetricsRecord& base, F&& body) {
    MetricsRecord rec = base;
    try {
      body(rec);
    } catch (const DivergenceError& e) {
      rec.error = std::string("diverged: ") + e.what();
    } catch (const std::exception& e) {
      rec.error = std::string("failed: ") + e.what();
    }
    records_.push_back(std::move(rec));
  }

  std::vector<std::string> methods() const { return cfg_.methods.empty() ? kMethods : cfg_.methods; }

  std::vector<std::string> sources(std::vector<std::string> fallback) const {
    return cfg_.sources.empty() ? fallback : cfg_.sources;
  }

  void save(const std::string& cell, std::uint64_t seed, const Instance& inst) const {
    if (!cfg_.save_tensors || cfg_.out_dir.empty()) return;
    const auto dir = cfg_.out_dir / "tensors";
    std::filesystem::create_directories(dir);
    const std::string stem = file_stem(cfg_.preset + "_" + cell) + "_seed" + std::to_string(seed);
    save_tensor(dir / (stem + "_data.tnsr"), inst.data);
    save_tensor(dir / (stem + "_parameter.tnsr"), inst.parameter);
    save_tensor(dir / (stem + "_propensity.tnsr"), inst.propensity);
    save_mask(dir / (stem + "_mask.mask"), inst.mask);
  }

  // Completion rows for every configured method on one propensity tensor.
  void completion_rows(const MetricsRecord& base, const Instance& inst, const ObservedInstance& obs,
                       const TensorXd& p, Index target) {
    for (const auto& method : methods()) {
      MetricsRecord row = base;
      row.method = method;
      row.target_rank = target;
      attempt(row, [&](MetricsRecord& rec) {
        const CompletionResult res = complete(method, obs, p, target);
        rec.completion_rel_error = relative_error(res.estimate, inst.data);
        rec.seconds = res.seconds;
      });
    }
  }

  ConvexPEConfig convex_config(double tau, double gamma) const {
    ConvexPEConfig c;
    c.tau = cfg_.tau.value_or(tau);
    c.gamma = cfg_.gamma.value_or(gamma);
    c.max_iterations = cfg_.convex_iterations;
    return c;
  }

  // ConvexPE on `spec`; fills the propensity columns of `rec`.
  ConvexPEResult convex_row(MetricsRecord& rec, const Instance& inst, const ConvexPEConfig& c,
                            const UnfoldingSpec& spec) {
    ConvexPEResult res = convex_pe_on_spec(inst.mask, logistic_link(), c, spec);
    rec.tau = c.tau;
    rec.gamma = c.gamma;
    rec.unfolding = spec.to_string();
    rec.propensity_rel_error = relative_error(res.model.evaluate(), inst.propensity);
    rec.nuclear_norm = res.report.nuclear_norm;
    rec.nuclear_radius = res.report.nuclear_radius;
    rec.max_abs_parameter = res.report.max_abs;
    rec.iterations = res.report.iterations;
    rec.converged = res.report.converged;
    rec.seconds = res.report.seconds;
    nlohmann::json entry = {{"cell", rec.cell}, {"seed", rec.seed}, {"method", rec.method},
                            {"setting", rec.setting}, {"report", to_json(res.report, 200)}};
    reports_.push_back(std::move(entry));
    return res;
  }

  StepSearchResult nonconvex_row(MetricsRecord& rec, const Instance& inst, Index rank, double step) {
    NonconvexPEConfig c;
    c.ranks = RankProfile::Uniform(inst.mask.shape().order(), rank);
    c.step = step;
    c.seed = keyed_seed(rec.cell, rec.seed, kInit);
    c.max_iterations = cfg_.nonconvex_iterations;
    StepSearchResult s = nonconvex_pe_step_search(inst.mask, logistic_link(), c);
    const auto& r = s.result;
    rec.step = s.step;
    rec.propensity_rel_error = relative_error(r.model.evaluate(), inst.propensity);
    rec.iterations = r.iterations;
    rec.converged = r.converged;
    rec.seconds = r.seconds;
    const double best = negative_log_likelihood(inst.parameter, inst.mask, *logistic_link());
    std::vector<double> relative_loss;
    for (double v : r.objective_trace) relative_loss.push_back(v / best);
    reports_.push_back({{"cell", rec.cell},
                        {"seed", rec.seed},
                        {"method", rec.method},
                        {"step", s.step},
                        {"rejected_steps", s.rejected},
                        {"iterations", r.iterations},
                        {"converged", r.converged},
                        {"objective_trace", thin(r.objective_trace, 200)},
                        {"relative_loss", thin(relative_loss, 200)},
                        {"warnings", r.warnings}});
    return s;
  }

 private:
  const ExperimentConfig& cfg_;
  std::vector<MetricsRecord> records_;
  nlohmann::json reports_ = nlohmann::json::array();
};

// Per-(cell, seed) driver: builds the instance and hands it to `body`. A
// failing instance becomes a single tagged record.
template <typename Make, typename Body>
void for_instance(Runner& run, const MetricsRecord& base, Make&& make, Body&& body) {
  std::optional<Instance> inst;
  MetricsRecord rec = base;
  rec.method = "instance";
  try {
    inst.emplace(make());
  } catch (const std::exception& e) {
    rec.error = std::string("failed: ") + e.what();
    run.records().push_back(std::move(rec));
    return;
  }
  run.save(base.cell, base.seed, *inst);
  body(*inst);
}

MetricsRecord base_record(const std::string& experiment, const std::string& cell, std::uint64_t seed,
                          const Shape& shape, Index rank) {
  MetricsRecord r;
  r.experiment = experiment;
  r.cell = cell;
  r.seed = seed;
  r.order = shape.order();
  r.shape = shape.to_string();
  r.rank = rank;
  return r;
}

void run_fig1(Runner& run) {
  const auto& cfg = run.cfg();
  const std::vector<Index> orders = cfg.orders.empty() ? std::vector<Index>{3, 4, 5, 6} : cfg.orders;
  const Index size = scaled(cfg.size.value_or(kFig1ReferenceSize), cfg.scale);
  const Index rank = cfg.rank.value_or(2);
  const std::vector<std::string> models = cfg.models.empty() ? std::vector<std::string>{"A", "B"} : cfg.models;
  const double noise = cfg.noise_level.value_or(kNoise);
  const auto link = logistic_link();

  for (Index order : orders) {
    const Shape shape = cube(order, size);
    const std::vector<UnfoldingSpec> specs{square_set(shape), UnfoldingSpec(shape, {0})};
    const std::vector<std::string> names{"square", "rectangular"};
    for (const auto& model : models) {
      const std::string cell = "N=" + std::to_string(order) + " model=" + model;
      for (std::uint64_t seed : cfg.seeds) {
        MetricsRecord base = base_record("fig1", cell, seed, shape, rank);
        if (model == "A") base.ratio = kModelARatio;
        auto make = [&] {
          TensorXd a = model == "A"
                           ? constant_parameter(shape, kModelARatio, *link)
                           : model_b_parameter(shape, rank, scaled_core_std(kFig1CoreStd, kFig1ReferenceSize, size, order),
                                               noise, cell, seed);
          return finish_instance(TensorXd(shape), std::move(a), cell, seed);
        };
        for_instance(run, base, make, [&](const Instance& inst) {
          const double alpha = max_abs(inst.parameter);
          for (std::size_t u = 0; u < specs.size(); ++u) {
            const double th = theta(inst.parameter, specs[u]);
            for (const auto& [setting, mult] : {std::pair<std::string, double>{"optimal", 1.0}, {"overestimated", 2.0}}) {
              MetricsRecord row = base;
              row.method = "ConvexPE-" + names[u];
              row.setting = setting;
              run.attempt(row, [&](MetricsRecord& rec) {
                run.convex_row(rec, inst, run.convex_config(mult * th, mult * alpha), specs[u]);
              });
            }
          }
        });
      }
    }
  }
}

void run_fig2(Runner& run) {
  const auto& cfg = run.cfg();
  const Index order = cfg.order.value_or(4);
  const Index size = scaled(cfg.size.value_or(30), cfg.scale);
  const Index rank = cfg.rank.value_or(5);
  const std::vector<double> ratios = cfg.ratios.empty() ? std::vector<double>{0.2, 0.4, 0.6, 0.8, 1.0} : cfg.ratios;
  const double noise = cfg.noise_level.value_or(kNoise);
  const Shape shape = cube(order, size);

  for (double ratio : ratios) {
    const std::string cell = "ratio=" + fmt(ratio);
    for (std::uint64_t seed : cfg.seeds) {
      MetricsRecord base = base_record("fig2", cell, seed, shape, rank);
      base.ratio = ratio;
      base.source = "true";
      // The data tensor does not depend on the ratio: key it on the seed only.
      auto make = [&] {
        TensorXd data = data_tensor(shape, rank, noise, "fig2", seed);
        Instance inst{std::move(data), TensorXd(shape), TensorXd::Constant(shape, ratio), Mask::Full(shape)};
        if (ratio < 1) {
          inst.propensity = model_a_propensity(shape, ratio);
          inst.mask = sample_mask(inst.propensity, keyed_seed(cell, seed, kMask));
        }
        return inst;
      };
      for_instance(run, base, make, [&](const Instance& inst) {
        const ObservedInstance obs = ObservedInstance::observe(inst.data, inst.mask);
        run.completion_rows(base, inst, obs, inst.propensity, rank);
      });
    }
  }
}

// The order-4 instance shared by table2, fig3 (model B) and sensitivity.
Instance mnar_instance(const ExperimentConfig& cfg, const Shape& shape, Index rank, std::uint64_t seed) {
  const double noise = cfg.noise_level.value_or(kNoise);
  const std::string key = "mnar " + shape.to_string() + " r=" + std::to_string(rank);
  const double core = scaled_core_std(kParameterCoreStd, kReferenceSize, shape[0], shape.order());
  return finish_instance(data_tensor(shape, rank, noise, key, seed),
                         model_b_parameter(shape, rank, core, noise, key, seed), key, seed);
}

void run_table2(Runner& run) {
  const auto& cfg = run.cfg();
  const Index order = cfg.order.value_or(4);
  const Index size = scaled(cfg.size.value_or(30), cfg.scale);
  const Index rank = cfg.rank.value_or(5);
  const Shape shape = cube(order, size);
  const auto link = logistic_link();
  const auto sources = run.sources(kSources);

  for (std::uint64_t seed : cfg.seeds) {
    const std::string cell = "MNAR";
    MetricsRecord base = base_record("table2", cell, seed, shape, rank);
    for_instance(run, base, [&] { return mnar_instance(cfg, shape, rank, seed); }, [&](const Instance& inst) {
      const ObservedInstance obs = ObservedInstance::observe(inst.data, inst.mask);
      const UnfoldingSpec square = square_set(shape);
      const double th = theta(inst.parameter, square);
      const double alpha = max_abs(inst.parameter);
      const TensorXd xbar = ips_reweight(obs, inst.propensity);
      const RankProfile ranks = RankProfile::Uniform(order, rank);

      // Bound inputs are shared by every TenIPS row of this seed.
      std::optional<BoundInputs> bound_inputs;
      auto bound_for = [&](const TensorXd& p) {
        if (!bound_inputs)
          bound_inputs = compute_bound_inputs(inst.data, inst.parameter, *link, ranks, th, alpha,
                                              spectral_slack(xbar, inst.data));
        const double f = (ips_reweight(obs, p).data() - xbar.data()).norm();
        return completion_error_bound(*bound_inputs, ranks, f).relative;
      };

      for (const auto& source : sources) {
        std::optional<TensorXd> p;
        if (source == "true") {
          p = inst.propensity;
        } else {
          MetricsRecord row = base;
          row.method = source;
          run.attempt(row, [&](MetricsRecord& rec) {
            if (source == "ConvexPE") {
              rec.setting = "optimal";
              p = run.convex_row(rec, inst, run.convex_config(th, alpha), square).model.evaluate();
            } else if (source == "NonconvexPE") {
              p = run.nonconvex_row(rec, inst, rank, cfg.step.value_or(scaled_nonconvex_step(shape)))
                      .result.model.evaluate();
            } else {
              throw std::invalid_argument("unknown propensity source " + source);
            }
          });
        }
        if (!p) continue;
        MetricsRecord row = base;
        row.source = source;
        for (const auto& method : run.methods()) {
          MetricsRecord r = row;
          r.method = method;
          r.target_rank = rank;
          run.attempt(r, [&](MetricsRecord& rec) {
            const CompletionResult res = complete(method, obs, *p, rank);
            rec.completion_rel_error = relative_error(res.estimate, inst.data);
            rec.seconds = res.seconds;
            if (method == "TenIPS" && source != "NonconvexPE") rec.bound = bound_for(*p);
          });
        }
      }
    });
  }
}

void run_fig3(Runner& run) {
  const auto& cfg = run.cfg();
  const Index order = cfg.order.value_or(4);
  const Index size = scaled(cfg.size.value_or(30), cfg.scale);
  const Index rank = cfg.rank.value_or(5);
  const Shape shape = cube(order, size);
  std::vector<Index> targets = cfg.target_ranks;
  if (targets.empty())
    for (Index r = rank; r <= 2 * rank; ++r) targets.push_back(r);
  const std::vector<std::string> models = cfg.models.empty() ? std::vector<std::string>{"A", "B"} : cfg.models;

  for (const auto& model : models) {
    const std::string cell = "model=" + model;
    for (std::uint64_t seed : cfg.seeds) {
      MetricsRecord base = base_record("fig3", cell, seed, shape, rank);
      base.source = "true";
      if (model == "A") base.ratio = kModelARatio;
      auto make = [&] {
        if (model == "B") return mnar_instance(cfg, shape, rank, seed);
        if (model != "A") throw std::invalid_argument("unknown observation model " + model);
        const std::string key = "mnar " + shape.to_string() + " r=" + std::to_string(rank);
        return finish_instance(data_tensor(shape, rank, cfg.noise_level.value_or(kNoise), key, seed),
                               constant_parameter(shape, kModelARatio, *logistic_link()), cell, seed);
      };
      for_instance(run, base, make, [&](const Instance& inst) {
        const ObservedInstance obs = ObservedInstance::observe(inst.data, inst.mask);
        for (Index target : targets) {
          MetricsRecord row = base;
          row.cell = cell + " r=" + std::to_string(target);
          run.completion_rows(row, inst, obs, inst.propensity, target);
        }
      });
    }
  }
}

void run_video(Runner& run) {
  const auto& cfg = run.cfg();
  const Shape shape({scaled(24, cfg.scale), scaled(30, cfg.scale), scaled(40, cfg.scale)});
  const Index rank = cfg.rank.value_or(5);
  const auto sources = run.sources({"true", "ConvexPE"});

  for (std::uint64_t seed : cfg.seeds) {
    const std::string cell = "video";
    MetricsRecord base = base_record("video", cell, seed, shape, rank);
    auto make = [&] {
      VideoInstance v = video_like_instance(shape, keyed_seed(cell, seed, kData));
      return finish_instance(std::move(v.data), std::move(v.model.parameter), cell, seed);
    };
    for_instance(run, base, make, [&](const Instance& inst) {
      const ObservedInstance obs = ObservedInstance::observe(inst.data, inst.mask);
      const UnfoldingSpec square = square_set(shape);
      for (const auto& source : sources) {
        std::optional<TensorXd> p;
        if (source == "true") {
          p = inst.propensity;
        } else {
          MetricsRecord row = base;
          row.method = source;
          run.attempt(row, [&](MetricsRecord& rec) {
            if (source == "ConvexPE") {
              rec.setting = "optimal";
              p = run.convex_row(rec, inst, run.convex_config(theta(inst.parameter, square), max_abs(inst.parameter)),
                                 square)
                      .model.evaluate();
            } else if (source == "NonconvexPE") {
              p = run.nonconvex_row(rec, inst, rank, cfg.step.value_or(scaled_nonconvex_step(shape)))
                      .result.model.evaluate();
            } else {
              throw std::invalid_argument("unknown propensity source " + source);
            }
          });
        }
        if (!p) continue;
        MetricsRecord row = base;
        row.source = source;
        run.completion_rows(row, inst, obs, *p, rank);
      }
    });
  }
}

void run_sensitivity(Runner& run) {
  const auto& cfg = run.cfg();
  const Index order = cfg.order.value_or(4);
  const Index size = scaled(cfg.size.value_or(30), cfg.scale);
  const Index rank = cfg.rank.value_or(5);
  const Shape shape = cube(order, size);
  const double base_step = cfg.step.value_or(scaled_nonconvex_step(shape));

  for (std::uint64_t seed : cfg.seeds) {
    MetricsRecord base = base_record("sensitivity", "MNAR", seed, shape, rank);
    for_instance(run, base, [&] { return mnar_instance(cfg, shape, rank, seed); }, [&](const Instance& inst) {
      const UnfoldingSpec square = square_set(shape);
      const double th = theta(inst.parameter, square);
      const double alpha = max_abs(inst.parameter);
      auto sweep = [&](const std::string& name, double tau_ratio, double gamma_ratio) {
        MetricsRecord row = base;
        row.cell = name;
        row.method = "ConvexPE";
        row.setting = "tau/theta=" + fmt(tau_ratio) + " gamma/alpha=" + fmt(gamma_ratio);
        run.attempt(row, [&](MetricsRecord& rec) {
          ConvexPEConfig c;
          c.tau = tau_ratio * th;
          c.gamma = gamma_ratio * alpha;
          c.max_iterations = cfg.convex_iterations;
          run.convex_row(rec, inst, c, square);
        });
      };
      for (double r : cfg.tau_ratios) sweep("tau sweep", r, 1.0);
      for (double r : cfg.gamma_ratios) sweep("gamma sweep", 1.0, r);

      // Fixed steps: a diverging step is recorded, not retried.
      for (double factor : cfg.step_factors) {
        MetricsRecord row = base;
        row.cell = "step sweep";
        row.method = "NonconvexPE";
        row.setting = "step/scaled=" + fmt(factor);
        row.step = factor * base_step;
        run.attempt(row, [&](MetricsRecord& rec) {
          NonconvexPEConfig c;
          c.ranks = RankProfile::Uniform(order, rank);
          c.step = *rec.step;
          c.seed = keyed_seed("MNAR", seed, kInit);
          c.max_iterations = cfg.nonconvex_iterations;
          const auto link = logistic_link();
          const NonconvexPEResult r = nonconvex_pe(inst.mask, link, c);
          rec.propensity_rel_error = relative_error(r.model.evaluate(), inst.propensity);
          rec.iterations = r.iterations;
          rec.converged = r.converged;
          rec.seconds = r.seconds;
          const double best = negative_log_likelihood(inst.parameter, inst.mask, *link);
          std::vector<double> relative_loss;
          for (double v : r.objective_trace) relative_loss.push_back(v / best);
          run.reports().push_back({{"cell", rec.cell},
                                   {"seed", rec.seed},
                                   {"method", rec.method},
                                   {"step", c.step},
                                   {"objective_trace", thin(r.objective_trace, 200)},
                                   {"relative_loss", thin(relative_loss, 200)}});
        });
      }
    });
  }
}

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

nlohmann::json config_echo(const ExperimentConfig& c) {
  nlohmann::json j = {{"preset", c.preset},
                      {"seeds", c.seeds},
                      {"scale", c.scale},
                      {"convex_iterations", c.convex_iterations},
                      {"nonconvex_iterations", c.nonconvex_iterations}};
  if (!c.orders.empty()) j["orders"] = c.orders;
  if (c.order) j["order"] = *c.order;
  if (c.size) j["size"] = *c.size;
  if (c.rank) j["rank"] = *c.rank;
  if (!c.target_ranks.empty()) j["target_ranks"] = c.target_ranks;
  if (!c.ratios.empty()) j["ratios"] = c.ratios;
  if (!c.models.empty()) j["models"] = c.models;
  if (!c.methods.empty()) j["methods"] = c.methods;
  if (!c.sources.empty()) j["sources"] = c.sources;
  if (c.noise_level) j["noise_level"] = *c.noise_level;
  if (c.tau) j["tau"] = *c.tau;
  if (c.gamma) j["gamma"] = *c.gamma;
  if (c.step) j["step"] = *c.step;
  if (c.preset == "sensitivity") {
    j["tau_ratios"] = c.tau_ratios;
    j["gamma_ratios"] = c.gamma_ratios;
    j["step_factors"] = c.step_factors;
  }
  return j;
}

nlohmann::json summarize(const ExperimentConfig& cfg, const std::vector<MetricsRecord>& records) {
  struct Acc {
    nlohmann::json key;
    int n = 0, errors = 0;
    std::map<std::string, std::pair<double, int>> sums;
  };
  std::vector<Acc> groups;
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    const std::string k = r.cell + '\x1f' + r.method + '\x1f' + r.source + '\x1f' + r.setting + '\x1f' + r.unfolding;
    auto [it, fresh] = index.emplace(k, groups.size());
    if (fresh) {
      groups.push_back({});
      groups.back().key = {{"cell", r.cell}, {"method", r.method}, {"source", r.source},
                           {"setting", r.setting}, {"unfolding", r.unfolding}};
    }
    Acc& a = groups[it->second];
    ++a.n;
    if (!r.error.empty()) {
      ++a.errors;
      continue;
    }
    auto add = [&](const char* name, const std::optional<double>& v) {
      if (!v) return;
      a.sums[name].first += *v;
      ++a.sums[name].second;
    };
    add("propensity_rel_error", r.propensity_rel_error);
    add("completion_rel_error", r.completion_rel_error);
    add("bound", r.bound);
    add("seconds", r.seconds);
  }
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& a : groups) {
    nlohmann::json j = a.key;
    j["runs"] = a.n;
    j["errors"] = a.errors;
    for (const auto& [name, s] : a.sums) j["mean_" + name] = s.first / s.second;
    cells.push_back(std::move(j));
  }
  return {{"config", config_echo(cfg)}, {"cells", cells}};
}

}  // namespace

void ExperimentConfig::validate() const {
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), preset) == names.end())
    throw std::invalid_argument("unknown preset '" + preset + "'");
  if (seeds.empty()) throw std::invalid_argument("seed list must be nonempty");
  if (!(scale > 0)) throw std::invalid_argument("scale must be positive");
  for (Index n : orders)
    if (n < 2) throw std::invalid_argument("orders must be >= 2");
  if (order && *order < 2) throw std::invalid_argument("order must be >= 2");
  if (size && *size < 1) throw std::invalid_argument("size must be >= 1");
  if (rank && *rank < 1) throw std::invalid_argument("rank must be >= 1");
  for (Index r : target_ranks)
    if (r < 1) throw std::invalid_argument("target ranks must be >= 1");
  for (double r : ratios)
    if (!(r > 0 && r <= 1)) throw std::invalid_argument("observation ratios must lie in (0, 1]");
  for (const auto& m : models)
    if (m != "A" && m != "B") throw std::invalid_argument("unknown observation model '" + m + "'");
  for (const auto& m : methods)
    if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end())
      throw std::invalid_argument("unknown method '" + m + "'");
  for (const auto& s : sources)
    if (std::find(kSources.begin(), kSources.end(), s) == kSources.end())
      throw std::invalid_argument("unknown propensity source '" + s + "'");
  if (noise_level && *noise_level < 0) throw std::invalid_argument("noise level must be >= 0");
  if (tau && !(*tau > 0)) throw std::invalid_argument("tau must be positive");
  if (gamma && !(*gamma > 0)) throw std::invalid_argument("gamma must be positive");
  if (step && !(*step > 0)) throw std::invalid_argument("step must be positive");
  if (convex_iterations < 1 || nonconvex_iterations < 1) throw std::invalid_argument("iteration caps must be >= 1");
  for (const auto* list : {&tau_ratios, &gamma_ratios, &step_factors})
    for (double v : *list)
      if (!(v > 0)) throw std::invalid_argument("sweep multipliers must be positive");
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"fig1", "fig2", "table2", "fig3", "video", "sensitivity"};
  return names;
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols{
      "experiment", "cell",  "seed",  "method", "source", "setting", "unfolding", "order",
      "shape",      "rank",  "target_rank", "ratio", "tau", "gamma", "step", "propensity_rel_error",
      "completion_rel_error", "bound", "nuclear_norm", "nuclear_radius", "max_abs_parameter", "iterations",
      "converged", "error"};
  return cols;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRecord>& records) {
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : records) {
    const std::vector<std::string> f{
        r.experiment,
        r.cell,
        std::to_string(r.seed),
        r.method,
        r.source,
        r.setting,
        r.unfolding,
        std::to_string(r.order),
        r.shape,
        std::to_string(r.rank),
        r.target_rank ? std::to_string(r.target_rank) : "",
        opt(r.ratio),
        opt(r.tau),
        opt(r.gamma),
        opt(r.step),
        opt(r.propensity_rel_error),
        opt(r.completion_rel_error),
        opt(r.bound),
        opt(r.nuclear_norm),
        opt(r.nuclear_radius),
        opt(r.max_abs_parameter),
        r.iterations ? std::to_string(*r.iterations) : "",
        r.converged ? (*r.converged ? "true" : "false") : "",
        r.error};
    for (std::size_t i = 0; i < f.size(); ++i) os << (i ? "," : "") << csv_field(f[i]);
    os << '\n';
  }
}

void write_timing_csv(std::ostream& os, const std::vector<MetricsRecord>& records) {
  os << "experiment,cell,seed,method,source,setting,seconds\n";
  for (const auto& r : records)
    os << csv_field(r.experiment) << ',' << csv_field(r.cell) << ',' << r.seed << ',' << csv_field(r.method) << ','
       << csv_field(r.source) << ',' << csv_field(r.setting) << ',' << fmt(r.seconds) << '\n';
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Runner run(cfg);
  if (cfg.preset == "fig1") run_fig1(run);
  else if (cfg.preset == "fig2") run_fig2(run);
  else if (cfg.preset == "table2") run_table2(run);
  else if (cfg.preset == "fig3") run_fig3(run);
  else if (cfg.preset == "video") run_video(run);
  else run_sensitivity(run);

  ExperimentResult out;
  out.records = std::move(run.records());
  out.summary = summarize(cfg, out.records);
  out.reports = std::move(run.reports());

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    auto open = [&](const char* name) {
      std::ofstream os(cfg.out_dir / name, std::ios::binary);
      if (!os) throw std::runtime_error("cannot write " + (cfg.out_dir / name).string());
      return os;
    };
    auto metrics = open("metrics.csv");
    write_metrics_csv(metrics, out.records);
    auto timing = open("timing.csv");
    write_timing_csv(timing, out.records);
    open("summary.json") << out.summary.dump(2) << '\n';
    open("reports.json") << out.reports.dump(2) << '\n';
  }
  return out;
}

double scaled_nonconvex_step(const Shape& shape) {
  constexpr double kReferenceStep = 5e-6;
  constexpr double kReferenceFactorSum = 1e6;  // 100^3 entries per factor gradient at 100^4
  double widest = 0;
  for (Index n = 0; n < shape.order(); ++n)
    widest = std::max(widest, static_cast<double>(shape.size_after(n) * shape.size_before(n)));
  return kReferenceStep * kReferenceFactorSum / widest;
}

double scaled_core_std(double reference_std, Index reference_size, Index size, Index order) {
  if (!(reference_std > 0) || reference_size < 1 || size < 1 || order < 1)
    throw std::invalid_argument("scaled_core_std: invalid arguments");
  return reference_std *
         std::pow(static_cast<double>(size) / static_cast<double>(reference_size), static_cast<double>(order) / 2.0);
}

}  // namespace tenips
