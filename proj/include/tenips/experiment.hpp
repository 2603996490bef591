#pragma once

// Experiment presets at desk scale. Each preset expands into a grid of cells;
// every (cell, seed, method) produces one MetricsRecord. Randomness is keyed on
// (cell, seed) only, so records do not depend on execution order.
//
// Presets:
//   fig1         propensity estimation, square vs mode-0 unfolding, across orders
//   fig2         completion under uniform propensities across observation ratios
//   table2       completion under entry-dependent propensities, true and estimated
//   fig3         completion across target ranks
//   video        completion of the smooth video-like instance
//   sensitivity  ConvexPE threshold sweep and NonconvexPE step-size sweep

#include "tenips/tensor.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tenips {

struct ExperimentConfig {
  std::string preset;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::filesystem::path out_dir;  // empty: nothing is written
  double scale = 1.0;             // multiplies every mode size of the preset

  // Grid overrides; an empty list or unset value keeps the preset default.
  std::vector<Index> orders;         // fig1
  std::optional<Index> order;        // fig2, table2, fig3, sensitivity
  std::optional<Index> size;         // mode size before scaling
  std::optional<Index> rank;         // true multilinear rank per mode
  std::vector<Index> target_ranks;   // fig3
  std::vector<double> ratios;        // fig2 observation ratios
  std::vector<std::string> models;   // fig1, fig3: "A" and/or "B"
  std::vector<std::string> methods;  // subset of TenIPS, HOSVD_w, SqUnfold, RectUnfold
  std::vector<std::string> sources;  // table2, video: true, ConvexPE, NonconvexPE
  std::optional<double> noise_level;

  // Estimator settings. tau and gamma replace the ground-truth thresholds;
  // step replaces the size-scaled reference step.
  std::optional<double> tau;
  std::optional<double> gamma;
  std::optional<double> step;
  int convex_iterations = 2000;
  int nonconvex_iterations = 300;
  std::vector<double> tau_ratios{0.5, 1, 2, 4, 8};    // sensitivity, multiples of theta
  std::vector<double> gamma_ratios{0.5, 1, 2, 4, 8};  // sensitivity, multiples of alpha
  std::vector<double> step_factors{0.25, 0.5, 1, 2, 4};  // sensitivity, multiples of the scaled step

  bool save_tensors = false;  // write TNSR/MASK inputs of every instance

  void validate() const;
};

/// Names accepted by ExperimentConfig::preset.
const std::vector<std::string>& preset_names();

struct MetricsRecord {
  std::string experiment;
  std::string cell;
  std::uint64_t seed = 0;
  std::string method;
  std::string source;     // propensity used by a completion method
  std::string setting;    // threshold setting of a propensity estimate
  std::string unfolding;  // unfolding used by a propensity estimate
  Index order = 0;
  std::string shape;
  Index rank = 0;
  Index target_rank = 0;
  std::optional<double> ratio;
  std::optional<double> tau, gamma, step;
  std::optional<double> propensity_rel_error;
  std::optional<double> completion_rel_error;
  std::optional<double> bound;  // completion error bound, TenIPS rows only
  std::optional<double> nuclear_norm, nuclear_radius, max_abs_parameter;
  std::optional<int> iterations;
  std::optional<bool> converged;
  std::string error;  // nonempty when the cell failed
  double seconds = 0;
};

/// Fixed CSV column set shared by all presets (timing excluded).
const std::vector<std::string>& metrics_columns();
void write_metrics_csv(std::ostream& os, const std::vector<MetricsRecord>& records);
void write_timing_csv(std::ostream& os, const std::vector<MetricsRecord>& records);

struct ExperimentResult {
  std::vector<MetricsRecord> records;
  nlohmann::json summary;  // config echo and per-cell means over seeds
  nlohmann::json reports;  // solver reports and objective traces
};

/// Runs the preset grid. When cfg.out_dir is set, writes metrics.csv,
/// timing.csv, summary.json, reports.json and optional tensor files there.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// 5e-6, the step that suits a 100^4 tensor, scaled by the number of entries
/// each factor gradient sums over.
double scaled_nonconvex_step(const Shape& shape);

/// Core standard deviation that keeps entry magnitudes of a cubical random
/// Tucker tensor equal to those at a reference mode size.
double scaled_core_std(double reference_std, Index reference_size, Index size, Index order);

}  // namespace tenips
