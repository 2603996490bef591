#pragma once

// Seeded generators for synthetic experiment inputs. Every function is a pure
// function of its arguments.

#include "tenips/decomposition.hpp"
#include "tenips/propensity.hpp"
#include "tenips/random.hpp"

#include <cstdint>

namespace tenips {

struct GeneratorConfig {
  Shape shape;
  RankProfile ranks;
  double core_std = 1.0;     // std of the i.i.d. normal core entries
  double noise_level = 0.0;  // relative noise level, see add_relative_noise
  std::uint64_t seed = 0;

  void validate() const;
};

struct TuckerSample {
  TensorXd tensor;
  TuckerXd truth;  // core and orthonormal factors of `tensor`
};

/// I_n x r matrix with orthonormal columns from the QR factorization of an
/// i.i.d. Gaussian matrix; signs follow the SVD convention.
Eigen::MatrixXd random_orthonormal(Index rows, Index cols, Rng& rng);

/// Normal(0, core_std^2) core times random orthonormal factors (noise_level
/// is ignored here).
TuckerSample random_tucker(const GeneratorConfig& cfg);

/// t + (level * ||t||_F / sqrt(size)) * eps with eps i.i.d. standard normal.
TensorXd add_relative_noise(const TensorXd& t, double level, std::uint64_t seed);

/// Constant propensity `ratio` (missing completely at random).
TensorXd model_a_propensity(const Shape& shape, double ratio);

struct ModelBSample {
  PropensityModel model;
  TensorXd parameter;        // ground-truth A (noise included)
  TensorXd clean_parameter;  // A before noise
};

/// A = random Tucker tensor plus relative noise; P = link(A).
ModelBSample model_b_propensity(const GeneratorConfig& cfg, std::shared_ptr<const LinkFunction> link);

/// Special case A = scale * B: larger entries are more likely to be observed.
ModelBSample model_b_proportional(const TensorXd& data, double scale, std::shared_ptr<const LinkFunction> link);

/// Independent Bernoulli(p) draw per entry.
Mask sample_mask(const TensorXd& propensity, std::uint64_t seed);

struct VideoInstance {
  TensorXd data;  // frames x height x width, integer values in [0, 255]
  PropensityModel model;  // A = (B - 128) / 64 under the logistic link
};

/// Smooth low-rank synthetic video: a few separable smooth components plus a
/// bump moving across the frame, quantized to [0, 255].
VideoInstance video_like_instance(const Shape& shape, std::uint64_t seed);

}  // namespace tenips
