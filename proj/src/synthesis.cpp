#include "tenips/synthesis.hpp"

#include "tenips/random.hpp"

#include <cmath>
#include <numbers>

namespace tenips {

void GeneratorConfig::validate() const {
  ranks.check(shape);
  if (!(core_std > 0)) throw std::invalid_argument("GeneratorConfig: core_std must be positive");
  if (!(noise_level >= 0)) throw std::invalid_argument("GeneratorConfig: noise_level must be >= 0");
}

Eigen::MatrixXd random_orthonormal(Index rows, Index cols, Rng& rng) {
  if (cols > rows) throw std::invalid_argument("random_orthonormal: more columns than rows");
  const Eigen::MatrixXd g = rng.normal_matrix(rows, cols);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  canonicalize_signs(q);
  return q;
}

TuckerSample random_tucker(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  TuckerSample out;
  out.truth.core = TensorXd(Shape(cfg.ranks.ranks()));
  for (Index i = 0; i < out.truth.core.size(); ++i) out.truth.core[i] = cfg.core_std * rng.normal();
  for (Index n = 0; n < cfg.shape.order(); ++n)
    out.truth.factors.push_back(random_orthonormal(cfg.shape[n], cfg.ranks[n], rng));
  out.tensor = reconstruct(out.truth);
  return out;
}

TensorXd add_relative_noise(const TensorXd& t, double level, std::uint64_t seed) {
  if (!(level >= 0)) throw std::invalid_argument("add_relative_noise: level must be >= 0");
  if (level == 0) return t;
  const double scale = level * frobenius_norm(t) / std::sqrt(static_cast<double>(t.size()));
  Rng rng(seed);
  TensorXd out = t;
  for (Index i = 0; i < out.size(); ++i) out[i] += scale * rng.normal();
  return out;
}

TensorXd model_a_propensity(const Shape& shape, double ratio) {
  if (!(ratio > 0 && ratio < 1)) throw std::invalid_argument("model_a_propensity: ratio must lie in (0, 1)");
  return TensorXd::Constant(shape, ratio);
}

ModelBSample model_b_propensity(const GeneratorConfig& cfg, std::shared_ptr<const LinkFunction> link) {
  if (!link) throw std::invalid_argument("model_b_propensity: missing link function");
  ModelBSample out;
  out.clean_parameter = random_tucker(cfg).tensor;
  out.parameter = add_relative_noise(out.clean_parameter, cfg.noise_level, derive_seed(cfg.seed, 1));
  out.model.link = std::move(link);
  out.model.parameter = out.parameter;
  return out;
}

ModelBSample model_b_proportional(const TensorXd& data, double scale, std::shared_ptr<const LinkFunction> link) {
  if (!link) throw std::invalid_argument("model_b_proportional: missing link function");
  if (!(scale > 0)) throw std::invalid_argument("model_b_proportional: scale must be positive");
  ModelBSample out;
  out.parameter = data * scale;
  out.clean_parameter = out.parameter;
  out.model.link = std::move(link);
  out.model.parameter = out.parameter;
  return out;
}

Mask sample_mask(const TensorXd& propensity, std::uint64_t seed) {
  Rng rng(seed);
  Mask mask(propensity.shape());
  for (Index i = 0; i < propensity.size(); ++i) {
    const double p = propensity[i];
    if (!(p >= 0 && p <= 1)) throw std::invalid_argument("sample_mask: propensities must lie in [0, 1]");
    mask.set(i, rng.unit() < p);
  }
  return mask;
}

VideoInstance video_like_instance(const Shape& shape, std::uint64_t seed) {
  if (shape.order() != 3) throw std::invalid_argument("video_like_instance: shape must have order 3");
  constexpr double kPi = std::numbers::pi;
  const Index frames = shape[0], height = shape[1], width = shape[2];
  Rng rng(seed);

  // Smooth temporal/vertical/horizontal profiles: low-frequency cosines.
  constexpr int kComponents = 3;
  struct Component {
    double weight, ft, fh, fw, pt, ph, pw;
  };
  std::vector<Component> comps;
  for (int k = 0; k < kComponents; ++k)
    comps.push_back({rng.uniform(0.5, 1.0), rng.uniform(0.0, 1.5), rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0),
                     rng.uniform(0, 2 * kPi), rng.uniform(0, 2 * kPi), rng.uniform(0, 2 * kPi)});
  const double bump_row = rng.uniform(0.3, 0.7) * static_cast<double>(height);
  const double bump_radius = 0.12 * static_cast<double>(std::min(height, width)) + 0.5;

  TensorXd raw(shape);
  for (Index w = 0; w < width; ++w)
    for (Index h = 0; h < height; ++h)
      for (Index t = 0; t < frames; ++t) {
        const double tt = static_cast<double>(t) / static_cast<double>(std::max<Index>(frames - 1, 1));
        const double hh = static_cast<double>(h) / static_cast<double>(std::max<Index>(height - 1, 1));
        const double ww = static_cast<double>(w) / static_cast<double>(std::max<Index>(width - 1, 1));
        double v = 0;
        for (const auto& c : comps)
          v += c.weight * std::cos(kPi * c.ft * tt + c.pt) * std::cos(kPi * c.fh * hh + c.ph) *
               std::cos(kPi * c.fw * ww + c.pw);
        // A bump walking left to right across the frames.
        const double col = tt * static_cast<double>(width - 1);
        const double dr = (static_cast<double>(h) - bump_row) / bump_radius;
        const double dc = (static_cast<double>(w) - col) / bump_radius;
        v += 1.5 * std::exp(-0.5 * (dr * dr + dc * dc));
        raw({t, h, w}) = v;
      }

  const double lo = raw.data().minCoeff(), hi = raw.data().maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  VideoInstance out;
  out.data = TensorXd(shape);
  for (Index i = 0; i < raw.size(); ++i) out.data[i] = std::round(255.0 * (raw[i] - lo) / span);
  out.model.link = logistic_link();
  out.model.parameter = TensorXd(shape);
  for (Index i = 0; i < raw.size(); ++i) out.model.parameter[i] = (out.data[i] - 128.0) / 64.0;
  return out;
}

}  // namespace tenips
