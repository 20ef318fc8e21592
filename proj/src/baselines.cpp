#include "imsound/baselines.hpp"

#include "imsound/io.hpp"

#include <cmath>
#include <sstream>

namespace imsound {

void ImprintConfig::validate() const {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ParameterError("rho must lie in [0,1]");
}

Canvas imprint(const Canvas& spec_canvas, const Canvas& image_canvas, double rho) {
  ImprintConfig{rho}.validate();
  if (spec_canvas.channels() != 1) throw ShapeError("imprint: spectrogram must have one channel");
  const Canvas gray = grayscale(image_canvas);
  require_same_shape(spec_canvas.shape(), gray.shape(), "imprint");
  return Canvas(spec_canvas.shape(),
                spec_canvas.values().array() * (1.0 - rho * (1.0 - gray.values().array())));
}

ImprintResult imprint_pipeline(int cat_a, int cat_v, double rho, const NoisePredictor& audio,
                               const NoisePredictor& image, const CompositionConfig& config,
                               const NoiseSchedule& schedule, Rng& rng, Shape shape) {
  ImprintConfig{rho}.validate();
  ImprintResult res;
  res.spectrogram = sample_single(audio, cat_a, config.gamma_a, config.steps, schedule, rng, shape).canvas;
  res.image = sample_single(image, cat_v, config.gamma_v, config.steps, schedule, rng, shape).canvas;
  res.canvas = imprint(res.spectrogram, res.image, rho);
  return res;
}

void SdsConfig::validate() const {
  if (steps < 1) throw ParameterError("sds: steps must be >= 1");
  if (warmup < 0 || warmup > steps) throw ParameterError("sds: warmup must lie in [0, steps]");
  if (!(lambda_sds >= 0.0)) throw ParameterError("sds: lambda_sds must be >= 0");
  if (!(guidance_a >= 0.0 && guidance_v >= 0.0)) throw ParameterError("sds: guidance must be >= 0");
  if (!(t_min > 0.0 && t_min <= t_max && t_max <= 1.0)) {
    throw ParameterError("sds: timestep range must satisfy 0 < t_min <= t_max <= 1");
  }
}

SdsGradient sds_step(const Canvas& x, const NoisePredictor& audio, const NoisePredictor& image,
                     Category cat_a, Category cat_v, const SdsConfig& config, int step,
                     const NoiseSchedule& schedule, Rng& rng) {
  if (step < 0) throw ParameterError("sds_step: step must be >= 0");
  const int T = schedule.steps();
  const int lo = std::max(1, int(std::ceil(config.t_min * T)));
  const int hi = std::max(lo, int(std::floor(config.t_max * T)));
  SdsGradient g;
  g.t = rng.uniform_int(lo, hi);
  const Canvas eps = gaussian_canvas(rng, x.shape());
  const Canvas x_t = forward_diffuse(x, g.t, eps, schedule);

  const Canvas eps_a = cfg(audio.predict(x_t, std::nullopt, g.t), audio.predict(x_t, cat_a, g.t),
                           config.guidance_a);
  Eigen::VectorXd grad = eps_a.values() - eps.values();
  g.norm_a = grad.norm();
  if (step >= config.warmup && config.lambda_sds != 0.0) {
    const Canvas eps_v = cfg(image.predict(x_t, std::nullopt, g.t), image.predict(x_t, cat_v, g.t),
                             config.guidance_v);
    const Eigen::VectorXd gv = config.lambda_sds * (eps_v.values() - eps.values());
    g.norm_v = gv.norm();
    grad += gv;
  }
  if (!grad.allFinite()) {
    throw OptimizationError("non-finite SDS gradient at step " + std::to_string(step));
  }
  g.grad = Canvas(x.shape(), std::move(grad));
  return g;
}

SdsResult sds_optimize(Category cat_a, Category cat_v, const SdsConfig& config,
                       const NoisePredictor& audio, const NoisePredictor& image,
                       const NoiseSchedule& schedule, Rng& rng, Shape shape) {
  config.validate();
  SdsResult res;
  res.raw = Canvas(shape);
  nn::Adam<double> adam(shape.size(), config.adam);
  for (int step = 0; step < config.steps; ++step) {
    const SdsGradient g = sds_step(res.raw, audio, image, cat_a, cat_v, config, step, schedule, rng);
    adam.step(res.raw.values(), g.grad.values());
    if (!res.raw.all_finite()) {
      throw OptimizationError("SDS parameters diverged at step " + std::to_string(step));
    }
    res.trace.push_back({step, g.norm_a, g.norm_v});
  }
  res.canvas = to_canvas_space(res.raw);
  return res;
}

std::string sds_trace_text(const std::vector<SdsTraceEntry>& trace) {
  std::ostringstream os;
  for (const auto& e : trace) {
    os << e.step << ' ' << format_double(e.grad_norm_a) << ' ' << format_double(e.grad_norm_v) << '\n';
  }
  return os.str();
}

}  // namespace imsound
