#pragma once

#include "imsound/core.hpp"
#include "imsound/nn.hpp"
#include "imsound/predictor.hpp"
#include "imsound/sampler.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace imsound {

struct OptimizationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ImprintConfig {
  double rho = 0.5;  // strength of the energy reduction
  void validate() const;
};

/// spec * (1 - rho * (1 - gray(image))). The image may have any channel
/// count; its channel mean is used.
Canvas imprint(const Canvas& spec_canvas, const Canvas& image_canvas, double rho);

struct ImprintResult {
  Canvas canvas;
  Canvas spectrogram;
  Canvas image;
};

/// Samples a spectrogram (audio model, gamma_a) and then a glyph (image
/// model, gamma_v) from one Rng, both with config.steps DDIM steps, and
/// imprints the glyph onto the spectrogram.
ImprintResult imprint_pipeline(int cat_a, int cat_v, double rho, const NoisePredictor& audio,
                               const NoisePredictor& image, const CompositionConfig& config,
                               const NoiseSchedule& schedule, Rng& rng, Shape shape);

struct SdsConfig {
  double lambda_sds = 0.4;  // weight of the image term
  int steps = 5000;
  int warmup = 500;  // audio-only steps
  double guidance_v = 10.0;
  double guidance_a = 10.0;
  double t_min = 0.02;  // timestep range as fractions of T
  double t_max = 0.98;
  nn::AdamConfig adam{1e-2, 0.9, 0.999, 1e-8};

  void validate() const;
};

struct SdsGradient {
  Canvas grad;
  int t = 0;
  double norm_a = 0.0;
  double norm_v = 0.0;  // 0 during warmup
};

/// Score-distillation gradient for pixels x (model space):
///   lambda_sds (eps_v - eps) + (eps_a - eps),
/// with guided estimates at x_t = forward_diffuse(x, t, eps) and the image
/// term dropped while step < warmup.
SdsGradient sds_step(const Canvas& x, const NoisePredictor& audio, const NoisePredictor& image,
                     Category cat_a, Category cat_v, const SdsConfig& config, int step,
                     const NoiseSchedule& schedule, Rng& rng);

struct SdsTraceEntry {
  int step = 0;
  double grad_norm_a = 0.0;
  double grad_norm_v = 0.0;
};

struct SdsResult {
  Canvas raw;     // optimized model-space pixels
  Canvas canvas;  // [0,1]
  std::vector<SdsTraceEntry> trace;
};

/// Adam on pixel values starting from the zero (mid-gray) canvas.
SdsResult sds_optimize(Category cat_a, Category cat_v, const SdsConfig& config,
                       const NoisePredictor& audio, const NoisePredictor& image,
                       const NoiseSchedule& schedule, Rng& rng, Shape shape);

/// Lines "step grad_norm_a grad_norm_v".
std::string sds_trace_text(const std::vector<SdsTraceEntry>& trace);

}  // namespace imsound
