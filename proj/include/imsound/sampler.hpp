#pragma once

#include "imsound/core.hpp"
#include "imsound/predictor.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace imsound {

struct SamplingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CompositionConfig {
  double gamma_v = 10.0;
  double gamma_a = 10.0;
  double t_v = 0.9;  // fraction of the reverse process with the image model active
  double t_a = 1.0;
  int steps = 100;
  double sigma = 0.0;  // capped per step at sqrt(1 - alpha_bar[t_prev])
  std::uint64_t seed = 0;

  /// max(t_a, t_v) == 1, both in [0,1], guidance >= 0, steps >= 1.
  void validate() const;
};

/// One DDIM update from t to t_prev:
///   sqrt(ab_prev) x0_hat + sqrt(1 - ab_prev - sigma^2) eps_hat + sigma z,
/// with x0_hat = (x_t - sqrt(1 - ab_t) eps_hat) / sqrt(ab_t). z is drawn
/// only when sigma > 0.
template <typename Scalar>
CanvasT<Scalar> ddim_step(const CanvasT<Scalar>& x_t, const CanvasT<Scalar>& eps_hat, int t,
                          int t_prev, const NoiseSchedule& schedule, double sigma, Rng& rng) {
  require_same_shape(x_t.shape(), eps_hat.shape(), "ddim_step");
  if (t_prev >= t) throw ParameterError("ddim_step: t_prev must be below t");
  if (sigma < 0.0) throw ParameterError("ddim_step: sigma must be nonnegative");
  const double ab = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t_prev);
  const double dir2 = 1.0 - ab_prev - sigma * sigma;
  if (dir2 < 0.0) throw ParameterError("ddim_step: sigma^2 exceeds 1 - alpha_bar[t_prev]");

  const auto x0_hat = (x_t.values() - Scalar(std::sqrt(1.0 - ab)) * eps_hat.values()) /
                      Scalar(std::sqrt(ab));
  CanvasT<Scalar> out(x_t.shape(), Scalar(std::sqrt(ab_prev)) * x0_hat +
                                       Scalar(std::sqrt(dir2)) * eps_hat.values());
  if (sigma > 0.0) out.values() += Scalar(sigma) * gaussian_canvas<Scalar>(rng, x_t.shape()).values();
  return out;
}

/// Classifier-free guidance, evaluated as (1 - gamma) eps_uncond + gamma
/// eps_cond so that gamma = 0 and gamma = 1 reproduce their inputs exactly.
Canvas cfg(const Canvas& eps_uncond, const Canvas& eps_cond, double gamma);

struct ModalityWeights {
  double lambda_a = 0.0;
  double lambda_v = 0.0;
};

/// Heaviside warm start: w = H(t_frac * T - t) with H(0) = 1, normalized.
ModalityWeights warm_start_weights(int t, int T, double t_a, double t_v);

/// lambda_a eps_a + lambda_v eps_v; weights must be nonnegative and sum to 1.
Canvas compose_eps(const Canvas& eps_a, const Canvas& eps_v, double lambda_a, double lambda_v);

struct StepDiagnostics {
  int step = 0;
  int t = 0;
  double lambda_a = 0.0;
  double lambda_v = 0.0;
  double norm_a = 0.0;  // 0 when the modality is inactive and was not evaluated
  double norm_v = 0.0;
};

struct SampleResult {
  Canvas raw;     // final model-space state
  Canvas canvas;  // mapped to [0,1] and clamped
  std::vector<StepDiagnostics> diagnostics;
};

/// Joint reverse process over the shared canvas. Each active modality
/// contributes a guided estimate; weights follow warm_start_weights on the
/// training timestep.
SampleResult sample_composed(const NoisePredictor& model_a, const NoisePredictor& model_v,
                             Category cat_a, Category cat_v, const CompositionConfig& config,
                             const NoiseSchedule& schedule, Rng& rng, Shape shape);

/// Single-model DDIM with guidance; the same loop as sample_composed with the
/// second modality never active.
SampleResult sample_single(const NoisePredictor& model, Category category, double gamma, int steps,
                           const NoiseSchedule& schedule, Rng& rng, Shape shape, double sigma = 0.0);

/// Lines "step t lambda_a lambda_v norm_a norm_v".
std::string diagnostics_text(const std::vector<StepDiagnostics>& diagnostics);

/// Guided DDIM over 3-channel canvases whose channel mean is pinned to a
/// grayscale target: after each update the channel-mean component of the
/// state is replaced by that of the forward-diffused target at t_prev (fresh
/// noise each step), and by the target itself at the last step. The final
/// clamp to [0,1] shrinks each pixel's chroma residual rather than clipping
/// channels independently, so the channel mean is kept.
Canvas colorize(const NoisePredictor& model, const Canvas& target_gray, int steps, double gamma,
                Category category, const NoiseSchedule& schedule, Rng& rng);

}  // namespace imsound
