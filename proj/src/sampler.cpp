#include "imsound/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "imsound/io.hpp"

namespace imsound {

void CompositionConfig::validate() const {
  if (!(t_a >= 0.0 && t_a <= 1.0 && t_v >= 0.0 && t_v <= 1.0)) {
    throw ParameterError("warm-start fractions must lie in [0,1]");
  }
  if (std::max(t_a, t_v) != 1.0) throw ParameterError("max(t_a, t_v) must equal 1");
  if (!(gamma_a >= 0.0 && gamma_v >= 0.0)) throw ParameterError("guidance scales must be >= 0");
  if (steps < 1) throw ParameterError("inference steps must be >= 1");
  if (!(sigma >= 0.0)) throw ParameterError("sigma must be >= 0");
}

Canvas cfg(const Canvas& eps_uncond, const Canvas& eps_cond, double gamma) {
  require_same_shape(eps_uncond.shape(), eps_cond.shape(), "cfg");
  return Canvas(eps_cond.shape(), (1.0 - gamma) * eps_uncond.values() + gamma * eps_cond.values());
}

ModalityWeights warm_start_weights(int t, int T, double t_a, double t_v) {
  const double w_a = t_a * T - t >= 0.0 ? 1.0 : 0.0;
  const double w_v = t_v * T - t >= 0.0 ? 1.0 : 0.0;
  if (w_a + w_v == 0.0) {
    throw std::logic_error("warm_start_weights: no modality active at t=" + std::to_string(t));
  }
  return {w_a / (w_a + w_v), w_v / (w_a + w_v)};
}

Canvas compose_eps(const Canvas& eps_a, const Canvas& eps_v, double lambda_a, double lambda_v) {
  require_same_shape(eps_a.shape(), eps_v.shape(), "compose_eps");
  if (lambda_a < 0.0 || lambda_v < 0.0 || std::abs(lambda_a + lambda_v - 1.0) > 1e-12) {
    throw ParameterError("compose_eps: weights must be nonnegative and sum to 1");
  }
  return Canvas(eps_a.shape(), lambda_a * eps_a.values() + lambda_v * eps_v.values());
}

namespace {

Canvas guided(const NoisePredictor& model, const Canvas& x, Category cat, int t, double gamma) {
  return cfg(model.predict(x, std::nullopt, t), model.predict(x, cat, t), gamma);
}

SampleResult run(const NoisePredictor& model_a, const NoisePredictor& model_v, Category cat_a,
                 Category cat_v, const CompositionConfig& c, const NoiseSchedule& schedule, Rng& rng,
                 Shape shape) {
  const int T = schedule.steps();
  const std::vector<int> ts = inference_timesteps(T, c.steps);
  SampleResult res;
  Canvas x = gaussian_canvas(rng, shape);
  for (int i = 0; i < c.steps; ++i) {
    const int t = ts[std::size_t(i)], t_prev = ts[std::size_t(i) + 1];
    const ModalityWeights w = warm_start_weights(t, T, c.t_a, c.t_v);
    StepDiagnostics d{i, t, w.lambda_a, w.lambda_v, 0.0, 0.0};
    Canvas eps;
    if (w.lambda_v == 0.0) {
      eps = guided(model_a, x, cat_a, t, c.gamma_a);
      d.norm_a = eps.values().norm();
    } else if (w.lambda_a == 0.0) {
      eps = guided(model_v, x, cat_v, t, c.gamma_v);
      d.norm_v = eps.values().norm();
    } else {
      const Canvas eps_a = guided(model_a, x, cat_a, t, c.gamma_a);
      const Canvas eps_v = guided(model_v, x, cat_v, t, c.gamma_v);
      d.norm_a = eps_a.values().norm();
      d.norm_v = eps_v.values().norm();
      eps = compose_eps(eps_a, eps_v, w.lambda_a, w.lambda_v);
    }
    const double sigma = std::min(c.sigma, std::sqrt(1.0 - schedule.alpha_bar(t_prev)));
    x = ddim_step(x, eps, t, t_prev, schedule, sigma, rng);
    if (!x.all_finite()) {
      throw SamplingError("non-finite sampler state at step " + std::to_string(i) + " (t=" +
                          std::to_string(t) + ")");
    }
    res.diagnostics.push_back(d);
  }
  res.canvas = to_canvas_space(x);
  res.raw = std::move(x);
  return res;
}

}  // namespace

SampleResult sample_composed(const NoisePredictor& model_a, const NoisePredictor& model_v,
                             Category cat_a, Category cat_v, const CompositionConfig& config,
                             const NoiseSchedule& schedule, Rng& rng, Shape shape) {
  config.validate();
  return run(model_a, model_v, cat_a, cat_v, config, schedule, rng, shape);
}

SampleResult sample_single(const NoisePredictor& model, Category category, double gamma, int steps,
                           const NoiseSchedule& schedule, Rng& rng, Shape shape, double sigma) {
  CompositionConfig c;
  c.gamma_a = c.gamma_v = gamma;
  c.t_a = 1.0;
  c.t_v = 0.0;
  c.steps = steps;
  c.sigma = sigma;
  c.validate();
  return run(model, model, category, category, c, schedule, rng, shape);
}

std::string diagnostics_text(const std::vector<StepDiagnostics>& diagnostics) {
  std::ostringstream os;
  for (const auto& d : diagnostics) {
    os << d.step << ' ' << d.t << ' ' << format_double(d.lambda_a) << ' ' << format_double(d.lambda_v)
       << ' ' << format_double(d.norm_a) << ' ' << format_double(d.norm_v) << '\n';
  }
  return os.str();
}

namespace {

// Replaces the channel mean of x with `mean` (a single-plane vector).
void set_channel_mean(Canvas& x, const Eigen::VectorXd& mean) {
  const Eigen::Index P = Eigen::Index(x.height()) * x.width();
  Eigen::Map<Eigen::MatrixXd> m(x.values().data(), P, x.channels());
  const Eigen::VectorXd shift = mean - m.rowwise().mean();
  m.colwise() += shift;
}

}  // namespace

Canvas colorize(const NoisePredictor& model, const Canvas& target_gray, int steps, double gamma,
                Category category, const NoiseSchedule& schedule, Rng& rng) {
  if (target_gray.channels() != 1) throw ShapeError("colorize: target must have one channel");
  if (steps < 1) throw ParameterError("colorize: steps must be >= 1");
  if (target_gray.values().minCoeff() < 0.0 || target_gray.values().maxCoeff() > 1.0) {
    throw ParameterError("colorize: target must lie in [0,1]");
  }
  const Shape shape{3, target_gray.height(), target_gray.width()};
  const Eigen::Index P = target_gray.size();
  const Eigen::VectorXd target = 2.0 * target_gray.values().array() - 1.0;

  auto noisy_mean = [&](int t) -> Eigen::VectorXd {
    if (t == 0) return target;
    const double ab = schedule.alpha_bar(t);
    const Canvas eps = gaussian_canvas(rng, shape);
    const Eigen::Map<const Eigen::MatrixXd> e(eps.values().data(), P, 3);
    return std::sqrt(ab) * target + std::sqrt(1.0 - ab) * e.rowwise().mean();
  };

  const std::vector<int> ts = inference_timesteps(schedule.steps(), steps);
  Canvas x = gaussian_canvas(rng, shape);
  set_channel_mean(x, noisy_mean(ts.front()));
  for (int i = 0; i < steps; ++i) {
    const int t = ts[std::size_t(i)], t_prev = ts[std::size_t(i) + 1];
    x = ddim_step(x, guided(model, x, category, t, gamma), t, t_prev, schedule, 0.0, rng);
    if (!x.all_finite()) throw SamplingError("non-finite colorize state at step " + std::to_string(i));
    set_channel_mean(x, noisy_mean(t_prev));
  }

  Canvas out(shape, (x.values().array() + 1.0) * 0.5);
  Eigen::Map<Eigen::MatrixXd> m(out.values().data(), P, 3);
  for (Eigen::Index p = 0; p < P; ++p) {
    const double g = target_gray.values()[p];
    double s = 1.0;
    for (int c = 0; c < 3; ++c) {
      const double r = m(p, c) - g;
      if (g + r > 1.0) s = std::min(s, (1.0 - g) / r);
      if (g + r < 0.0) s = std::min(s, -g / r);
    }
    for (int c = 0; c < 3; ++c) m(p, c) = std::clamp(g + s * (m(p, c) - g), 0.0, 1.0);
  }
  return out;
}

}  // namespace imsound
