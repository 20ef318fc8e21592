#include "imsound/oracles.hpp"

#include "imsound/io.hpp"

#include <chrono>
#include <cmath>
#include <functional>

namespace imsound {
namespace {

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

Eigen::VectorXd fd_noise(const GaussianMixture& gmm, const Eigen::VectorXd& x, double ab) {
  const GaussianMixture noised = gmm.noised(ab);
  const double h = 1e-5;
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd p = x, m = x;
    p[i] += h;
    m[i] -= h;
    g[i] = (noised.log_density(p) - noised.log_density(m)) / (2 * h);
  }
  return -std::sqrt(1.0 - ab) * g;
}

}  // namespace

double noise_predictor_fd_error(int probes, Rng& rng, const NoiseSchedule& schedule) {
  double worst = 0.0;
  for (int probe = 0; probe < probes; ++probe) {
    const int dim = rng.uniform_int(1, 3);
    std::vector<GaussianComponent> comps;
    const int k = rng.uniform_int(1, 3);
    for (int j = 0; j < k; ++j) {
      Eigen::VectorXd m(dim);
      for (int d = 0; d < dim; ++d) m[d] = rng.uniform(-2, 2);
      comps.push_back({rng.uniform(0.2, 1.0), m, rng.uniform(0.1, 1.5)});
    }
    const GaussianMixture g(dim, comps);
    Eigen::VectorXd x(dim);
    for (int d = 0; d < dim; ++d) x[d] = rng.uniform(-2.5, 2.5);
    const int t = rng.uniform_int(1, schedule.steps());
    const Eigen::VectorXd e = gmm_noise_predictor(g, x, t, schedule);
    const Eigen::VectorXd fd = fd_noise(g, x, schedule.alpha_bar(t));
    worst = std::max(worst, (e - fd).norm() / std::max(fd.norm(), 1e-3));
  }
  return worst;
}

double product_quadrature_error() {
  const GaussianMixture a(1, {{0.3, vec1(-1.5), 0.4}, {0.7, vec1(1.0), 0.8}});
  const GaussianMixture b(1, {{0.6, vec1(-0.5), 1.2}, {0.4, vec1(2.0), 0.3}});
  const GaussianMixture p = gmm_product(a, b);
  const int n = 20000;
  const double lo = -12, hi = 12, h = (hi - lo) / n;
  double z = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    z += w * a.density(vec1(x)) * b.density(vec1(x));
  }
  z *= h / 3;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double x = -4.0 + 8.0 * i / 99.0;
    const double truth = a.density(vec1(x)) * b.density(vec1(x)) / z;
    worst = std::max(worst, std::abs(p.density(vec1(x)) - truth) / truth);
  }
  return worst;
}

double ddim_reconstruction_error(Rng& rng, const NoiseSchedule& schedule) {
  const Shape sh{1, 8, 8};
  const Canvas x0 = gaussian_canvas(rng, sh), eps = gaussian_canvas(rng, sh);
  const std::vector<int> ts = inference_timesteps(schedule.steps(), 100);
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const Canvas xt = forward_diffuse(x0, ts[i], eps, schedule);
    const Canvas next = ddim_step(xt, eps, ts[i], ts[i + 1], schedule, 0.0, rng);
    const Canvas truth = forward_diffuse(x0, ts[i + 1], eps, schedule);
    worst = std::max(worst, (next.values() - truth.values()).cwiseAbs().maxCoeff());
  }
  return worst;
}

SampleMoments gaussian_composition_moments(int n, int steps, Rng& rng, const NoiseSchedule& schedule) {
  if (n < 2) throw ParameterError("gaussian_composition_moments: n must be >= 2");
  const Shape sh{1, 1, 1};
  const GmmPredictor pa(sh, GaussianMixture::single(vec1(-2.0), 1.0), schedule);
  const GmmPredictor pv(sh, GaussianMixture::single(vec1(2.0), 1.0), schedule);
  CompositionConfig c;
  c.gamma_a = c.gamma_v = 1.0;
  c.t_a = c.t_v = 1.0;
  c.steps = steps;
  Eigen::VectorXd xs(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = sample_composed(pa, pv, std::nullopt, std::nullopt, c, schedule, rng, sh).raw.values()[0];
  }
  const double mean = xs.mean();
  return {mean, (xs.array() - mean).square().sum() / (n - 1.0), n};
}

bool self_composition_is_exact(Rng& rng, const NoiseSchedule& schedule) {
  const Shape sh{1, 1, 2};
  Eigen::VectorXd m1(2), m2(2);
  m1 << -1.0, 0.5;
  m2 << 1.5, -0.5;
  const GmmPredictor p(sh, GaussianMixture(2, {{0.4, m1, 0.2}, {0.6, m2, 0.3}}), schedule);
  CompositionConfig c;
  c.gamma_a = c.gamma_v = 1.0;
  c.t_a = c.t_v = 1.0;
  for (int k = 0; k < 8; ++k) {
    Rng r1 = rng.derive(std::uint64_t(k)), r2 = rng.derive(std::uint64_t(k));
    const Canvas a = sample_composed(p, p, std::nullopt, std::nullopt, c, schedule, r1, sh).raw;
    const Canvas b = sample_single(p, std::nullopt, 1.0, c.steps, schedule, r2, sh).raw;
    if (a.values() != b.values()) return false;
  }
  return true;
}

std::vector<OracleCheck> gmm_oracle_suite(std::uint64_t seed) {
  const NoiseSchedule s = default_schedule();
  const Rng root(seed);
  std::vector<OracleCheck> out;
  auto timed = [&](const std::string& name, const std::function<OracleCheck()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    OracleCheck c = f();
    c.name = name;
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(c));
  };
  timed("noise-predictor-vs-finite-differences", [&] {
    Rng r = root.derive(1);
    const double e = noise_predictor_fd_error(1000, r, s);
    return OracleCheck{{}, e < 1e-5, "max_rel_error=" + format_double(e) + " (< 1e-5)"};
  });
  timed("product-vs-quadrature", [&] {
    const double e = product_quadrature_error();
    return OracleCheck{{}, e < 1e-6, "max_rel_error=" + format_double(e) + " (< 1e-6)"};
  });
  timed("ddim-oracle-trajectory", [&] {
    Rng r = root.derive(2);
    const double e = ddim_reconstruction_error(r, s);
    return OracleCheck{{}, e < 1e-10, "max_abs_error=" + format_double(e) + " (< 1e-10)"};
  });
  timed("composition-of-gaussians", [&] {
    Rng r = root.derive(3);
    const SampleMoments m = gaussian_composition_moments(10000, 100, r, s);
    const bool ok = std::abs(m.mean) <= 0.05 && std::abs(m.variance - 1.0) <= 0.10;
    return OracleCheck{{}, ok, "mean=" + format_double(m.mean) + " (|.| <= 0.05) variance=" +
                                   format_double(m.variance) + " (|.-1| <= 0.10) n=10000"};
  });
  timed("self-composition-bitwise", [&] {
    Rng r = root.derive(4);
    const bool ok = self_composition_is_exact(r, s);
    return OracleCheck{{}, ok, ok ? "identical" : "differs"};
  });
  return out;
}

}  // namespace imsound
