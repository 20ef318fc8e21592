#pragma once

#include "imsound/analytic.hpp"
#include "imsound/sampler.hpp"

#include <string>
#include <vector>

namespace imsound {

/// Max relative error of gmm_noise_predictor against central differences of
/// the noised log-density, over random mixtures (dim 1-3, 1-3 components),
/// points and timesteps.
double noise_predictor_fd_error(int probes, Rng& rng, const NoiseSchedule& schedule);

/// Max relative error of gmm_product against the pointwise product of two
/// fixed 1-D mixtures normalized by Simpson quadrature.
double product_quadrature_error();

/// Max abs error of ddim_step from forward_diffuse(x0, t) to
/// forward_diffuse(x0, t_prev) with the true noise, along a 100-step
/// trajectory.
double ddim_reconstruction_error(Rng& rng, const NoiseSchedule& schedule);

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;
  int n = 0;
};

/// Composes unit-variance 1-D Gaussian predictors at -2 and +2 with equal
/// weights, gamma = 1, and returns the moments of n samples.
SampleMoments gaussian_composition_moments(int n, int steps, Rng& rng, const NoiseSchedule& schedule);

/// True when composing a mixture predictor with itself reproduces
/// single-model sampling bitwise.
bool self_composition_is_exact(Rng& rng, const NoiseSchedule& schedule);

struct OracleCheck {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// The analytic verification suite run by `imsound verify-gmm`.
std::vector<OracleCheck> gmm_oracle_suite(std::uint64_t seed);

}  // namespace imsound
