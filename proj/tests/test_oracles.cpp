#include <doctest.h>

#include "imsound/oracles.hpp"

using namespace imsound;

TEST_CASE("analytic oracles") {
  Rng rng(11);
  const NoiseSchedule s = default_schedule();
  CHECK(noise_predictor_fd_error(50, rng, s) < 1e-5);
  CHECK(product_quadrature_error() < 1e-6);
  CHECK(ddim_reconstruction_error(rng, s) < 1e-10);
  CHECK(self_composition_is_exact(rng, s));
  const SampleMoments m = gaussian_composition_moments(2000, 50, rng, s);
  CHECK(m.n == 2000);
  CHECK(std::abs(m.mean) < 0.1);
  CHECK(std::abs(m.variance - 1.0) < 0.2);
}

TEST_CASE("oracle suite reports every check") {
  const auto checks = gmm_oracle_suite(3);
  REQUIRE(checks.size() == 5);
  for (const auto& c : checks) {
    CHECK_MESSAGE(c.pass, c.name << " " << c.detail);
    CHECK(!c.detail.empty());
  }
}
