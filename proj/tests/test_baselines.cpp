#include <doctest.h>

#include "imsound/analytic.hpp"
#include "imsound/baselines.hpp"
#include "imsound/datagen.hpp"

#include <cmath>

using namespace imsound;

namespace {

class ZeroPredictor final : public NoisePredictor {
 public:
  Canvas predict(const Canvas& x, Category, int) const override {
    ++calls;
    return Canvas(x.shape());
  }
  mutable int calls = 0;
};

// Always predicts the exact noise used to form x_t from x0 = 0: eps = x_t / sqrt(1 - ab).
class PerfectAtZero final : public NoisePredictor {
 public:
  explicit PerfectAtZero(NoiseSchedule s) : s_(std::move(s)) {}
  Canvas predict(const Canvas& x, Category, int t) const override {
    return Canvas(x.shape(), x.values() / std::sqrt(1.0 - s_.alpha_bar(t)));
  }

 private:
  NoiseSchedule s_;
};

Canvas random_unit(Rng& rng, Shape sh) {
  Canvas c(sh);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.values()[i] = rng.uniform();
  return c;
}

}  // namespace

TEST_CASE("imprint identities") {
  Rng rng(1);
  const Shape sh{1, 4, 8};
  const Canvas spec = random_unit(rng, sh), img = random_unit(rng, sh);
  CHECK(imprint(spec, img, 0.0).values() == spec.values());
  CHECK(imprint(spec, Canvas::constant(sh, 1.0), 0.8).values() == spec.values());
  CHECK(imprint(spec, Canvas(sh), 1.0).values().cwiseAbs().maxCoeff() == 0.0);

  const Canvas out = imprint(spec, img, 0.3);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double expect = spec.values()[i] * (1.0 - 0.3 * (1.0 - img.values()[i]));
    CHECK(out.values()[i] == doctest::Approx(expect).epsilon(1e-15));
  }
  const Canvas lo = imprint(spec, img, 0.2), hi = imprint(spec, img, 0.7);
  CHECK((hi.values().array() <= lo.values().array()).all());

  const Canvas rgb = render_colored_glyph(ImageCategory::cross, rng, sh);
  CHECK(imprint(spec, rgb, 0.5).values().isApprox(imprint(spec, grayscale(rgb), 0.5).values()));

  CHECK_THROWS_AS(imprint(spec, img, 1.5), ParameterError);
  CHECK_THROWS_AS(imprint(spec, Canvas(Shape{1, 4, 9}), 0.5), ShapeError);
  CHECK_THROWS_AS(imprint(rgb, img, 0.5), ShapeError);
}

TEST_CASE("imprint pipeline at rho = 0 is the audio sample") {
  ZeroPredictor audio, image;
  CompositionConfig c;
  c.steps = 5;
  Rng r1(2), r2(2);
  const Shape sh{1, 4, 4};
  const ImprintResult res = imprint_pipeline(0, 1, 0.0, audio, image, c, default_schedule(), r1, sh);
  const SampleResult a = sample_single(audio, 0, c.gamma_a, 5, default_schedule(), r2, sh);
  CHECK(res.canvas.values() == a.canvas.values());
  CHECK(res.spectrogram.values() == a.canvas.values());
  CHECK(res.image.shape() == sh);
}

TEST_CASE("sds gradient vanishes at an exact fixed point") {
  const NoiseSchedule s = default_schedule();
  const PerfectAtZero p(s);
  SdsConfig cfg;
  cfg.warmup = 0;
  Rng rng(3);
  const Canvas x(Shape{1, 4, 4});
  for (int i = 0; i < 5; ++i) {
    const SdsGradient g = sds_step(x, p, p, 0, 0, cfg, 10, s, rng);
    CHECK(g.grad.values().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(g.t >= 20);
    CHECK(g.t <= 980);
  }
}

TEST_CASE("sds skips the image model during warmup and at lambda 0") {
  const NoiseSchedule s = default_schedule();
  ZeroPredictor a, v;
  SdsConfig cfg;
  cfg.warmup = 3;
  Rng rng(4);
  const Canvas x(Shape{1, 2, 2});
  const SdsGradient g0 = sds_step(x, a, v, 0, 0, cfg, 2, s, rng);
  CHECK(v.calls == 0);
  CHECK(g0.norm_v == 0.0);
  sds_step(x, a, v, 0, 0, cfg, 3, s, rng);
  CHECK(v.calls == 2);
  cfg.lambda_sds = 0.0;
  sds_step(x, a, v, 0, 0, cfg, 10, s, rng);
  CHECK(v.calls == 2);

  SdsConfig bad;
  bad.warmup = bad.steps + 1;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = {};
  bad.t_min = 0.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("sds with lambda 0 drives pixels toward the audio mixture mode") {
  const NoiseSchedule s = default_schedule();
  const Shape sh{1, 1, 2};
  Eigen::VectorXd mean(2);
  mean << 0.6, -0.4;
  const GmmPredictor audio(sh, GaussianMixture::single(mean, 0.01), s);
  ZeroPredictor image;
  SdsConfig cfg;
  cfg.lambda_sds = 0.0;
  cfg.steps = 1500;
  cfg.warmup = 0;
  cfg.guidance_a = 1.0;
  Rng rng(5);
  const SdsResult r = sds_optimize(std::nullopt, std::nullopt, cfg, audio, image, s, rng, sh);
  CHECK(image.calls == 0);
  REQUIRE(r.trace.size() == 1500);
  CHECK((r.raw.values() - mean).norm() < 0.1);
  CHECK(sds_trace_text(r.trace).find("0 ") == 0);
}
