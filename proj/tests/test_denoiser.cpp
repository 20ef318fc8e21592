#include <doctest.h>

#include "imsound/denoiser.hpp"

#include <cmath>

using namespace imsound;

namespace {

DenoiserModel random_model(std::uint64_t seed, DenoiserConfig cfg = {}) {
  DenoiserModel m(cfg);
  Rng rng(seed);
  m.initialize(rng);
  // Give the conditioning path nonzero weights so every parameter matters.
  auto w2 = m.layout().map(m.parameters(), m.ids().mlp_w2);
  for (Eigen::Index i = 0; i < w2.size(); ++i) w2.data()[i] = 0.05 * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("prediction shape and zero output layer") {
  DenoiserModel m = random_model(1);
  Rng rng(2);
  const Canvas x = gaussian_canvas(rng, Shape{1, 8, 12});
  CHECK(m.predict(x, 2, 10).shape() == x.shape());

  auto w = m.layout().map(m.parameters(), m.ids().conv_w[3]);
  w.setZero();
  CHECK(m.predict(x, 2, 10).values().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("null category routes to the null row") {
  DenoiserModel m = random_model(3);
  Rng rng(4);
  const Canvas x = gaussian_canvas(rng, Shape{1, 8, 8});
  const Canvas before = m.predict(x, std::nullopt, 300);
  auto embed = m.layout().map(m.parameters(), m.ids().embed);
  embed.topRows(kNumCategories).setRandom();
  CHECK(m.predict(x, std::nullopt, 300).values() == before.values());
  embed.row(kNumCategories).array() += 0.5;
  CHECK(m.predict(x, std::nullopt, 300).values() != before.values());
  CHECK_THROWS_AS(m.predict(x, 5, 300), ParameterError);
  CHECK_THROWS_AS(m.predict(x, -1, 300), ParameterError);
  CHECK_THROWS_AS(m.predict(Canvas(Shape{3, 4, 4}), 0, 1), ShapeError);
}

TEST_CASE("zeroed conditioning makes output independent of category and time") {
  DenoiserModel m = random_model(5);
  m.layout().map(m.parameters(), m.ids().mlp_w2).setZero();
  m.layout().map(m.parameters(), m.ids().mlp_b2).setZero();
  Rng rng(6);
  const Canvas x = gaussian_canvas(rng, Shape{1, 8, 8});
  const Canvas a = m.predict(x, 0, 10);
  CHECK(m.predict(x, 4, 900).values() == a.values());
  CHECK(m.predict(x, std::nullopt, 500).values() == a.values());
}

TEST_CASE("prediction is deterministic") {
  const DenoiserModel m = random_model(7);
  Rng rng(8);
  const Canvas x = gaussian_canvas(rng, Shape{1, 32, 128});
  CHECK(m.predict(x, 1, 77).values() == m.predict(x, 1, 77).values());
}

TEST_CASE("gradient check, linear model") {
  DenoiserConfig cfg;
  cfg.linear = true;
  cfg.width = 8;
  const DenoiserModel m = random_model(9, cfg);
  Rng rng(10);
  const GradCheckResult r = grad_check(m, 100, rng);
  CHECK(r.probes == 100);
  CHECK(r.max_rel_error < 1e-7);
}

TEST_CASE("gradient check, full model") {
  const DenoiserModel m = random_model(11);
  Rng rng(12);
  CHECK(grad_check(m, 100, rng).max_rel_error < 1e-3);
}

TEST_CASE("zero input and zero target give zero weight gradients") {
  DenoiserModel m;
  Rng rng(13);
  m.initialize(rng);
  const Canvas z(Shape{1, 8, 8});
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(m.parameters().size());
  // The output is the final bias alone; a zero bias makes the error zero.
  m.accumulate_gradient(z, 0, 1, z, 1.0, grad);
  CHECK(grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("float model tracks the double model") {
  const DenoiserModel m = random_model(14);
  const DenoiserT<float> f = m.cast<float>();
  Rng rng(15);
  const Canvas x = gaussian_canvas(rng, Shape{1, 32, 128});
  const Canvas a = m.predict(x, 3, 400);
  const Canvas b = f.predict(x.cast<float>(), 3, 400).cast<double>();
  CHECK((a.values() - b.values()).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("short training run") {
  const auto data = make_dataset(Modality::image, 20, Rng(1));
  TrainConfig cfg;
  cfg.steps = 3;
  cfg.batch = 2;
  Rng r1(5), r2(5);
  const TrainResult a = train_denoiser(data, cfg, default_schedule(), r1);
  const TrainResult b = train_denoiser(data, cfg, default_schedule(), r2);
  REQUIRE(a.loss.size() == 3);
  CHECK(a.loss[0] > 0.5);
  CHECK(a.loss[0] < 1.5);
  CHECK(a.model.parameters() == b.model.parameters());
  CHECK(smoothed_loss(a.loss, 2, 2) == doctest::Approx(0.5 * (a.loss[1] + a.loss[2])));

  cfg.dropout = 1.0;
  CHECK_THROWS_AS(train_denoiser(data, cfg, default_schedule(), r1), ParameterError);
  CHECK_THROWS_AS(train_denoiser({}, TrainConfig{}, default_schedule(), r1), ParameterError);
}

TEST_CASE("divergence is reported with its step") {
  auto data = make_dataset(Modality::image, 5, Rng(1));
  data[0].canvas.values()[0] = std::nan("");
  for (auto& it : data) it.canvas = data[0].canvas;
  TrainConfig cfg;
  cfg.steps = 2;
  cfg.batch = 1;
  Rng rng(3);
  CHECK_THROWS_WITH_AS(train_denoiser(data, cfg, default_schedule(), rng),
                       "denoiser training diverged at step 0", TrainingError);
}

TEST_CASE("classifier basics") {
  ClassifierModel c;
  Rng rng(16);
  c.initialize(rng);
  const Canvas x = gaussian_canvas(rng, kCanvasShape);
  CHECK(c.probabilities(x).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.features(x).size() == 64);
  CHECK(c.features(x) == c.features(x));
  const Eigen::VectorXd f0 = c.features(Canvas(kCanvasShape));
  const Eigen::VectorXd f1 = c.features(Canvas::constant(kCanvasShape, 1.0));
  CHECK((f0 - f1).norm() > 0.0);
  Canvas y = x;
  y.values() += 1e-6 * gaussian_canvas(rng, kCanvasShape).values();
  CHECK((c.features(x) - c.features(y)).norm() < 1e-3);
}

TEST_CASE("classifier gradient matches finite differences") {
  ClassifierModel c;
  Rng rng(17);
  c.initialize(rng);
  Canvas x(Shape{1, 16, 16});
  for (Eigen::Index i = 0; i < x.size(); ++i) x.values()[i] = rng.uniform();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(c.parameters().size());
  c.accumulate_gradient(x, 2, 1.0, grad);
  double worst = 0.0;
  for (int p = 0; p < 100; ++p) {
    const Eigen::Index i = rng.uniform_int(0, int(c.parameters().size()) - 1);
    const double saved = c.parameters()[i];
    Eigen::VectorXd dummy = Eigen::VectorXd::Zero(grad.size());
    c.parameters()[i] = saved + 1e-5;
    const double lp = c.accumulate_gradient(x, 2, 1.0, dummy);
    c.parameters()[i] = saved - 1e-5;
    const double lm = c.accumulate_gradient(x, 2, 1.0, dummy);
    c.parameters()[i] = saved;
    worst = std::max(worst, gradient_rel_error(grad[i], (lp - lm) / 2e-5));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("single-category classifier training is perfect") {
  std::vector<DatasetItem> items;
  Rng rng(18);
  for (int i = 0; i < 10; ++i) items.push_back({render_glyph(ImageCategory::cross, rng), 2, {}});
  ClassifierTrainConfig cfg;
  cfg.steps = 30;
  cfg.batch = 4;
  const auto r = train_classifier(items, cfg, rng);
  CHECK(r.accuracy == 1.0);

  cfg.superpose = 1.0;
  CHECK(train_classifier(items, cfg, rng).accuracy == 1.0);
  cfg.superpose = 1.5;
  CHECK_THROWS_AS(train_classifier(items, cfg, rng), ParameterError);
  cfg.superpose = 0.0;
  items[3].category = 7;
  CHECK_THROWS_AS(train_classifier(items, cfg, rng), ParameterError);
}

TEST_CASE("checkpoints round trip byte-stably") {
  const DenoiserModel m = random_model(19, DenoiserConfig{1, 8, 16, 32, 5, false});
  const auto bytes = encode_checkpoint(m);
  const DenoiserModel back = decode_denoiser(bytes);
  CHECK(back.config() == m.config());
  CHECK(back.parameters() == m.parameters());
  CHECK(encode_checkpoint(back) == bytes);
  CHECK_THROWS_AS(decode_classifier(bytes), FormatError);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_denoiser(truncated), FormatError);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_denoiser(bad), FormatError);

  ClassifierModel c;
  Rng rng(20);
  c.initialize(rng);
  const ClassifierModel cb = decode_classifier(encode_checkpoint(c));
  CHECK(cb.parameters() == c.parameters());
}
