#include <doctest.h>

#include "imsound/analytic.hpp"
#include "imsound/eval.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace imsound;

namespace {

std::vector<Eigen::VectorXd> gaussian_set(Rng& rng, int n, const Eigen::VectorXd& mu,
                                          const Eigen::MatrixXd& L) {
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd z(mu.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
    out.push_back(mu + L * z);
  }
  return out;
}

void moments(const std::vector<Eigen::VectorXd>& xs, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
  mu = Eigen::VectorXd::Zero(xs[0].size());
  for (const auto& x : xs) mu += x;
  mu /= double(xs.size());
  cov = Eigen::MatrixXd::Zero(mu.size(), mu.size());
  for (const auto& x : xs) cov += (x - mu) * (x - mu).transpose();
  cov /= double(xs.size() - 1);
}

// Trace of sqrt(S1 S2) from the (real, nonnegative) eigenvalues of the
// general product.
double frechet_oracle(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b) {
  Eigen::VectorXd m1, m2;
  Eigen::MatrixXd s1, s2;
  moments(a, m1, s1);
  moments(b, m2, s2);
  Eigen::EigenSolver<Eigen::MatrixXd> es(s1 * s2);
  double tr = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    tr += std::sqrt(std::max(0.0, es.eigenvalues()[i].real()));
  }
  return (m1 - m2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * tr;
}

}  // namespace

TEST_CASE("frechet distance of a set with itself is zero") {
  Rng rng(1);
  const int d = 4;
  const auto a = gaussian_set(rng, 50, Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d));
  CHECK(std::abs(frechet_feature_distance(a, a)) < 1e-9);
}

TEST_CASE("frechet distance is symmetric and matches oracles") {
  Rng rng(2);
  const int d = 5;
  Eigen::MatrixXd L1 = Eigen::MatrixXd::Random(d, d), L2 = Eigen::MatrixXd::Random(d, d);
  const auto a = gaussian_set(rng, 60, Eigen::VectorXd::Zero(d), L1);
  const auto b = gaussian_set(rng, 80, Eigen::VectorXd::Constant(d, 0.7), L2);
  const double ab = frechet_feature_distance(a, b), ba = frechet_feature_distance(b, a);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-9));
  CHECK(ab == doctest::Approx(frechet_oracle(a, b)).epsilon(1e-8));
  CHECK(ab > 0.0);
}

TEST_CASE("frechet distance in one dimension") {
  Rng rng(3);
  auto set = [&](double mu, double sd) {
    Eigen::MatrixXd L(1, 1);
    L << sd;
    return gaussian_set(rng, 30, Eigen::VectorXd::Constant(1, mu), L);
  };
  const auto a = set(0.0, 1.0), b = set(3.0, 2.0);
  Eigen::VectorXd m1, m2;
  Eigen::MatrixXd s1, s2;
  moments(a, m1, s1);
  moments(b, m2, s2);
  const double expect = std::pow(m1[0] - m2[0], 2) + std::pow(std::sqrt(s1(0, 0)) - std::sqrt(s2(0, 0)), 2);
  CHECK(frechet_feature_distance(a, b) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("frechet distance argument checks") {
  Rng rng(4);
  const auto a = gaussian_set(rng, 3, Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
  const auto b = gaussian_set(rng, 10, Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
  CHECK_THROWS_AS(frechet_feature_distance(a, b), ParameterError);
  CHECK_THROWS_AS(frechet_feature_distance({}, b), ParameterError);
  const auto c = gaussian_set(rng, 10, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  CHECK_THROWS_AS(frechet_feature_distance(b, c), ShapeError);
}

TEST_CASE("alignment score") {
  ClassifierModel clf;
  Rng rng(5);
  clf.initialize(rng);
  std::vector<Canvas> xs;
  for (int i = 0; i < 6; ++i) xs.push_back(render_glyph(ImageCategory::circle, rng));
  const Alignment a = alignment_score(clf, xs, 0);
  CHECK(a.n == 6);
  CHECK(a.mean > 0.0);
  CHECK(a.mean < 1.0);
  CHECK(a.lo() <= a.mean);
  CHECK(a.half_width >= 0.0);
  const Alignment same = alignment_score(clf, {xs[0], xs[0]}, 0);
  CHECK(same.half_width == 0.0);
  CHECK_THROWS_AS(alignment_score(clf, {xs[0]}, 0), ParameterError);
  CHECK_THROWS_AS(alignment_score(clf, xs, 5), ParameterError);
  CHECK(classifier_features(clf, xs).size() == 6);
}

TEST_CASE("matched pairs cover every audio category once") {
  const auto pairs = matched_pairs();
  REQUIRE(pairs.size() == kNumCategories);
  std::vector<int> seen_a(kNumCategories), seen_v(kNumCategories);
  for (const auto& p : pairs) {
    ++seen_a[std::size_t(p.audio)];
    ++seen_v[std::size_t(p.image)];
  }
  for (int k = 0; k < kNumCategories; ++k) {
    CHECK(seen_a[std::size_t(k)] == 1);
    CHECK(seen_v[std::size_t(k)] == 1);
  }
}

TEST_CASE("ablation sweep") {
  CHECK(parse_axis("guidance") == AblationAxis::guidance);
  CHECK(parse_axis("warm-start") == AblationAxis::warm_start);
  CHECK_THROWS_AS(parse_axis("steps"), ParameterError);

  CompositionConfig base;
  base.steps = 3;
  const auto g = default_cells(AblationAxis::guidance, base);
  const auto w = default_cells(AblationAxis::warm_start, base);
  REQUIRE(g.size() == 3);
  REQUIRE(w.size() == 4);
  CHECK(g[1].label == "7.5");
  CHECK(w[2].config.t_v == 0.9);

  const Shape sh{1, 16, 16};
  const GmmPredictor p(sh, GaussianMixture::single(Eigen::VectorXd::Zero(sh.size()), 0.1),
                       default_schedule());
  ClassifierModel clf;
  Rng init(6);
  clf.initialize(init);
  const EvalModels models{p, p, clf, clf};
  const Rng rng(7);
  const auto rows = ablation_sweep(g, 4, models, matched_pairs(), default_schedule(), rng, sh);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].image.n == 4);
  const Table t = ablation_table(AblationAxis::guidance, rows);
  CHECK(t.rows.size() == 3);
  CHECK(t.header[0] == "gamma");
  CHECK_THROWS_AS(ablation_sweep(g, 0, models, matched_pairs(), default_schedule(), rng, sh),
                  ParameterError);

  // Same config in two cells gives identical rows.
  const auto twice = ablation_sweep({g[0], g[0]}, 3, models, matched_pairs(), default_schedule(), rng, sh);
  CHECK(twice[0].image.mean == twice[1].image.mean);
}
