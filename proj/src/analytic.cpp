#include "imsound/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace imsound {
namespace {

double log_normal_iso(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, double var) {
  const double d = double(x.size());
  return -0.5 * (x - mean).squaredNorm() / var - 0.5 * d * std::log(2.0 * std::numbers::pi * var);
}

// Responsibilities of each component for x, computed in log space.
Eigen::VectorXd responsibilities(const GaussianMixture& gmm, const Eigen::VectorXd& x) {
  const auto& comps = gmm.components();
  Eigen::VectorXd logw(Eigen::Index(comps.size()));
  for (std::size_t k = 0; k < comps.size(); ++k) {
    logw[Eigen::Index(k)] = comps[k].weight > 0.0
                                ? std::log(comps[k].weight) +
                                      log_normal_iso(x, comps[k].mean, comps[k].variance)
                                : -std::numeric_limits<double>::infinity();
  }
  const double m = logw.maxCoeff();
  Eigen::VectorXd r = (logw.array() - m).exp();
  return r / r.sum();
}

}  // namespace

GaussianMixture::GaussianMixture(int dim, std::vector<GaussianComponent> components)
    : dim_(dim), components_(std::move(components)) {
  if (dim_ < 1) throw ParameterError("mixture dimension must be positive");
  if (components_.empty()) throw ParameterError("mixture needs at least one component");
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.mean.size() != dim_) throw ShapeError("component mean has wrong dimension");
    if (!(c.variance > 0.0)) throw ParameterError("component variance must be positive");
    if (!(c.weight >= 0.0)) throw ParameterError("component weight must be nonnegative");
    total += c.weight;
  }
  if (!(total > 0.0)) throw ParameterError("mixture weights sum to zero");
  for (auto& c : components_) c.weight /= total;
}

GaussianMixture GaussianMixture::single(Eigen::VectorXd mean, double variance) {
  const int dim = int(mean.size());
  return GaussianMixture(dim, {GaussianComponent{1.0, std::move(mean), variance}});
}

double GaussianMixture::log_density(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) throw ShapeError("log_density: dimension mismatch");
  double m = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(components_.size());
  for (const auto& c : components_) {
    if (c.weight <= 0.0) continue;
    terms.push_back(std::log(c.weight) + log_normal_iso(x, c.mean, c.variance));
    m = std::max(m, terms.back());
  }
  double s = 0.0;
  for (double v : terms) s += std::exp(v - m);
  return m + std::log(s);
}

GaussianMixture GaussianMixture::noised(double alpha_bar) const {
  std::vector<GaussianComponent> out;
  out.reserve(components_.size());
  const double a = std::sqrt(alpha_bar);
  for (const auto& c : components_) {
    out.push_back({c.weight, a * c.mean, alpha_bar * c.variance + (1.0 - alpha_bar)});
  }
  return GaussianMixture(dim_, std::move(out));
}

Eigen::VectorXd GaussianMixture::mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dim_);
  for (const auto& c : components_) m += c.weight * c.mean;
  return m;
}

Eigen::VectorXd GaussianMixture::marginal_variance() const {
  const Eigen::VectorXd mu = mean();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  for (const auto& c : components_) {
    v += c.weight * ((c.mean - mu).array().square() + c.variance).matrix();
  }
  return v;
}

Eigen::VectorXd gmm_score(const GaussianMixture& gmm, const Eigen::VectorXd& x) {
  if (x.size() != gmm.dim()) throw ShapeError("gmm_score: dimension mismatch");
  const Eigen::VectorXd r = responsibilities(gmm, x);
  Eigen::VectorXd score = Eigen::VectorXd::Zero(gmm.dim());
  const auto& comps = gmm.components();
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const double rk = r[Eigen::Index(k)];
    if (rk == 0.0) continue;
    score -= rk * (x - comps[k].mean) / comps[k].variance;
  }
  return score;
}

Eigen::VectorXd gmm_noise_predictor(const GaussianMixture& gmm, const Eigen::VectorXd& x_t, int t,
                                    const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.steps()) throw ParameterError("gmm_noise_predictor: t out of range");
  const double ab = schedule.alpha_bar(t);
  return -std::sqrt(1.0 - ab) * gmm_score(gmm.noised(ab), x_t);
}

GaussianMixture gmm_product(const GaussianMixture& a, const GaussianMixture& b) {
  if (a.dim() != b.dim()) throw ShapeError("gmm_product: dimension mismatch");
  const int d = a.dim();
  std::vector<GaussianComponent> comps;
  std::vector<double> logw;
  for (const auto& ca : a.components()) {
    for (const auto& cb : b.components()) {
      const double var = 1.0 / (1.0 / ca.variance + 1.0 / cb.variance);
      Eigen::VectorXd mean = var * (ca.mean / ca.variance + cb.mean / cb.variance);
      // Overlap integral of the two Gaussians: N(mu_a; mu_b, (va + vb) I).
      const double overlap = log_normal_iso(ca.mean, cb.mean, ca.variance + cb.variance);
      logw.push_back(std::log(ca.weight) + std::log(cb.weight) + overlap);
      comps.push_back({0.0, std::move(mean), var});
    }
  }
  const double m = *std::max_element(logw.begin(), logw.end());
  for (std::size_t i = 0; i < comps.size(); ++i) comps[i].weight = std::exp(logw[i] - m);
  return GaussianMixture(d, std::move(comps));
}

LabeledSamples sample_gmm_labeled(const GaussianMixture& gmm, Rng& rng, int n) {
  if (n < 1) throw ParameterError("sample_gmm: n must be >= 1");
  LabeledSamples out;
  out.samples.reserve(std::size_t(n));
  out.components.reserve(std::size_t(n));
  const auto& comps = gmm.components();
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t k = 0;
    for (; k + 1 < comps.size(); ++k) {
      acc += comps[k].weight;
      if (u < acc) break;
    }
    Eigen::VectorXd x(gmm.dim());
    const double sd = std::sqrt(comps[k].variance);
    for (int j = 0; j < gmm.dim(); ++j) x[j] = comps[k].mean[j] + sd * rng.normal();
    out.samples.push_back(std::move(x));
    out.components.push_back(int(k));
  }
  return out;
}

std::vector<Eigen::VectorXd> sample_gmm(const GaussianMixture& gmm, Rng& rng, int n) {
  return sample_gmm_labeled(gmm, rng, n).samples;
}

GmmPredictor::GmmPredictor(Shape shape, GaussianMixture unconditional, NoiseSchedule schedule,
                           std::map<int, GaussianMixture> conditional)
    : shape_(shape),
      unconditional_(std::move(unconditional)),
      schedule_(std::move(schedule)),
      conditional_(std::move(conditional)) {
  if (unconditional_.dim() != shape_.size()) throw ShapeError("GmmPredictor: dim/shape mismatch");
  for (const auto& [k, g] : conditional_) {
    if (g.dim() != shape_.size()) throw ShapeError("GmmPredictor: dim/shape mismatch");
  }
}

const GaussianMixture& GmmPredictor::mixture(Category category) const {
  if (category) {
    auto it = conditional_.find(*category);
    if (it != conditional_.end()) return it->second;
  }
  return unconditional_;
}

Canvas GmmPredictor::predict(const Canvas& x_t, Category category, int t) const {
  require_same_shape(x_t.shape(), shape_, "GmmPredictor::predict");
  return Canvas(shape_, gmm_noise_predictor(mixture(category), x_t.values(), t, schedule_));
}

}  // namespace imsound
