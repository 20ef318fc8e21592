#pragma once

#include "imsound/core.hpp"
#include "imsound/predictor.hpp"

#include <map>
#include <vector>

namespace imsound {

struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  double variance = 1.0;  // isotropic
};

/// Isotropic Gaussian mixture. Weights are renormalized on construction and
/// must be nonnegative with a positive sum.
class GaussianMixture {
 public:
  GaussianMixture(int dim, std::vector<GaussianComponent> components);

  static GaussianMixture single(Eigen::VectorXd mean, double variance);

  int dim() const { return dim_; }
  const std::vector<GaussianComponent>& components() const { return components_; }

  double log_density(const Eigen::VectorXd& x) const;
  double density(const Eigen::VectorXd& x) const { return std::exp(log_density(x)); }

  /// The mixture of x_t = sqrt(ab) x_0 + sqrt(1 - ab) eps.
  GaussianMixture noised(double alpha_bar) const;

  Eigen::VectorXd mean() const;
  /// Per-coordinate variance (the covariance is diagonal for isotropic parts).
  Eigen::VectorXd marginal_variance() const;

 private:
  int dim_;
  std::vector<GaussianComponent> components_;
};

/// Exact epsilon prediction -sqrt(1 - ab_t) * grad log p_t(x_t).
Eigen::VectorXd gmm_noise_predictor(const GaussianMixture& gmm, const Eigen::VectorXd& x_t, int t,
                                    const NoiseSchedule& schedule);

/// Score of the mixture itself (no noising).
Eigen::VectorXd gmm_score(const GaussianMixture& gmm, const Eigen::VectorXd& x);

/// Exact normalized product density of two isotropic mixtures.
GaussianMixture gmm_product(const GaussianMixture& a, const GaussianMixture& b);

std::vector<Eigen::VectorXd> sample_gmm(const GaussianMixture& gmm, Rng& rng, int n);

/// Index of the component each sample was drawn from, alongside the samples.
struct LabeledSamples {
  std::vector<Eigen::VectorXd> samples;
  std::vector<int> components;
};
LabeledSamples sample_gmm_labeled(const GaussianMixture& gmm, Rng& rng, int n);

/// NoisePredictor over canvases of a fixed shape whose flattened values follow
/// a per-category mixture. The unconditional mixture answers for nullopt and
/// for categories without their own entry.
class GmmPredictor final : public NoisePredictor {
 public:
  GmmPredictor(Shape shape, GaussianMixture unconditional, NoiseSchedule schedule,
               std::map<int, GaussianMixture> conditional = {});

  Canvas predict(const Canvas& x_t, Category category, int t) const override;

  const Shape& shape() const { return shape_; }
  const GaussianMixture& mixture(Category category) const;

 private:
  Shape shape_;
  GaussianMixture unconditional_;
  NoiseSchedule schedule_;
  std::map<int, GaussianMixture> conditional_;
};

}  // namespace imsound
