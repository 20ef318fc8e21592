#pragma once

#include "imsound/denoiser.hpp"
#include "imsound/io.hpp"
#include "imsound/sampler.hpp"

#include <string>
#include <vector>

namespace imsound {

/// Mean target-class probability with a normal-approximation 95% interval
/// mean +- 1.96 s / sqrt(n).
struct Alignment {
  double mean = 0.0;
  double half_width = 0.0;
  int n = 0;

  double lo() const { return mean - half_width; }
  double hi() const { return mean + half_width; }
};

Alignment alignment_score(const ClassifierModel& classifier, const std::vector<Canvas>& samples,
                          int target);

/// ||mu1 - mu2||^2 + tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2) with unbiased
/// covariances. Eigenvalues in [-1e-6, 0) are clipped to zero; anything more
/// negative raises NumericError.
double frechet_feature_distance(const std::vector<Eigen::VectorXd>& ref,
                                const std::vector<Eigen::VectorXd>& gen);

std::vector<Eigen::VectorXd> classifier_features(const ClassifierModel& classifier,
                                                 const std::vector<Canvas>& canvases);

/// Audio category paired with an image category for composition runs.
struct CategoryPair {
  int audio = 0;
  int image = 0;
};

/// The pairs used for the composition experiments, one per audio category.
std::vector<CategoryPair> matched_pairs();

struct EvalModels {
  const NoisePredictor& audio;
  const NoisePredictor& image;
  const ClassifierModel& audio_classifier;
  const ClassifierModel& image_classifier;
};

enum class AblationAxis { guidance, warm_start };

AblationAxis parse_axis(const std::string& s);

struct AblationCell {
  std::string label;
  CompositionConfig config;
};

/// guidance: gamma_a = gamma_v in {5, 7.5, 10}.
/// warm_start: (t_v, t_a) in {(1,1), (1,0.9), (0.9,1), (0.8,1)}.
std::vector<AblationCell> default_cells(AblationAxis axis, const CompositionConfig& base = {});

struct AblationRow {
  std::string label;
  Alignment image;
  Alignment audio;
};

/// n composed samples per cell. Sample k uses pairs[k % pairs.size()] and the
/// Rng stream rng.derive(k) in every cell, so cells differ only in config.
std::vector<AblationRow> ablation_sweep(const std::vector<AblationCell>& cells, int n,
                                        const EvalModels& models,
                                        const std::vector<CategoryPair>& pairs,
                                        const NoiseSchedule& schedule, const Rng& rng, Shape shape);

Table ablation_table(AblationAxis axis, const std::vector<AblationRow>& rows);

}  // namespace imsound
