#include "imsound/eval.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace imsound {

Alignment alignment_score(const ClassifierModel& classifier, const std::vector<Canvas>& samples,
                          int target) {
  if (samples.size() < 2) throw ParameterError("alignment_score needs at least 2 samples");
  if (target < 0 || target >= classifier.config().classes) {
    throw ParameterError("alignment_score: target class out of range");
  }
  Eigen::VectorXd p(Eigen::Index(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    p[Eigen::Index(i)] = classifier.probabilities(samples[i])[target];
  }
  const double n = double(p.size());
  const double mean = p.mean();
  const double sd = std::sqrt((p.array() - mean).square().sum() / (n - 1.0));
  return {mean, 1.96 * sd / std::sqrt(n), int(p.size())};
}

namespace {

void moments(const std::vector<Eigen::VectorXd>& xs, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
  const Eigen::Index d = xs.front().size();
  Eigen::MatrixXd X(Eigen::Index(xs.size()), d);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].size() != d) throw ShapeError("feature vectors differ in dimension");
    X.row(Eigen::Index(i)) = xs[i].transpose();
  }
  mu = X.colwise().mean().transpose();
  const Eigen::MatrixXd C = X.rowwise() - mu.transpose();
  cov = (C.transpose() * C) / double(X.rows() - 1);
}

Eigen::VectorXd cleaned(Eigen::VectorXd ev) {
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-6) throw NumericError("covariance is not positive semidefinite");
    ev[i] = std::max(ev[i], 0.0);
  }
  return ev;
}

}  // namespace

double frechet_feature_distance(const std::vector<Eigen::VectorXd>& ref,
                                const std::vector<Eigen::VectorXd>& gen) {
  if (ref.empty() || gen.empty()) throw ParameterError("frechet distance needs nonempty sets");
  const Eigen::Index d = ref.front().size();
  if (gen.front().size() != d) throw ShapeError("feature dimensions differ");
  if (Eigen::Index(ref.size()) < d + 1 || Eigen::Index(gen.size()) < d + 1) {
    throw ParameterError("frechet distance needs at least dim+1 vectors per set");
  }
  Eigen::VectorXd mu1, mu2;
  Eigen::MatrixXd s1, s2;
  moments(ref, mu1, s1);
  moments(gen, mu2, s2);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(s1);
  const Eigen::MatrixXd root1 = e1.eigenvectors() *
                                cleaned(e1.eigenvalues()).cwiseSqrt().asDiagonal() *
                                e1.eigenvectors().transpose();
  const Eigen::MatrixXd m = root1 * s2 * root1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(0.5 * (m + m.transpose()),
                                                    Eigen::EigenvaluesOnly);
  const double tr_root = cleaned(em.eigenvalues()).cwiseSqrt().sum();
  return (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * tr_root;
}

std::vector<Eigen::VectorXd> classifier_features(const ClassifierModel& classifier,
                                                 const std::vector<Canvas>& canvases) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(canvases.size());
  for (const auto& c : canvases) out.push_back(classifier.features(c));
  return out;
}

std::vector<CategoryPair> matched_pairs() {
  return {
      {int(SoundCategory::harmonic_stack), int(ImageCategory::cross)},
      {int(SoundCategory::up_chirp), int(ImageCategory::circle)},
      {int(SoundCategory::click_train), int(ImageCategory::vertical_bars)},
      {int(SoundCategory::noise_band), int(ImageCategory::checker)},
      {int(SoundCategory::silence), int(ImageCategory::blank_vignette)},
  };
}

AblationAxis parse_axis(const std::string& s) {
  if (s == "guidance") return AblationAxis::guidance;
  if (s == "warm_start" || s == "warm-start") return AblationAxis::warm_start;
  throw ParameterError("unknown ablation axis '" + s + "' (expected guidance or warm_start)");
}

std::vector<AblationCell> default_cells(AblationAxis axis, const CompositionConfig& base) {
  std::vector<AblationCell> cells;
  if (axis == AblationAxis::guidance) {
    for (double g : {5.0, 7.5, 10.0}) {
      CompositionConfig c = base;
      c.gamma_a = c.gamma_v = g;
      cells.push_back({format_double(g), c});
    }
  } else {
    const double grid[4][2] = {{1.0, 1.0}, {1.0, 0.9}, {0.9, 1.0}, {0.8, 1.0}};
    for (const auto& tv_ta : grid) {
      CompositionConfig c = base;
      c.t_v = tv_ta[0];
      c.t_a = tv_ta[1];
      cells.push_back({format_double(c.t_v) + "/" + format_double(c.t_a), c});
    }
  }
  return cells;
}

std::vector<AblationRow> ablation_sweep(const std::vector<AblationCell>& cells, int n,
                                        const EvalModels& models,
                                        const std::vector<CategoryPair>& pairs,
                                        const NoiseSchedule& schedule, const Rng& rng, Shape shape) {
  if (n < 1) throw ParameterError("ablation_sweep: n per cell must be >= 1");
  if (pairs.empty()) throw ParameterError("ablation_sweep: no category pairs");
  std::vector<AblationRow> rows;
  for (const auto& cell : cells) {
    cell.config.validate();
    Eigen::VectorXd p_img(n), p_aud(n);
    for (int k = 0; k < n; ++k) {
      const CategoryPair& pair = pairs[std::size_t(k) % pairs.size()];
      Rng r = rng.derive(std::uint64_t(k));
      const Canvas x = sample_composed(models.audio, models.image, pair.audio, pair.image,
                                       cell.config, schedule, r, shape)
                           .canvas;
      p_img[k] = models.image_classifier.probabilities(x)[pair.image];
      p_aud[k] = models.audio_classifier.probabilities(x)[pair.audio];
    }
    auto summarize = [n](const Eigen::VectorXd& p) {
      const double mean = p.mean();
      const double sd = n > 1 ? std::sqrt((p.array() - mean).square().sum() / (n - 1.0)) : 0.0;
      return Alignment{mean, 1.96 * sd / std::sqrt(double(n)), n};
    };
    rows.push_back({cell.label, summarize(p_img), summarize(p_aud)});
  }
  return rows;
}

Table ablation_table(AblationAxis axis, const std::vector<AblationRow>& rows) {
  Table t;
  t.header = {axis == AblationAxis::guidance ? "gamma" : "t_v/t_a", "image_alignment", "image_ci95",
              "audio_alignment", "audio_ci95", "n"};
  for (const auto& r : rows) {
    t.rows.push_back({r.label, format_double(r.image.mean), format_double(r.image.half_width),
                      format_double(r.audio.mean), format_double(r.audio.half_width),
                      std::to_string(r.image.n)});
  }
  return t;
}

}  // namespace imsound
