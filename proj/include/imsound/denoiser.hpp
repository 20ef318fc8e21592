#pragma once

#include "imsound/core.hpp"
#include "imsound/datagen.hpp"
#include "imsound/nn.hpp"
#include "imsound/predictor.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

namespace imsound {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DenoiserConfig {
  int channels = 1;     // input and output channels
  int width = 32;       // hidden feature maps
  int embed_dim = 64;   // timestep and category embeddings
  int mlp_hidden = 128;
  int categories = kNumCategories;
  bool linear = false;  // identity instead of SiLU (gradient-check harness only)

  friend bool operator==(const DenoiserConfig&, const DenoiserConfig&) = default;
};

/// Noise predictor: four 3x3 convolutions (channels -> width -> width ->
/// width -> channels). Each hidden map u is modulated as (1 + scale) * u +
/// shift, with per-channel scale and shift produced by a two-layer
/// perceptron from timestep embedding + category embedding, then passed
/// through SiLU. Embedding row `categories` is the null (unconditional) row.
template <typename S>
class DenoiserT {
 public:
  using Vec = nn::Vector<S>;
  using Mat = nn::RowMatrix<S>;

  explicit DenoiserT(DenoiserConfig cfg = {});

  const DenoiserConfig& config() const { return cfg_; }
  const nn::ParameterLayout& layout() const { return layout_; }
  Vec& parameters() { return params_; }
  const Vec& parameters() const { return params_; }

  /// Scaled normal initialization; the output layer starts at 1/10 scale
  /// and the conditioning output layer at zero.
  void initialize(Rng& rng);

  CanvasT<S> predict(const CanvasT<S>& x_t, Category category, int t) const;

  /// Adds d(loss_scale * ||predict(x_t) - target||^2)/d(params) to grad and
  /// returns the unscaled squared error.
  S accumulate_gradient(const CanvasT<S>& x_t, Category category, int t, const CanvasT<S>& target,
                        S loss_scale, Vec& grad) const;

  template <typename T>
  DenoiserT<T> cast() const {
    DenoiserT<T> out(cfg_);
    out.parameters() = params_.template cast<T>();
    return out;
  }

  // Tensor ids, exposed for tests that poke at specific layers.
  struct Ids {
    int conv_w[4];
    int conv_b[4];
    int embed;
    int mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  };
  const Ids& ids() const { return ids_; }

 private:
  struct Cache;
  static Cache& workspace();
  void forward(const CanvasT<S>& x_t, Category category, int t, Cache& cache) const;
  int category_row(Category category) const;

  DenoiserConfig cfg_;
  nn::ParameterLayout layout_;
  Ids ids_{};
  Vec params_;
};

using DenoiserModel = DenoiserT<double>;

struct TrainConfig {
  int steps = 20000;
  int batch = 32;
  nn::AdamConfig adam{};
  double dropout = 0.1;  // probability of training on the null category
  std::uint64_t seed = 0;
  bool single_precision = false;  // 32-bit parameters and gradients

  void validate() const;
};

struct TrainResult {
  DenoiserModel model;
  std::vector<double> loss;  // per step
};

using ProgressFn = std::function<void(int step, double loss)>;

/// Epsilon-objective training with category dropout. Dataset canvases are in
/// [0,1] and are mapped to model space before noising.
TrainResult train_denoiser(const std::vector<DatasetItem>& dataset, const TrainConfig& cfg,
                           const NoiseSchedule& schedule, Rng& rng,
                           DenoiserConfig model_cfg = {}, const ProgressFn& progress = {});

/// Trailing moving average used when comparing losses across training.
double smoothed_loss(const std::vector<double>& loss, int step, int window = 100);

struct GradCheckResult {
  double max_rel_error = 0.0;
  int probes = 0;
};

/// Relative error of analytic vs central-difference parameter gradients of
/// the training loss on a random mini-batch at `probes` random parameters.
GradCheckResult grad_check(const DenoiserModel& model, int probes, Rng& rng,
                           Shape shape = Shape{1, 8, 16}, double h = 1e-4, int batch = 2);

/// |a - n| / max(|a| + |n|, floor).
double gradient_rel_error(double analytic, double numeric, double floor = 1e-6);

/// Adapter exposing a trained denoiser as a NoisePredictor. With S = float
/// inference runs in 32-bit.
template <typename S>
class DenoiserPredictor final : public NoisePredictor {
 public:
  explicit DenoiserPredictor(DenoiserT<S> model) : model_(std::move(model)) {}
  Canvas predict(const Canvas& x_t, Category category, int t) const override {
    if constexpr (std::is_same_v<S, double>) {
      return model_.predict(x_t, category, t);
    } else {
      return model_.predict(x_t.template cast<S>(), category, t).template cast<double>();
    }
  }
  const DenoiserT<S>& model() const { return model_; }

 private:
  DenoiserT<S> model_;
};

struct ClassifierConfig {
  int channels = 1;
  int width1 = 16;
  int width2 = 32;
  int feature_dim = 64;
  int classes = kNumCategories;

  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

/// conv 3x3 stride 2 (channels -> 16), SiLU, conv 3x3 stride 2 (16 -> 32),
/// SiLU, global average pool, dense 32 -> 64 with SiLU (the feature vector),
/// dense 64 -> classes. Inputs are [0,1] canvases.
class ClassifierModel {
 public:
  explicit ClassifierModel(ClassifierConfig cfg = {});

  const ClassifierConfig& config() const { return cfg_; }
  const nn::ParameterLayout& layout() const { return layout_; }
  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

  void initialize(Rng& rng);

  Eigen::VectorXd logits(const Canvas& x) const;
  Eigen::VectorXd probabilities(const Canvas& x) const;
  Eigen::VectorXd features(const Canvas& x) const;
  int predict(const Canvas& x) const;

  /// Adds d(loss_scale * cross_entropy)/d(params) to grad; returns the loss.
  double accumulate_gradient(const Canvas& x, int label, double loss_scale,
                             Eigen::VectorXd& grad) const;

 private:
  struct Cache;
  static Cache& workspace();
  Eigen::VectorXd forward(const Canvas& x, Cache* cache) const;

  ClassifierConfig cfg_;
  nn::ParameterLayout layout_;
  int w1_, b1_, w2_, b2_, w3_, b3_, w4_, b4_;
  Eigen::VectorXd params_;
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

struct ClassifierTrainConfig {
  int steps = 2000;
  int batch = 32;
  nn::AdamConfig adam{};
  double min_accuracy = 0.8;  // below this after the full budget -> TrainingError
  double superpose = 0.5;     // probability of training on the max of two same-class items
};

struct ClassifierTrainResult {
  ClassifierModel model;
  std::vector<double> loss;
  double accuracy = 0.0;  // on the held-out set when given, else on the training set
};

ClassifierTrainResult train_classifier(const std::vector<DatasetItem>& train,
                                       const ClassifierTrainConfig& cfg, Rng& rng,
                                       const std::vector<DatasetItem>* heldout = nullptr,
                                       ClassifierConfig model_cfg = {});

double accuracy(const ClassifierModel& model, const std::vector<DatasetItem>& items);

/// Pooled penultimate activations (dimension 64).
inline Eigen::VectorXd features(const ClassifierModel& c, const Canvas& x) { return c.features(x); }

// Checkpoints. Layout (all integers little-endian):
//   "IMSNDCKP" | u32 version (=1) | u32 kind (1 denoiser, 2 classifier)
//   | u32 hyperparameter count | i32 hyperparameters...
//   | u32 tensor count | per tensor: u32 name length, name bytes, u32 rows,
//     u32 cols, rows*cols IEEE-754 float64 values (row-major)
std::vector<unsigned char> encode_checkpoint(const DenoiserModel& m);
std::vector<unsigned char> encode_checkpoint(const ClassifierModel& m);
DenoiserModel decode_denoiser(const std::vector<unsigned char>& bytes);
ClassifierModel decode_classifier(const std::vector<unsigned char>& bytes);
void save_checkpoint(const std::filesystem::path& path, const DenoiserModel& m);
void save_checkpoint(const std::filesystem::path& path, const ClassifierModel& m);
DenoiserModel load_denoiser(const std::filesystem::path& path);
ClassifierModel load_classifier(const std::filesystem::path& path);

extern template class DenoiserT<double>;
extern template class DenoiserT<float>;

}  // namespace imsound
