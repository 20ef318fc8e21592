#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace imsound {

// Error taxonomy. The CLI maps ParameterError/ShapeError raised while
// validating user input to exit code 1 and everything else to exit code 2.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Shape {
  int channels = 1;
  int height = 1;
  int width = 1;

  Eigen::Index size() const {
    return Eigen::Index(channels) * height * width;
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Dense channels x height x width grid stored row-major (channel, row,
/// column). Holds clean canvases in [0,1] as well as unbounded diffusion
/// states in model space.
template <typename Scalar>
class CanvasT {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  CanvasT() = default;

  explicit CanvasT(Shape shape) : shape_(shape), values_(Vector::Zero(shape.size())) {
    check_shape(shape);
  }

  CanvasT(Shape shape, Vector values) : shape_(shape), values_(std::move(values)) {
    check_shape(shape);
    if (values_.size() != shape.size()) {
      throw ShapeError("canvas data length " + std::to_string(values_.size()) +
                       " does not match shape " + to_string(shape));
    }
  }

  static CanvasT constant(Shape shape, Scalar v) {
    return CanvasT(shape, Vector::Constant(shape.size(), v));
  }

  const Shape& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  Eigen::Index size() const { return values_.size(); }

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }

  Scalar& operator()(int c, int y, int x) { return values_[index(c, y, x)]; }
  Scalar operator()(int c, int y, int x) const { return values_[index(c, y, x)]; }

  // One channel as a height x width row-major map.
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  plane(int c) {
    return {values_.data() + Eigen::Index(c) * shape_.height * shape_.width, shape_.height,
            shape_.width};
  }
  Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  plane(int c) const {
    return {values_.data() + Eigen::Index(c) * shape_.height * shape_.width, shape_.height,
            shape_.width};
  }

  template <typename Other>
  CanvasT<Other> cast() const {
    return CanvasT<Other>(shape_, values_.template cast<Other>());
  }

  bool all_finite() const { return values_.allFinite(); }

 private:
  static void check_shape(const Shape& s) {
    if (s.channels <= 0 || s.height <= 0 || s.width <= 0) {
      throw ShapeError("canvas dimensions must be positive, got " + to_string(s));
    }
  }
  Eigen::Index index(int c, int y, int x) const {
    return (Eigen::Index(c) * shape_.height + y) * shape_.width + x;
  }

  Shape shape_{};
  Vector values_;
};

using Canvas = CanvasT<double>;

void require_same_shape(const Shape& a, const Shape& b, const char* what);

/// Cumulative signal coefficients alpha_bar[0..T] with alpha_bar[0] = 1.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> alpha_bar);

  int steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
  double alpha_bar(int t) const;
  double beta(int t) const;
  const std::vector<double>& alpha_bars() const { return alpha_bar_; }

 private:
  std::vector<double> alpha_bar_;
};

NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end);

/// Training-schedule defaults: T = 1000, beta from 1e-4 to 0.02.
NoiseSchedule default_schedule();

/// Uniformly strided inference timesteps, descending from T. Each entry is
/// followed by its predecessor; the last step goes to 0.
std::vector<int> inference_timesteps(int T, int steps);

/// Counter-based generator. Output i is SplitMix64's finalizer applied to
/// seed + (i + 1) * 0x9E3779B97F4A7C15, so draws depend only on the seed and
/// the number of preceding draws. Uniform doubles use the top 53 bits;
/// normals use the Box-Muller cosine branch with one fresh pair per draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi);  // inclusive bounds
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  /// Independent stream for a sub-task, keyed by `stream`.
  Rng derive(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);

template <typename Scalar>
CanvasT<Scalar> gaussian_canvas(Rng& rng, Shape shape) {
  CanvasT<Scalar> out(shape);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.values()[i] = Scalar(rng.normal());
  return out;
}

inline Canvas gaussian_canvas(Rng& rng, Shape shape) { return gaussian_canvas<double>(rng, shape); }

/// sqrt(alpha_bar[t]) * x0 + sqrt(1 - alpha_bar[t]) * eps. t = 0 is allowed
/// and returns x0.
template <typename Scalar>
CanvasT<Scalar> forward_diffuse(const CanvasT<Scalar>& x0, int t, const CanvasT<Scalar>& eps,
                                const NoiseSchedule& schedule) {
  require_same_shape(x0.shape(), eps.shape(), "forward_diffuse");
  const double ab = schedule.alpha_bar(t);
  const Scalar a = Scalar(std::sqrt(ab));
  const Scalar b = Scalar(std::sqrt(1.0 - ab));
  return CanvasT<Scalar>(x0.shape(), a * x0.values() + b * eps.values());
}

// [0,1] canvas space <-> [-1,1] model space.
template <typename Scalar>
CanvasT<Scalar> to_model_space(const CanvasT<Scalar>& c) {
  return CanvasT<Scalar>(c.shape(), (Scalar(2) * c.values().array() - Scalar(1)).matrix());
}

template <typename Scalar>
CanvasT<Scalar> to_canvas_space(const CanvasT<Scalar>& m) {
  return CanvasT<Scalar>(
      m.shape(),
      ((m.values().array() + Scalar(1)) * Scalar(0.5)).max(Scalar(0)).min(Scalar(1)).matrix());
}

/// Per-pixel channel mean as a single-channel canvas.
Canvas grayscale(const Canvas& c);

}  // namespace imsound
