#pragma once

// Minimal building blocks for the convolutional models: a flat parameter
// store, im2col convolutions over channel-major feature maps, SiLU and Adam.

#include "imsound/core.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace imsound::nn {

template <typename S>
using RowMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MatrixMap = Eigen::Map<RowMatrix<S>>;
template <typename S>
using ConstMatrixMap = Eigen::Map<const RowMatrix<S>>;

struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  Eigen::Index offset = 0;

  Eigen::Index size() const { return Eigen::Index(rows) * cols; }
};

/// Named row-major tensors packed into one flat vector, so optimizers,
/// checkpoints and gradient checks can treat the model as a single vector.
class ParameterLayout {
 public:
  int add(std::string name, int rows, int cols) {
    tensors_.push_back({std::move(name), rows, cols, total_});
    total_ += tensors_.back().size();
    return int(tensors_.size()) - 1;
  }

  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& operator[](int id) const { return tensors_[std::size_t(id)]; }
  Eigen::Index total() const { return total_; }

  template <typename S>
  MatrixMap<S> map(Vector<S>& flat, int id) const {
    const auto& t = tensors_[std::size_t(id)];
    return {flat.data() + t.offset, t.rows, t.cols};
  }
  template <typename S>
  ConstMatrixMap<S> map(const Vector<S>& flat, int id) const {
    const auto& t = tensors_[std::size_t(id)];
    return {flat.data() + t.offset, t.rows, t.cols};
  }

 private:
  std::vector<TensorInfo> tensors_;
  Eigen::Index total_ = 0;
};

inline int conv_out(int n, int stride) { return (n - 1) / stride + 1; }

/// 3x3 patches with zero padding 1. x is C x (H*W); cols is (C*9) x (Ho*Wo).
template <typename S>
void im2col(const RowMatrix<S>& x, int H, int W, int stride, RowMatrix<S>& cols) {
  const int C = int(x.rows());
  const int Ho = conv_out(H, stride), Wo = conv_out(W, stride);
  cols.resize(Eigen::Index(C) * 9, Eigen::Index(Ho) * Wo);
  for (int c = 0; c < C; ++c) {
    const S* src = x.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        S* dst = cols.row((c * 3 + ky) * 3 + kx).data();
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride + ky - 1;
          S* out = dst + Eigen::Index(oy) * Wo;
          if (iy < 0 || iy >= H) {
            std::fill(out, out + Wo, S(0));
            continue;
          }
          const S* in = src + Eigen::Index(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride + kx - 1;
            out[ox] = (ix >= 0 && ix < W) ? in[ix] : S(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters patch gradients back onto the input grid.
template <typename S>
void col2im(const RowMatrix<S>& cols, int C, int H, int W, int stride, RowMatrix<S>& dx) {
  const int Ho = conv_out(H, stride), Wo = conv_out(W, stride);
  dx.setZero(C, Eigen::Index(H) * W);
  for (int c = 0; c < C; ++c) {
    S* dst = dx.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const S* src = cols.row((c * 3 + ky) * 3 + kx).data();
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= H) continue;
          const S* in = src + Eigen::Index(oy) * Wo;
          S* out = dst + Eigen::Index(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride + kx - 1;
            if (ix >= 0 && ix < W) out[ix] += in[ox];
          }
        }
      }
    }
  }
}

template <typename S>
S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

template <typename Derived>
auto silu(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x * (S(1) + (-x).exp()).inverse();
}

/// d silu / dx = sigma(x) (1 + x (1 - sigma(x))).
template <typename Derived>
auto silu_grad(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  const auto sig = (S(1) + (-x).exp()).inverse();
  return sig * (S(1) + x * (S(1) - sig));
}

/// Sinusoidal embedding of a timestep: [sin(t f_i), cos(t f_i)], with
/// f_i = 10000^(-i / (dim/2)).
template <typename S>
Vector<S> timestep_embedding(int t, int dim) {
  const int half = dim / 2;
  Vector<S> e(dim);
  for (int i = 0; i < half; ++i) {
    const double f = std::exp(-std::log(10000.0) * double(i) / double(half));
    e[i] = S(std::sin(t * f));
    e[half + i] = S(std::cos(t * f));
  }
  return e;
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename S>
class Adam {
 public:
  Adam(Eigen::Index n, AdamConfig cfg) : cfg_(cfg), m_(Vector<S>::Zero(n)), v_(Vector<S>::Zero(n)) {}

  void step(Vector<S>& params, const Vector<S>& grad) {
    ++t_;
    const S b1 = S(cfg_.beta1), b2 = S(cfg_.beta2);
    m_ = b1 * m_ + (S(1) - b1) * grad;
    v_ = b2 * v_ + (S(1) - b2) * grad.cwiseAbs2();
    const S c1 = S(1) - S(std::pow(cfg_.beta1, double(t_)));
    const S c2 = S(1) - S(std::pow(cfg_.beta2, double(t_)));
    params.array() -= S(cfg_.learning_rate) * (m_.array() / c1) /
                      ((v_.array() / c2).sqrt() + S(cfg_.epsilon));
  }

  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  Vector<S> m_, v_;
  long t_ = 0;
};

}  // namespace imsound::nn
