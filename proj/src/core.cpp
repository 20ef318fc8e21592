#include "imsound/core.hpp"

#include <cmath>
#include <numbers>

namespace imsound {

std::string to_string(const Shape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a) + " vs " +
                     to_string(b));
  }
}

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
  if (alpha_bar_.size() < 2) throw ParameterError("schedule needs at least one step");
  if (alpha_bar_[0] != 1.0) throw ParameterError("alpha_bar[0] must be 1");
  for (std::size_t t = 1; t < alpha_bar_.size(); ++t) {
    if (!(alpha_bar_[t] > 0.0 && alpha_bar_[t] < alpha_bar_[t - 1])) {
      throw ParameterError("alpha_bar must be strictly decreasing and positive at t=" +
                           std::to_string(t));
    }
  }
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps()) {
    throw ParameterError("timestep " + std::to_string(t) + " outside [0, " +
                         std::to_string(steps()) + "]");
  }
  return alpha_bar_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > steps()) throw ParameterError("beta defined for 1 <= t <= T");
  return 1.0 - alpha_bar_[std::size_t(t)] / alpha_bar_[std::size_t(t) - 1];
}

NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw ParameterError("schedule length must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ParameterError("need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> ab(std::size_t(T) + 1);
  ab[0] = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double frac = T == 1 ? 0.0 : double(t - 1) / double(T - 1);
    const double beta = beta_start + (beta_end - beta_start) * frac;
    ab[std::size_t(t)] = ab[std::size_t(t) - 1] * (1.0 - beta);
  }
  return NoiseSchedule(std::move(ab));
}

NoiseSchedule default_schedule() { return make_linear_schedule(1000, 1e-4, 0.02); }

std::vector<int> inference_timesteps(int T, int steps) {
  if (steps < 1 || steps > T) {
    throw ParameterError("inference steps must lie in [1, T], got " + std::to_string(steps));
  }
  std::vector<int> ts(std::size_t(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    ts[std::size_t(steps - i)] = int((std::int64_t(i) * T) / steps);
  }
  return ts;  // ts[0] = T ... ts[steps] = 0
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
}

double Rng::uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw ParameterError("uniform_int: empty range");
  const std::uint64_t span = std::uint64_t(std::int64_t(hi) - lo) + 1;
  return lo + int(next_u64() % span);
}

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::derive(std::uint64_t stream) const {
  return Rng(mix64(seed_ ^ mix64(stream + 0x632BE59BD9B4E019ULL)));
}

Canvas grayscale(const Canvas& c) {
  Canvas g(Shape{1, c.height(), c.width()});
  const Eigen::Index plane = Eigen::Index(c.height()) * c.width();
  for (int ch = 0; ch < c.channels(); ++ch) {
    g.values() += c.values().segment(ch * plane, plane);
  }
  g.values() /= double(c.channels());
  return g;
}

}  // namespace imsound
