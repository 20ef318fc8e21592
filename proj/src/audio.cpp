#include "imsound/audio.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace imsound {
namespace {

long reflect_index(long j, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  j %= period;
  if (j < 0) j += period;
  return j >= n ? period - j : j;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) { fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum); }

  void forward(const std::vector<double>& in, std::vector<std::complex<double>>& out) {
    fft_.fwd(out, in);
  }
  void inverse(const std::vector<std::complex<double>>& in, std::vector<double>& out) {
    fft_.inv(out, in, n_);
  }

 private:
  int n_;
  Eigen::FFT<double> fft_;
};

void put_u16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(static_cast<unsigned char>(v & 0xFF));
  b.push_back(static_cast<unsigned char>(v >> 8));
}
void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}
std::uint32_t get_u32(const std::vector<unsigned char>& b, std::size_t at) {
  return std::uint32_t(b[at]) | std::uint32_t(b[at + 1]) << 8 | std::uint32_t(b[at + 2]) << 16 |
         std::uint32_t(b[at + 3]) << 24;
}
std::uint16_t get_u16(const std::vector<unsigned char>& b, std::size_t at) {
  return std::uint16_t(b[at] | b[at + 1] << 8);
}

}  // namespace

void AudioPipelineSpec::validate() const {
  if (n_fft < 2 || (n_fft & (n_fft - 1)) != 0) throw ParameterError("n_fft must be a power of two");
  if (hop < 1 || hop > n_fft) throw ParameterError("hop must lie in [1, n_fft]");
  if (n_mels < 1 || n_mels > bins()) throw ParameterError("n_mels must lie in [1, n_fft/2+1]");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0)) {
    throw ParameterError("need 0 <= f_min < f_max <= sample_rate/2");
  }
  if (!(log_floor > 0.0 && log_floor < log_ceiling)) throw ParameterError("bad log range");
}

Eigen::VectorXd hann_window(int n) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

ComplexMatrix stft(const Waveform& w, const AudioPipelineSpec& spec) {
  spec.validate();
  const long len = long(w.samples.size());
  if (len == 0) throw ParameterError("stft: empty waveform");
  const int n = spec.n_fft;
  const long pad = n / 2;
  const long frames = (len + spec.hop - 1) / spec.hop;
  const Eigen::VectorXd win = hann_window(n);
  const double norm = 1.0 / win.sum();

  RealFft fft(n);
  std::vector<double> buf(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> spec_buf;
  ComplexMatrix out(spec.bins(), frames);
  for (long f = 0; f < frames; ++f) {
    const long start = f * spec.hop - pad;
    for (int i = 0; i < n; ++i) buf[std::size_t(i)] = win[i] * w.samples[reflect_index(start + i, len)];
    fft.forward(buf, spec_buf);
    for (int k = 0; k < spec.bins(); ++k) out(k, f) = spec_buf[std::size_t(k)] * norm;
  }
  return out;
}

Waveform istft(const ComplexMatrix& spectrum, const AudioPipelineSpec& spec, long length) {
  spec.validate();
  if (spectrum.rows() != spec.bins()) throw ShapeError("istft: bin count mismatch");
  const int n = spec.n_fft;
  const long pad = n / 2;
  const long frames = spectrum.cols();
  if (length < 0) length = frames * spec.hop;
  const Eigen::VectorXd win = hann_window(n);
  const double scale = win.sum();

  const long total = (frames - 1) * spec.hop + n;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(std::max(total, length + pad));
  Eigen::VectorXd wsq = Eigen::VectorXd::Zero(acc.size());

  RealFft fft(n);
  std::vector<std::complex<double>> in(std::size_t(spec.bins()));
  std::vector<double> frame;
  for (long f = 0; f < frames; ++f) {
    for (int k = 0; k < spec.bins(); ++k) in[std::size_t(k)] = spectrum(k, f) * scale;
    fft.inverse(in, frame);
    const long start = f * spec.hop;
    for (int i = 0; i < n; ++i) {
      acc[start + i] += win[i] * frame[std::size_t(i)];
      wsq[start + i] += win[i] * win[i];
    }
  }

  Waveform out;
  out.sample_rate = spec.sample_rate;
  out.samples = Eigen::VectorXd::Zero(length);
  for (long i = 0; i < length; ++i) {
    const long j = i + pad;
    if (j < acc.size() && wsq[j] > 1e-10) out.samples[i] = acc[j] / wsq[j];
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::MatrixXd mel_filterbank(const AudioPipelineSpec& spec) {
  spec.validate();
  const int bins = spec.bins();
  const double mel_lo = hz_to_mel(spec.f_min);
  const double mel_hi = hz_to_mel(spec.f_max);
  std::vector<double> edges(std::size_t(spec.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * double(i) / double(spec.n_mels + 1));
  }
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(spec.n_mels, bins);
  for (int m = 0; m < spec.n_mels; ++m) {
    const double lo = edges[std::size_t(m)];
    const double c = edges[std::size_t(m) + 1];
    const double hi = edges[std::size_t(m) + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = double(k) * spec.sample_rate / spec.n_fft;
      double v = 0.0;
      if (f > lo && f <= c) {
        v = (f - lo) / (c - lo);
      } else if (f > c && f < hi) {
        v = (hi - f) / (hi - c);
      }
      fb(m, k) = v;
    }
    const double peak = fb.row(m).maxCoeff();
    if (peak > 0.0) fb.row(m) /= peak;
  }
  return fb;
}

Eigen::MatrixXd mel_power(const Waveform& w, const AudioPipelineSpec& spec) {
  const ComplexMatrix s = stft(w, spec);
  return mel_filterbank(spec) * s.cwiseAbs2();
}

Canvas mel_power_to_canvas(const Eigen::MatrixXd& mel_pow, const AudioPipelineSpec& spec) {
  if (mel_pow.rows() != spec.n_mels) throw ShapeError("mel power has wrong band count");
  const double lo = std::log(spec.log_floor);
  const double range = std::log(spec.log_ceiling) - lo;
  Canvas c(Shape{1, spec.n_mels, int(mel_pow.cols())});
  for (int m = 0; m < spec.n_mels; ++m) {
    for (Eigen::Index f = 0; f < mel_pow.cols(); ++f) {
      const double v = (std::log(std::max(mel_pow(m, f), spec.log_floor)) - lo) / range;
      c(0, spec.n_mels - 1 - m, int(f)) = std::clamp(v, 0.0, 1.0);
    }
  }
  return c;
}

Eigen::MatrixXd canvas_to_mel_power(const Canvas& c, const AudioPipelineSpec& spec) {
  if (c.channels() != 1 || c.height() != spec.n_mels) {
    throw ShapeError("spectrogram canvas must be 1 x n_mels x frames, got " + to_string(c.shape()));
  }
  if (!c.all_finite()) throw NumericError("spectrogram canvas has non-finite values");
  const double lo = std::log(spec.log_floor);
  const double range = std::log(spec.log_ceiling) - lo;
  Eigen::MatrixXd p(spec.n_mels, c.width());
  for (int m = 0; m < spec.n_mels; ++m) {
    for (int f = 0; f < c.width(); ++f) {
      const double v = std::clamp(c(0, spec.n_mels - 1 - m, f), 0.0, 1.0);
      p(m, f) = v <= 0.0 ? 0.0 : std::max(std::exp(lo + v * range) - spec.log_floor, 0.0);
    }
  }
  return p;
}

Canvas wave_to_logmel(const Waveform& w, const AudioPipelineSpec& spec) {
  return mel_power_to_canvas(mel_power(w, spec), spec);
}

Canvas fit_frames(const Canvas& c, int frames) {
  Canvas out(Shape{c.channels(), c.height(), frames});
  const int keep = std::min(frames, c.width());
  for (int ch = 0; ch < c.channels(); ++ch) {
    out.plane(ch).leftCols(keep) = c.plane(ch).leftCols(keep);
  }
  return out;
}

Eigen::MatrixXd mel_to_linear_power(const Eigen::MatrixXd& mel_pow, const AudioPipelineSpec& spec,
                                    double ridge, int iterations) {
  const Eigen::MatrixXd fb = mel_filterbank(spec);
  if (mel_pow.rows() != fb.rows()) throw ShapeError("mel power has wrong band count");
  if (iterations < 0) throw ParameterError("mel inversion: iterations must be >= 0");
  Eigen::MatrixXd gram = fb * fb.transpose();
  gram.diagonal().array() += ridge;
  const Eigen::LDLT<Eigen::MatrixXd> solver(gram);
  Eigen::MatrixXd p = (fb.transpose() * solver.solve(mel_pow)).cwiseMax(0.0);
  for (int i = 0; i < iterations; ++i) {
    p = (p + fb.transpose() * solver.solve(mel_pow - fb * p)).cwiseMax(0.0);
  }
  return p;
}

LinearSpectrogram logmel_to_linear(const Canvas& c, const AudioPipelineSpec& spec) {
  return {mel_to_linear_power(canvas_to_mel_power(c, spec), spec).cwiseSqrt()};
}

Waveform peak_normalize(const Waveform& w, double peak) {
  Waveform out = w;
  const double p = w.peak();
  if (p > 0.0) out.samples *= peak / p;
  return out;
}

GriffinLimResult griffin_lim(const LinearSpectrogram& mag, const AudioPipelineSpec& spec, Rng& rng,
                             int n_iter) {
  if (mag.bins() != spec.bins()) throw ShapeError("griffin_lim: bin count mismatch");
  if (n_iter < 1) throw ParameterError("griffin_lim: n_iter must be >= 1");
  if ((mag.magnitudes.array() < 0.0).any() || !mag.magnitudes.allFinite()) {
    throw ParameterError("griffin_lim: magnitudes must be finite and nonnegative");
  }
  GriffinLimResult res;
  const double target_norm = mag.magnitudes.norm();
  // Ends at the last frame center.
  const long length = (long(mag.frames()) - 1) * spec.hop + 1;
  if (target_norm == 0.0) {
    res.raw.sample_rate = res.waveform.sample_rate = spec.sample_rate;
    res.raw.samples = res.waveform.samples = Eigen::VectorXd::Zero(length);
    res.convergence.assign(std::size_t(n_iter), 0.0);
    return res;
  }

  ComplexMatrix x(mag.bins(), mag.frames());
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    for (Eigen::Index k = 0; k < x.rows(); ++k) {
      x(k, f) = std::polar(mag.magnitudes(k, f), 2.0 * std::numbers::pi * rng.uniform());
    }
  }
  const auto project_magnitude = [&](const ComplexMatrix& s) {
    ComplexMatrix out(s.rows(), s.cols());
    for (Eigen::Index f = 0; f < s.cols(); ++f) {
      for (Eigen::Index k = 0; k < s.rows(); ++k) {
        const double a = std::abs(s(k, f));
        out(k, f) = a > 0.0 ? s(k, f) * (mag.magnitudes(k, f) / a)
                            : std::complex<double>(mag.magnitudes(k, f), 0.0);
      }
    }
    return out;
  };
  const auto consistent = [&](const ComplexMatrix& c) { return stft(istft(c, spec, length), spec); };
  const auto error = [&](const ComplexMatrix& s) { return (mag.magnitudes - s.cwiseAbs()).norm() / target_norm; };

  // Momentum steps with a restart to the plain projection whenever the error would rise.
  constexpr double kMomentum = 0.99;
  ComplexMatrix s = consistent(x);
  ComplexMatrix s_prev;
  double err = error(s);
  res.convergence.push_back(err);
  for (int it = 1; it < n_iter; ++it) {
    ComplexMatrix next;
    double next_err = 0.0;
    if (s_prev.size() != 0) {
      next = consistent(project_magnitude(s + kMomentum * (s - s_prev)));
      next_err = error(next);
    }
    if (s_prev.size() == 0 || next_err > err) {
      next = consistent(project_magnitude(s));
      next_err = error(next);
    }
    s_prev = std::move(s);
    s = std::move(next);
    err = next_err;
    res.convergence.push_back(err);
  }
  const Waveform signal = istft(project_magnitude(s), spec, length);
  res.raw = signal;
  if (res.raw.peak() > 1.0) res.raw = peak_normalize(res.raw, 1.0);
  res.waveform = peak_normalize(signal, 0.9);
  return res;
}

CycleResult cycle_check(const Canvas& c, const AudioPipelineSpec& spec, Rng& rng, int n_iter) {
  const LinearSpectrogram mag = logmel_to_linear(c, spec);
  GriffinLimResult gl = griffin_lim(mag, spec, rng, n_iter);
  CycleResult out;
  out.reencoded = fit_frames(wave_to_logmel(gl.raw, spec), c.width());
  out.mean_abs_error = (out.reencoded.values() - c.values()).cwiseAbs().mean();
  out.waveform = std::move(gl.raw);
  return out;
}

std::vector<unsigned char> encode_wav(const Waveform& w) {
  const auto n = std::uint32_t(w.samples.size());
  std::vector<unsigned char> b;
  b.reserve(44 + 2 * std::size_t(n));
  const char* riff = "RIFF";
  b.insert(b.end(), riff, riff + 4);
  put_u32(b, 36 + 2 * n);
  const char* wave_fmt = "WAVEfmt ";
  b.insert(b.end(), wave_fmt, wave_fmt + 8);
  put_u32(b, 16);
  put_u16(b, 1);  // PCM
  put_u16(b, 1);  // mono
  put_u32(b, std::uint32_t(w.sample_rate));
  put_u32(b, std::uint32_t(w.sample_rate) * 2);
  put_u16(b, 2);
  put_u16(b, 16);
  const char* data = "data";
  b.insert(b.end(), data, data + 4);
  put_u32(b, 2 * n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double s = std::clamp(w.samples[i], -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(s * 32767.0));
    put_u16(b, static_cast<std::uint16_t>(q));
  }
  return b;
}

Waveform decode_wav(const std::vector<unsigned char>& b) {
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
      std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file");
  }
  std::size_t at = 12;
  bool have_fmt = false;
  Waveform w;
  while (at + 8 <= b.size()) {
    const std::uint32_t size = get_u32(b, at + 4);
    const std::size_t body = at + 8;
    if (body + size > b.size()) throw FormatError("truncated WAV chunk");
    if (std::memcmp(b.data() + at, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError("short fmt chunk");
      if (get_u16(b, body) != 1) throw FormatError("WAV is not PCM");
      if (get_u16(b, body + 2) != 1) throw FormatError("WAV is not mono");
      if (get_u16(b, body + 14) != 16) throw FormatError("WAV is not 16-bit");
      w.sample_rate = int(get_u32(b, body + 4));
      have_fmt = true;
    } else if (std::memcmp(b.data() + at, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("WAV data chunk before fmt chunk");
      const std::size_t n = size / 2;
      w.samples.resize(Eigen::Index(n));
      for (std::size_t i = 0; i < n; ++i) {
        w.samples[Eigen::Index(i)] =
            std::max(-1.0, double(static_cast<std::int16_t>(get_u16(b, body + 2 * i))) / 32767.0);
      }
      return w;
    }
    at = body + size + (size & 1);
  }
  throw FormatError("WAV has no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  const auto bytes = encode_wav(w);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

}  // namespace imsound
