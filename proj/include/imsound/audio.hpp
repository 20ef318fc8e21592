#pragma once

#include "imsound/core.hpp"

#include <complex>
#include <filesystem>
#include <vector>

namespace imsound {

struct Waveform {
  int sample_rate = 16000;
  Eigen::VectorXd samples;

  double duration() const { return double(samples.size()) / sample_rate; }
  double peak() const { return samples.size() ? samples.cwiseAbs().maxCoeff() : 0.0; }
};

/// Parameters binding canvases to waveforms. The log map sends
/// ln(log_floor) to 0 and ln(log_ceiling) to 1, clamped.
struct AudioPipelineSpec {
  int sample_rate = 16000;
  int n_fft = 512;
  int hop = 256;
  int n_mels = 32;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor = 1e-5;
  double log_ceiling = 10.0;
  int frames = 128;  // canvas width used for datasets

  int bins() const { return n_fft / 2 + 1; }
  void validate() const;
};

using ComplexMatrix = Eigen::MatrixXcd;

/// bins x frames magnitudes.
struct LinearSpectrogram {
  Eigen::MatrixXd magnitudes;

  int bins() const { return int(magnitudes.rows()); }
  int frames() const { return int(magnitudes.cols()); }
};

Eigen::VectorXd hann_window(int n);  // periodic

/// Centered STFT with reflect padding; returns bins x ceil(len/hop).
/// Frames are scaled by 1/sum(window), so a sinusoid of amplitude A centred
/// on a bin reads A/2 there.
ComplexMatrix stft(const Waveform& w, const AudioPipelineSpec& spec);

/// Least-squares inverse of stft (weighted overlap-add). Output length is
/// frames * hop unless `length` is given.
Waveform istft(const ComplexMatrix& spectrum, const AudioPipelineSpec& spec, long length = -1);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// n_mels x bins triangular filters, HTK mel scale, each row peak-normalized.
Eigen::MatrixXd mel_filterbank(const AudioPipelineSpec& spec);

/// Power mel spectrogram (n_mels x frames), low mel index = low frequency.
Eigen::MatrixXd mel_power(const Waveform& w, const AudioPipelineSpec& spec);

/// Maps mel power to [0,1] canvas values. Row 0 of the canvas is the highest
/// mel band, so the canvas reads like a conventional spectrogram image.
Canvas mel_power_to_canvas(const Eigen::MatrixXd& mel_pow, const AudioPipelineSpec& spec);
Eigen::MatrixXd canvas_to_mel_power(const Canvas& c, const AudioPipelineSpec& spec);

/// 1 x n_mels x frames canvas. Use fit_frames to trim/pad to spec.frames.
Canvas wave_to_logmel(const Waveform& w, const AudioPipelineSpec& spec);
Canvas fit_frames(const Canvas& c, int frames);

/// Mel power to linear power by ridge least squares on the filterbank
/// (min-norm form), clamped at zero. Each further iteration adds the
/// least-squares correction for the remaining mel residual and clamps again
/// (alternating projection onto the mel constraint and the nonnegative
/// orthant); iterations = 0 is the single clamped solve.
Eigen::MatrixXd mel_to_linear_power(const Eigen::MatrixXd& mel_pow, const AudioPipelineSpec& spec,
                                    double ridge = 1e-8, int iterations = 200);

/// Canvas values at 0 map to exactly zero power (the floor is subtracted
/// before inversion), so silence stays silent through the vocoder.
LinearSpectrogram logmel_to_linear(const Canvas& c, const AudioPipelineSpec& spec);

struct GriffinLimResult {
  Waveform waveform;  // peak-normalized to 0.9 (or all zeros)
  Waveform raw;       // natural level implied by the magnitudes, limited to |x| <= 1
  std::vector<double> convergence;  // spectral convergence per iteration
};

GriffinLimResult griffin_lim(const LinearSpectrogram& mag, const AudioPipelineSpec& spec, Rng& rng,
                             int n_iter = 100);

struct CycleResult {
  Waveform waveform;
  Canvas reencoded;
  double mean_abs_error = 0.0;
};

/// Vocode (mel inversion + Griffin-Lim) then re-encode and compare.
CycleResult cycle_check(const Canvas& c, const AudioPipelineSpec& spec, Rng& rng, int n_iter = 100);

Waveform peak_normalize(const Waveform& w, double peak = 0.9);

/// PCM16 little-endian mono RIFF. Samples are encoded as
/// lround(clamp(s, -1, 1) * 32767) and decoded as q / 32767.
void write_wav(const std::filesystem::path& path, const Waveform& w);
std::vector<unsigned char> encode_wav(const Waveform& w);
Waveform read_wav(const std::filesystem::path& path);
Waveform decode_wav(const std::vector<unsigned char>& bytes);

}  // namespace imsound
