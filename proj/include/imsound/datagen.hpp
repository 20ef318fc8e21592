#pragma once

#include "imsound/audio.hpp"
#include "imsound/core.hpp"

#include <array>
#include <filesystem>
#include <string_view>
#include <vector>

namespace imsound {

/// color: 3-channel tinted glyphs with the image categories.
enum class Modality { image, audio, color };

enum class ImageCategory { circle = 0, vertical_bars, cross, checker, blank_vignette };
enum class SoundCategory { harmonic_stack = 0, up_chirp, click_train, noise_band, silence };

inline constexpr int kNumCategories = 5;
inline constexpr Shape kCanvasShape{1, 32, 128};

std::string_view name(Modality m);
std::string_view name(ImageCategory c);
std::string_view name(SoundCategory c);
Modality parse_modality(std::string_view s);
/// Accepts a category name or its numeric id.
int parse_category(Modality m, std::string_view s);
std::string_view category_name(Modality m, int id);
ImageCategory image_category(int id);
SoundCategory sound_category(int id);

/// Glyph on a dark background, anti-aliased by distance-based coverage.
///   circle          1-3 ring outlines, radius 7-13 px, stroke 2-4 px
///   vertical_bars   2-5 bars, 3-7 px wide, vertical margins 0-5 px
///   cross           1-3 plus signs, arms 8-14 px, arm width 3-6 px
///   checker         full-canvas checkerboard, cells 4-8 px
///   blank_vignette  soft radial glow, peak 0.05-0.15
/// Stroke intensities are drawn from [0.75, 1].
Canvas render_glyph(ImageCategory category, Rng& rng, Shape shape = kCanvasShape);

/// 3-channel glyph tinted with a random color; the training set for the
/// colorization model.
Canvas render_colored_glyph(ImageCategory category, Rng& rng, Shape gray_shape = kCanvasShape);

/// Parameters drawn by synth_sound, logged for tests and manifests.
struct SoundParams {
  double f0 = 0.0;
  double f_lo = 0.0;
  double f_hi = 0.0;
  double rate = 0.0;
  double decay = 0.0;
  std::vector<double> onsets;  // seconds
};

Waveform harmonic_stack(double f0, double duration, int sample_rate = 16000, int harmonics = 6);
Waveform up_chirp(double f_lo, double f_hi, double duration, int sample_rate = 16000);
Waveform click_train(double rate, double decay, double duration, Rng& rng, int sample_rate = 16000,
                     std::vector<double>* onsets = nullptr);
Waveform noise_band(double f_lo, double f_hi, double duration, Rng& rng, int sample_rate = 16000);
Waveform dithered_silence(double duration, Rng& rng, int sample_rate = 16000);

/// Draws category parameters from the documented ranges:
///   harmonic_stack  f0 in [100, 400] Hz, 6 harmonics at 1/k
///   up_chirp        linear sweep from [100, 800] Hz to [2000, 4000] Hz
///   click_train     rate in [2, 6] Hz, noise bursts with 8-20 ms decay
///   noise_band      white noise restricted to [f, 2f], f in [150, 3500] Hz
///   silence         uniform dither at -60 dBFS, not normalized
/// Everything except silence is peak-normalized to 0.9.
Waveform synth_sound(SoundCategory category, Rng& rng, double duration,
                     SoundParams* params = nullptr, int sample_rate = 16000);

/// Clip length whose log-mel canvas has exactly spec.frames frames.
double dataset_duration(const AudioPipelineSpec& spec);

struct DatasetItem {
  Canvas canvas;
  int category = 0;
  Waveform waveform;  // audio items only
};

/// Item i has category i mod 5 and its own derived Rng stream.
std::vector<DatasetItem> make_dataset(Modality modality, int n, const Rng& rng,
                                      const AudioPipelineSpec& spec = {});

/// Writes items/NNNNN.pgm (.ppm for 3 channels, + .wav for audio) and
/// index.txt with lines
/// "<relative path> <modality> <category id>".
void export_dataset(const std::filesystem::path& dir, Modality modality,
                    const std::vector<DatasetItem>& items);

/// Loads the canvases listed in index.txt (PGM and PPM entries).
std::vector<DatasetItem> load_dataset(const std::filesystem::path& dir, Modality* modality = nullptr);

}  // namespace imsound
