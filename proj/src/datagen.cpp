#include "imsound/datagen.hpp"

#include "imsound/io.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace imsound {
namespace {

constexpr std::array<std::string_view, 5> kImageNames = {"circle", "vertical-bars", "cross",
                                                         "checker", "blank-vignette"};
constexpr std::array<std::string_view, 5> kSoundNames = {"harmonic-stack", "up-chirp",
                                                         "click-train", "noise-band", "silence"};

// Coverage of a pixel whose centre lies `d` px outside (d > 0) or inside a shape edge.
double coverage(double d) { return std::clamp(0.5 - d, 0.0, 1.0); }

void paint(Canvas& c, int y, int x, double v) {
  if (y < 0 || y >= c.height() || x < 0 || x >= c.width()) return;
  c(0, y, x) = std::max(c(0, y, x), v);
}

void draw_ring(Canvas& c, double cy, double cx, double r, double half_width, double intensity) {
  const int y0 = int(std::floor(cy - r - half_width - 1)), y1 = int(std::ceil(cy + r + half_width + 1));
  const int x0 = int(std::floor(cx - r - half_width - 1)), x1 = int(std::ceil(cx + r + half_width + 1));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d = std::abs(std::hypot(y - cy, x - cx) - r) - half_width;
      paint(c, y, x, intensity * coverage(d));
    }
  }
}

// Axis-aligned box given by centre and half extents.
void draw_box(Canvas& c, double cy, double cx, double hy, double hx, double intensity) {
  for (int y = int(std::floor(cy - hy - 1)); y <= int(std::ceil(cy + hy + 1)); ++y) {
    for (int x = int(std::floor(cx - hx - 1)); x <= int(std::ceil(cx + hx + 1)); ++x) {
      const double d = std::max(std::abs(y - cy) - hy, std::abs(x - cx) - hx);
      paint(c, y, x, intensity * coverage(d));
    }
  }
}

}  // namespace

std::string_view name(Modality m) {
  switch (m) {
    case Modality::image: return "image";
    case Modality::audio: return "audio";
    case Modality::color: return "color";
  }
  return "";
}
std::string_view name(ImageCategory c) { return kImageNames[std::size_t(c)]; }
std::string_view name(SoundCategory c) { return kSoundNames[std::size_t(c)]; }

Modality parse_modality(std::string_view s) {
  if (s == "image") return Modality::image;
  if (s == "audio") return Modality::audio;
  if (s == "color") return Modality::color;
  throw ParameterError("unknown modality '" + std::string(s) + "' (expected image, audio or color)");
}

int parse_category(Modality m, std::string_view s) {
  const auto& names = m == Modality::audio ? kSoundNames : kImageNames;
  std::string dashed(s);
  std::replace(dashed.begin(), dashed.end(), '_', '-');
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == dashed) return int(i);
  }
  int id = -1;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
  if (ec == std::errc() && p == s.data() + s.size() && id >= 0 && id < kNumCategories) return id;
  throw ParameterError("unknown " + std::string(name(m)) + " category '" + std::string(s) + "'");
}

std::string_view category_name(Modality m, int id) {
  if (id < 0 || id >= kNumCategories) throw ParameterError("category id out of range");
  return m == Modality::audio ? kSoundNames[std::size_t(id)] : kImageNames[std::size_t(id)];
}

ImageCategory image_category(int id) {
  if (id < 0 || id >= kNumCategories) throw ParameterError("image category id out of range");
  return ImageCategory(id);
}

SoundCategory sound_category(int id) {
  if (id < 0 || id >= kNumCategories) throw ParameterError("sound category id out of range");
  return SoundCategory(id);
}

Canvas render_glyph(ImageCategory category, Rng& rng, Shape shape) {
  if (shape.channels != 1) throw ShapeError("glyphs are single-channel");
  Canvas c(shape);
  const double H = shape.height, W = shape.width;
  switch (category) {
    case ImageCategory::circle: {
      const int count = rng.uniform_int(6, 12);
      for (int i = 0; i < count; ++i) {
        const double r = rng.uniform(2.5, 5.0);
        const double cx = rng.uniform(r + 1.0, W - 2.0 - r);
        const double cy = rng.uniform(r + 1.0, H - 2.0 - r);
        draw_ring(c, cy, cx, r, rng.uniform(0.6, 0.9), rng.uniform(0.75, 1.0));
      }
      break;
    }
    case ImageCategory::vertical_bars: {
      const int count = rng.uniform_int(6, 12);
      const double slot = W / count;
      for (int i = 0; i < count; ++i) {
        const double hx = rng.uniform(0.8, 1.6);
        const double cx = slot * i + rng.uniform(hx + 1.0, slot - hx - 1.0);
        const double top = rng.uniform(0.0, 3.0), bottom = rng.uniform(0.0, 3.0);
        const double hy = (H - 1 - top - bottom) / 2.0;
        draw_box(c, top + hy, cx, hy, hx, rng.uniform(0.75, 1.0));
      }
      break;
    }
    case ImageCategory::cross: {
      const int count = rng.uniform_int(5, 10);
      for (int i = 0; i < count; ++i) {
        const double arm = rng.uniform(4.5, 7.0);
        const double hw = rng.uniform(1.0, 1.6);
        const double cx = rng.uniform(arm + 1.0, W - 2.0 - arm);
        const double cy = rng.uniform(arm + 1.0, H - 2.0 - arm);
        const double v = rng.uniform(0.75, 1.0);
        draw_box(c, cy, cx, hw, arm, v);
        draw_box(c, cy, cx, arm, hw, v);
      }
      break;
    }
    case ImageCategory::checker: {
      const int cell = rng.uniform_int(4, 8);
      const int oy = rng.uniform_int(0, cell - 1), ox = rng.uniform_int(0, cell - 1);
      const double light = rng.uniform(0.75, 1.0), dark = rng.uniform(0.0, 0.15);
      for (int y = 0; y < shape.height; ++y) {
        for (int x = 0; x < shape.width; ++x) {
          c(0, y, x) = (((y + oy) / cell + (x + ox) / cell) % 2) ? light : dark;
        }
      }
      break;
    }
    case ImageCategory::blank_vignette: {
      const double peak = rng.uniform(0.05, 0.15);
      const double cx = rng.uniform(0.3 * W, 0.7 * W), cy = rng.uniform(0.3 * H, 0.7 * H);
      const double sx = rng.uniform(0.2 * W, 0.4 * W), sy = rng.uniform(0.3 * H, 0.6 * H);
      for (int y = 0; y < shape.height; ++y) {
        for (int x = 0; x < shape.width; ++x) {
          const double q = std::pow((x - cx) / sx, 2) + std::pow((y - cy) / sy, 2);
          c(0, y, x) = peak * std::exp(-0.5 * q);
        }
      }
      break;
    }
  }
  return c;
}

Canvas render_colored_glyph(ImageCategory category, Rng& rng, Shape gray_shape) {
  const Canvas g = render_glyph(category, rng, gray_shape);
  Canvas out(Shape{3, gray_shape.height, gray_shape.width});
  std::array<double, 3> fg{}, bg{};
  for (int ch = 0; ch < 3; ++ch) {
    fg[std::size_t(ch)] = rng.uniform(0.3, 1.0);
    bg[std::size_t(ch)] = rng.uniform(0.0, 0.2);
  }
  const Eigen::Index plane = g.size();
  for (int ch = 0; ch < 3; ++ch) {
    out.values().segment(ch * plane, plane) =
        (g.values().array() * fg[std::size_t(ch)] + (1.0 - g.values().array()) * bg[std::size_t(ch)]).matrix();
  }
  return out;
}

Waveform harmonic_stack(double f0, double duration, int sample_rate, int harmonics) {
  const long n = std::lround(duration * sample_rate);
  Waveform w{sample_rate, Eigen::VectorXd::Zero(n)};
  for (long i = 0; i < n; ++i) {
    const double t = double(i) / sample_rate;
    double s = 0.0;
    for (int k = 1; k <= harmonics; ++k) {
      if (k * f0 >= sample_rate / 2.0) break;
      s += std::sin(2.0 * std::numbers::pi * k * f0 * t) / k;
    }
    w.samples[i] = s;
  }
  return peak_normalize(w);
}

Waveform up_chirp(double f_lo, double f_hi, double duration, int sample_rate) {
  const long n = std::lround(duration * sample_rate);
  Waveform w{sample_rate, Eigen::VectorXd::Zero(n)};
  const double sweep = (f_hi - f_lo) / duration;
  for (long i = 0; i < n; ++i) {
    const double t = double(i) / sample_rate;
    w.samples[i] = std::sin(2.0 * std::numbers::pi * (f_lo * t + 0.5 * sweep * t * t));
  }
  return peak_normalize(w);
}

Waveform click_train(double rate, double decay, double duration, Rng& rng, int sample_rate,
                     std::vector<double>* onsets) {
  const long n = std::lround(duration * sample_rate);
  Waveform w{sample_rate, Eigen::VectorXd::Zero(n)};
  const double period = 1.0 / rate;
  const long burst = std::lround(6.0 * decay * sample_rate);
  for (double onset = rng.uniform(0.0, period); onset < duration; onset += period) {
    if (onsets) onsets->push_back(onset);
    const long start = std::lround(onset * sample_rate);
    for (long j = 0; j < burst && start + j < n; ++j) {
      w.samples[start + j] += rng.uniform(-1.0, 1.0) * std::exp(-double(j) / (decay * sample_rate));
    }
  }
  return peak_normalize(w);
}

Waveform noise_band(double f_lo, double f_hi, double duration, Rng& rng, int sample_rate) {
  const long n = std::lround(duration * sample_rate);
  std::vector<double> white(static_cast<std::size_t>(n));
  for (auto& v : white) v = rng.normal();
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, white);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = double(k) * sample_rate / double(n);
    if (f < f_lo || f > f_hi) spec[k] = 0.0;
  }
  std::vector<double> band;
  fft.inv(band, spec, n);
  Waveform w{sample_rate, Eigen::Map<Eigen::VectorXd>(band.data(), n)};
  return peak_normalize(w);
}

Waveform dithered_silence(double duration, Rng& rng, int sample_rate) {
  const long n = std::lround(duration * sample_rate);
  Waveform w{sample_rate, Eigen::VectorXd::Zero(n)};
  for (long i = 0; i < n; ++i) w.samples[i] = rng.uniform(-1e-3, 1e-3);
  return w;
}

Waveform synth_sound(SoundCategory category, Rng& rng, double duration, SoundParams* params,
                     int sample_rate) {
  if (!(duration > 0.0)) throw ParameterError("synth_sound: duration must be positive");
  SoundParams local;
  SoundParams& p = params ? *params : local;
  p = SoundParams{};
  switch (category) {
    case SoundCategory::harmonic_stack:
      p.f0 = rng.uniform(100.0, 400.0);
      return harmonic_stack(p.f0, duration, sample_rate);
    case SoundCategory::up_chirp:
      p.f_lo = rng.uniform(100.0, 800.0);
      p.f_hi = rng.uniform(2000.0, 4000.0);
      return up_chirp(p.f_lo, p.f_hi, duration, sample_rate);
    case SoundCategory::click_train:
      p.rate = rng.uniform(2.0, 6.0);
      p.decay = rng.uniform(0.008, 0.020);
      return click_train(p.rate, p.decay, duration, rng, sample_rate, &p.onsets);
    case SoundCategory::noise_band:
      p.f_lo = rng.uniform(150.0, 3500.0);
      p.f_hi = 2.0 * p.f_lo;
      return noise_band(p.f_lo, p.f_hi, duration, rng, sample_rate);
    case SoundCategory::silence:
      return dithered_silence(duration, rng, sample_rate);
  }
  throw ParameterError("unknown sound category");
}

double dataset_duration(const AudioPipelineSpec& spec) {
  return double(spec.frames) * spec.hop / spec.sample_rate;
}

std::vector<DatasetItem> make_dataset(Modality modality, int n, const Rng& rng,
                                      const AudioPipelineSpec& spec) {
  if (n < 1) throw ParameterError("make_dataset: n must be >= 1");
  std::vector<DatasetItem> items(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng item_rng = rng.derive(std::uint64_t(i));
    DatasetItem& it = items[std::size_t(i)];
    it.category = i % kNumCategories;
    if (modality == Modality::image) {
      it.canvas = render_glyph(ImageCategory(it.category), item_rng,
                               Shape{1, spec.n_mels, spec.frames});
    } else if (modality == Modality::color) {
      it.canvas = render_colored_glyph(ImageCategory(it.category), item_rng,
                                       Shape{1, spec.n_mels, spec.frames});
    } else {
      it.waveform = synth_sound(SoundCategory(it.category), item_rng, dataset_duration(spec),
                                nullptr, spec.sample_rate);
      it.canvas = fit_frames(wave_to_logmel(it.waveform, spec), spec.frames);
    }
  }
  return items;
}

void export_dataset(const std::filesystem::path& dir, Modality modality,
                    const std::vector<DatasetItem>& items) {
  std::filesystem::create_directories(dir / "items");
  std::string index;
  for (std::size_t i = 0; i < items.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "items/%05zu", i);
    const std::string pgm = std::string(stem) + (items[i].canvas.channels() == 3 ? ".ppm" : ".pgm");
    write_pnm(dir / pgm, items[i].canvas);
    index += pgm + " " + std::string(name(modality)) + " " + std::to_string(items[i].category) + "\n";
    if (modality == Modality::audio && items[i].waveform.samples.size() > 0) {
      const std::string wav = std::string(stem) + ".wav";
      write_wav(dir / wav, items[i].waveform);
      index += wav + " " + std::string(name(modality)) + " " + std::to_string(items[i].category) + "\n";
    }
  }
  write_text(dir / "index.txt", index);
}

std::vector<DatasetItem> load_dataset(const std::filesystem::path& dir, Modality* modality) {
  const auto bytes = read_bytes(dir / "index.txt");
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  std::vector<DatasetItem> items;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string path, mod;
    int cat = -1;
    if (!(fields >> path >> mod >> cat) || cat < 0 || cat >= kNumCategories) {
      throw FormatError("index.txt line " + std::to_string(lineno) + " is malformed");
    }
    const Modality m = parse_modality(mod);
    if (modality) *modality = m;
    const std::string ext = path.size() >= 4 ? path.substr(path.size() - 4) : "";
    if (ext != ".pgm" && ext != ".ppm") continue;
    items.push_back(DatasetItem{read_pnm(dir / path), cat, {}});
  }
  if (items.empty()) throw FormatError("dataset at " + dir.string() + " has no canvases");
  return items;
}

}  // namespace imsound
