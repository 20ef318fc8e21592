// imsound command-line interface.

#include "imsound/baselines.hpp"
#include "imsound/datagen.hpp"
#include "imsound/denoiser.hpp"
#include "imsound/eval.hpp"
#include "imsound/io.hpp"
#include "imsound/oracles.hpp"
#include "imsound/sampler.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace imsound;

namespace {

constexpr const char* kToolVersion = "1";
constexpr std::uint64_t kVocoderStream = 0x766f636f646572;  // "vocoder"

// Config values set on the command line; they take precedence over the file.
using Overrides = std::map<std::string, std::string>;

void add_override(CLI::App* app, Overrides& ov, const std::string& flag, const std::string& key,
                  const std::string& help) {
  app->add_option_function<std::string>(flag, [&ov, key](const std::string& v) { ov[key] = v; }, help);
}

bool is_manifest_key(const std::string& k) {
  return k.rfind("run.", 0) == 0 || k.rfind("input.", 0) == 0 || k.rfind("output.", 0) == 0;
}

// Reads a key=value file (a previous manifest is accepted), rejects unknown
// keys and applies command-line overrides.
KeyValues load_config(const std::string& path, const Overrides& ov, const std::vector<std::string>& known) {
  KeyValues kv = path.empty() ? KeyValues{} : KeyValues::load(path);
  for (const auto& [k, v] : ov) kv.set(k, v);
  for (const auto& k : kv.unknown_keys(known)) {
    if (!is_manifest_key(k)) throw ParameterError("unknown config key '" + k + "' in " + path);
  }
  return kv;
}

int get_int(const KeyValues& kv, const std::string& key, int fallback) {
  return int(kv.get_int(key, fallback));
}

void record_input(KeyValues& manifest, const KeyValues& cfg, const std::string& name,
                  const std::string& path) {
  const std::string digest = hex64(fnv1a64(read_bytes(path)));
  const std::string key = "input." + name + ".fnv1a64";
  if (cfg.has(key) && cfg.get(key) != digest) {
    throw ParameterError(name + " digest " + digest + " does not match the manifest (" + cfg.get(key) + ")");
  }
  manifest.set("input." + name, path);
  manifest.set(key, digest);
}

void record_output(KeyValues& manifest, const fs::path& path) {
  manifest.set("output." + path.filename().string() + ".fnv1a64", hex64(fnv1a64(read_bytes(path))));
}

KeyValues manifest_for(const std::string& command, const KeyValues& cfg) {
  KeyValues m;
  for (const auto& [k, v] : cfg.entries()) {
    if (!is_manifest_key(k)) m.set(k, v);
  }
  m.set("run.command", command);
  m.set("run.tool_version", std::string(kToolVersion));
  return m;
}

std::unique_ptr<NoisePredictor> load_predictor(const std::string& path, const std::string& precision) {
  DenoiserModel m = load_denoiser(path);
  if (precision == "double") return std::make_unique<DenoiserPredictor<double>>(std::move(m));
  if (precision == "float") return std::make_unique<DenoiserPredictor<float>>(m.cast<float>());
  throw ParameterError("precision must be 'double' or 'float', got '" + precision + "'");
}

Waveform vocode(const Canvas& c, int iterations, Rng rng) {
  const AudioPipelineSpec spec;
  return griffin_lim(logmel_to_linear(c, spec), spec, rng, iterations).raw;
}

CompositionConfig composition_config(const KeyValues& kv) {
  CompositionConfig c;
  c.gamma_a = kv.get_double("gamma_a", c.gamma_a);
  c.gamma_v = kv.get_double("gamma_v", c.gamma_v);
  c.t_a = kv.get_double("t_a", c.t_a);
  c.t_v = kv.get_double("t_v", c.t_v);
  c.steps = get_int(kv, "steps", c.steps);
  c.sigma = kv.get_double("sigma", c.sigma);
  c.seed = kv.get_u64("seed", c.seed);
  c.validate();
  return c;
}

void put_composition(KeyValues& m, const CompositionConfig& c) {
  m.set("gamma_a", c.gamma_a);
  m.set("gamma_v", c.gamma_v);
  m.set("t_a", c.t_a);
  m.set("t_v", c.t_v);
  m.set("steps", c.steps);
  m.set("sigma", c.sigma);
  m.set("seed", c.seed);
}

const std::vector<std::string> kCompositionKeys = {
    "audio_category", "image_category", "gamma_a", "gamma_v", "t_a", "t_v", "steps", "sigma",
    "seed", "precision", "griffin_lim_iters"};

std::vector<std::string> with(std::vector<std::string> keys, std::initializer_list<std::string> more) {
  keys.insert(keys.end(), more);
  return keys;
}

// Loads every canvas listed in DIR/index.txt, or else every .pgm/.ppm below DIR.
std::vector<Canvas> load_canvases(const fs::path& dir) {
  std::vector<Canvas> out;
  if (fs::exists(dir / "index.txt")) {
    for (auto& it : load_dataset(dir)) out.push_back(std::move(it.canvas));
    return out;
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out.push_back(read_pnm(f));
  if (out.empty()) throw ParameterError("no PGM/PPM canvases under " + dir.string());
  return out;
}

Canvas to_gray(const Canvas& c) { return c.channels() == 1 ? c : grayscale(c); }

// ---------------------------------------------------------------------------
// Subcommands

struct GenData {
  std::string modality, out;
  int n = 1000;
  std::uint64_t seed = 0;
};

int run_gen_data(const GenData& o) {
  const Modality m = parse_modality(o.modality);
  const auto items = make_dataset(m, o.n, Rng(o.seed));
  export_dataset(o.out, m, items);
  KeyValues man;
  man.set("run.command", std::string("gen-data"));
  man.set("run.tool_version", std::string(kToolVersion));
  man.set("modality", std::string(name(m)));
  man.set("n", o.n);
  man.set("seed", o.seed);
  record_output(man, fs::path(o.out) / "index.txt");
  write_text(fs::path(o.out) / "manifest.txt", man.serialize());
  std::cout << "wrote " << items.size() << " " << name(m) << " items to " << o.out << "\n";
  return 0;
}

struct Train {
  std::string modality, data, config, out;
  Overrides ov;
};

int run_train(const Train& o) {
  const KeyValues kv = load_config(o.config, o.ov, {"steps", "batch", "learning_rate", "dropout", "seed",
                                                    "precision", "width", "embed_dim", "mlp_hidden", "log_every"});
  Modality declared{};
  const auto data = load_dataset(o.data, &declared);
  if (!o.modality.empty() && parse_modality(o.modality) != declared) {
    throw ParameterError("dataset modality is " + std::string(name(declared)) + ", not " + o.modality);
  }
  TrainConfig tc;
  tc.steps = get_int(kv, "steps", tc.steps);
  tc.batch = get_int(kv, "batch", tc.batch);
  tc.adam.learning_rate = kv.get_double("learning_rate", tc.adam.learning_rate);
  tc.dropout = kv.get_double("dropout", tc.dropout);
  tc.seed = kv.get_u64("seed", 0);
  const std::string precision = kv.get_or("precision", "double");
  if (precision != "double" && precision != "float") throw ParameterError("precision must be double or float");
  tc.single_precision = precision == "float";
  DenoiserConfig mc;
  mc.width = get_int(kv, "width", mc.width);
  mc.embed_dim = get_int(kv, "embed_dim", mc.embed_dim);
  mc.mlp_hidden = get_int(kv, "mlp_hidden", mc.mlp_hidden);
  const int log_every = get_int(kv, "log_every", 1000);

  std::vector<double> seen;
  Rng rng(tc.seed);
  const TrainResult res = train_denoiser(data, tc, default_schedule(), rng, mc, [&](int step, double loss) {
    seen.push_back(loss);
    if (log_every > 0 && (step + 1) % log_every == 0) {
      std::cout << "step " << step + 1 << " smoothed_loss " << format_double(smoothed_loss(seen, step)) << "\n"
                << std::flush;
    }
  });
  save_checkpoint(o.out, res.model);
  std::string trace;
  for (std::size_t i = 0; i < res.loss.size(); ++i) trace += std::to_string(i) + " " + format_double(res.loss[i]) + "\n";
  const fs::path loss_path = o.out + ".loss.txt";
  write_text(loss_path, trace);

  KeyValues man = manifest_for("train", kv);
  man.set("modality", std::string(name(declared)));
  man.set("steps", tc.steps);
  man.set("batch", tc.batch);
  man.set("learning_rate", tc.adam.learning_rate);
  man.set("dropout", tc.dropout);
  man.set("seed", tc.seed);
  man.set("precision", precision);
  man.set("input.data", o.data);
  man.set("input.data.index.fnv1a64", hex64(fnv1a64(read_bytes(fs::path(o.data) / "index.txt"))));
  record_output(man, o.out);
  record_output(man, loss_path);
  man.set("run.smoothed_loss_step100", smoothed_loss(res.loss, 100));
  man.set("run.smoothed_loss_final", smoothed_loss(res.loss, tc.steps - 1));
  write_text(o.out + ".manifest.txt", man.serialize());
  std::cout << "saved " << o.out << " (smoothed loss " << format_double(smoothed_loss(res.loss, 100)) << " at step 100, "
            << format_double(smoothed_loss(res.loss, tc.steps - 1)) << " final)\n";
  return 0;
}

struct TrainClassifier {
  std::string modality, data, heldout, out;
  int steps = 2000, batch = 32;
  double superpose = 0.5;
  std::uint64_t seed = 0;
};

int run_train_classifier(const TrainClassifier& o) {
  Modality declared{};
  auto data = load_dataset(o.data, &declared);
  if (!o.modality.empty() && parse_modality(o.modality) != declared) {
    throw ParameterError("dataset modality is " + std::string(name(declared)) + ", not " + o.modality);
  }
  for (auto& it : data) it.canvas = to_gray(it.canvas);
  std::vector<DatasetItem> held;
  if (!o.heldout.empty()) {
    held = load_dataset(o.heldout);
    for (auto& it : held) it.canvas = to_gray(it.canvas);
  } else {
    if (data.size() < 10) throw ParameterError("need at least 10 items to hold out a split");
    const std::size_t keep = data.size() * 4 / 5;
    held.assign(data.begin() + std::ptrdiff_t(keep), data.end());
    data.resize(keep);
  }
  ClassifierTrainConfig cc;
  cc.steps = o.steps;
  cc.batch = o.batch;
  cc.superpose = o.superpose;
  Rng rng(o.seed);
  const auto res = train_classifier(data, cc, rng, &held);
  save_checkpoint(o.out, res.model);
  KeyValues man;
  man.set("run.command", std::string("train-classifier"));
  man.set("run.tool_version", std::string(kToolVersion));
  man.set("modality", std::string(name(declared)));
  man.set("steps", o.steps);
  man.set("batch", o.batch);
  man.set("superpose", o.superpose);
  man.set("seed", o.seed);
  man.set("input.data", o.data);
  if (!o.heldout.empty()) man.set("input.heldout", o.heldout);
  man.set("run.heldout_accuracy", res.accuracy);
  record_output(man, o.out);
  write_text(o.out + ".manifest.txt", man.serialize());
  std::cout << "saved " << o.out << " (held-out accuracy " << format_double(res.accuracy) << ")\n";
  return 0;
}

struct Sample {
  std::string modality, category, ckpt, config, out;
  Overrides ov;
};

int run_sample(const Sample& o) {
  const KeyValues kv = load_config(o.config, o.ov, {"n", "seed", "gamma", "steps", "sigma", "precision",
                                                    "griffin_lim_iters"});
  const Modality m = parse_modality(o.modality);
  const int cat = parse_category(m, o.category);
  const int n = get_int(kv, "n", 1);
  if (n < 1) throw ParameterError("n must be >= 1");
  const std::uint64_t seed = kv.get_u64("seed", 0);
  const double gamma = kv.get_double("gamma", 10.0);
  const int steps = get_int(kv, "steps", 100);
  const double sigma = kv.get_double("sigma", 0.0);
  const int gl_iters = get_int(kv, "griffin_lim_iters", 100);
  const std::string precision = kv.get_or("precision", "double");
  const auto model = load_predictor(o.ckpt, precision);
  const int channels = load_denoiser(o.ckpt).config().channels;

  fs::create_directories(o.out);
  KeyValues man = manifest_for("sample", kv);
  man.set("modality", std::string(name(m)));
  man.set("category", std::string(category_name(m, cat)));
  man.set("n", n);
  man.set("seed", seed);
  man.set("gamma", gamma);
  man.set("steps", steps);
  man.set("sigma", sigma);
  man.set("precision", precision);
  record_input(man, kv, "ckpt", o.ckpt);
  const Rng root(seed);
  const Shape shape{channels, kCanvasShape.height, kCanvasShape.width};
  for (int i = 0; i < n; ++i) {
    Rng r = root.derive(std::uint64_t(i));
    const Canvas c = sample_single(*model, cat, gamma, steps, default_schedule(), r, shape, sigma).canvas;
    char stem[32];
    std::snprintf(stem, sizeof stem, "sample_%04d", i);
    const fs::path img = fs::path(o.out) / (std::string(stem) + (channels == 3 ? ".ppm" : ".pgm"));
    write_pnm(img, c);
    record_output(man, img);
    if (m == Modality::audio) {
      const fs::path wav = fs::path(o.out) / (std::string(stem) + ".wav");
      write_wav(wav, vocode(c, gl_iters, root.derive(kVocoderStream + std::uint64_t(i))));
      record_output(man, wav);
    }
  }
  write_text(fs::path(o.out) / "manifest.txt", man.serialize());
  std::cout << "wrote " << n << " samples to " << o.out << "\n";
  return 0;
}

struct Pair {
  std::string audio_category, image_category, audio_ckpt, image_ckpt, config, out;
  Overrides ov;
};

struct PairSetup {
  KeyValues cfg;
  int cat_a = 0, cat_v = 0;
  std::string precision;
  int gl_iters = 100;
  std::unique_ptr<NoisePredictor> audio, image;
  KeyValues manifest;
};

PairSetup setup_pair(const std::string& command, const Pair& o, const std::vector<std::string>& keys) {
  PairSetup s;
  Overrides ov = o.ov;
  if (!o.audio_category.empty()) ov["audio_category"] = o.audio_category;
  if (!o.image_category.empty()) ov["image_category"] = o.image_category;
  s.cfg = load_config(o.config, ov, keys);
  if (!s.cfg.has("audio_category") || !s.cfg.has("image_category")) {
    throw ParameterError("both audio and image categories are required");
  }
  s.cat_a = parse_category(Modality::audio, s.cfg.get("audio_category"));
  s.cat_v = parse_category(Modality::image, s.cfg.get("image_category"));
  s.precision = s.cfg.get_or("precision", "double");
  s.gl_iters = get_int(s.cfg, "griffin_lim_iters", 100);
  s.audio = load_predictor(o.audio_ckpt, s.precision);
  s.image = load_predictor(o.image_ckpt, s.precision);
  s.manifest = manifest_for(command, s.cfg);
  s.manifest.set("audio_category", std::string(category_name(Modality::audio, s.cat_a)));
  s.manifest.set("image_category", std::string(category_name(Modality::image, s.cat_v)));
  s.manifest.set("precision", s.precision);
  s.manifest.set("griffin_lim_iters", s.gl_iters);
  record_input(s.manifest, s.cfg, "audio_ckpt", o.audio_ckpt);
  record_input(s.manifest, s.cfg, "image_ckpt", o.image_ckpt);
  fs::create_directories(o.out);
  return s;
}

void emit(PairSetup& s, const fs::path& dir, const std::string& stem, const Canvas& c, std::uint64_t seed) {
  const fs::path pgm = dir / (stem + ".pgm");
  const fs::path wav = dir / (stem + ".wav");
  write_pnm(pgm, c);
  write_wav(wav, vocode(c, s.gl_iters, Rng(seed).derive(kVocoderStream)));
  record_output(s.manifest, pgm);
  record_output(s.manifest, wav);
}

int run_compose(const Pair& o) {
  PairSetup s = setup_pair("compose", o, kCompositionKeys);
  const CompositionConfig c = composition_config(s.cfg);
  put_composition(s.manifest, c);
  Rng rng(c.seed);
  const SampleResult r = sample_composed(*s.audio, *s.image, s.cat_a, s.cat_v, c, default_schedule(), rng, kCanvasShape);
  const fs::path dir = o.out;
  emit(s, dir, "composed", r.canvas, c.seed);
  write_text(dir / "diagnostics.txt", diagnostics_text(r.diagnostics));
  record_output(s.manifest, dir / "diagnostics.txt");
  write_text(dir / "manifest.txt", s.manifest.serialize());
  std::cout << "wrote " << (dir / "composed.pgm").string() << " and composed.wav\n";
  return 0;
}

int run_imprint(const Pair& o) {
  PairSetup s = setup_pair("imprint", o, with(kCompositionKeys, {"rho"}));
  const CompositionConfig c = composition_config(s.cfg);
  const double rho = s.cfg.get_double("rho", ImprintConfig{}.rho);
  put_composition(s.manifest, c);
  s.manifest.set("rho", rho);
  Rng rng(c.seed);
  const ImprintResult r = imprint_pipeline(s.cat_a, s.cat_v, rho, *s.audio, *s.image, c, default_schedule(), rng,
                                           kCanvasShape);
  const fs::path dir = o.out;
  emit(s, dir, "imprint", r.canvas, c.seed);
  write_pnm(dir / "spectrogram.pgm", r.spectrogram);
  write_pnm(dir / "image.pgm", r.image);
  record_output(s.manifest, dir / "spectrogram.pgm");
  record_output(s.manifest, dir / "image.pgm");
  write_text(dir / "manifest.txt", s.manifest.serialize());
  std::cout << "wrote " << (dir / "imprint.pgm").string() << " and imprint.wav\n";
  return 0;
}

int run_sds(const Pair& o) {
  PairSetup s = setup_pair("sds", o,
                           {"audio_category", "image_category", "lambda_sds", "steps", "warmup", "guidance_a",
                            "guidance_v", "t_min", "t_max", "learning_rate", "seed", "precision",
                            "griffin_lim_iters"});
  SdsConfig c;
  c.lambda_sds = s.cfg.get_double("lambda_sds", c.lambda_sds);
  c.steps = get_int(s.cfg, "steps", c.steps);
  c.warmup = get_int(s.cfg, "warmup", c.warmup);
  c.guidance_a = s.cfg.get_double("guidance_a", c.guidance_a);
  c.guidance_v = s.cfg.get_double("guidance_v", c.guidance_v);
  c.t_min = s.cfg.get_double("t_min", c.t_min);
  c.t_max = s.cfg.get_double("t_max", c.t_max);
  c.adam.learning_rate = s.cfg.get_double("learning_rate", c.adam.learning_rate);
  c.validate();
  const std::uint64_t seed = s.cfg.get_u64("seed", 0);
  s.manifest.set("lambda_sds", c.lambda_sds);
  s.manifest.set("steps", c.steps);
  s.manifest.set("warmup", c.warmup);
  s.manifest.set("guidance_a", c.guidance_a);
  s.manifest.set("guidance_v", c.guidance_v);
  s.manifest.set("t_min", c.t_min);
  s.manifest.set("t_max", c.t_max);
  s.manifest.set("learning_rate", c.adam.learning_rate);
  s.manifest.set("seed", seed);
  Rng rng(seed);
  const SdsResult r = sds_optimize(s.cat_a, s.cat_v, c, *s.audio, *s.image, default_schedule(), rng, kCanvasShape);
  const fs::path dir = o.out;
  emit(s, dir, "sds", r.canvas, seed);
  write_text(dir / "trace.txt", sds_trace_text(r.trace));
  record_output(s.manifest, dir / "trace.txt");
  write_text(dir / "manifest.txt", s.manifest.serialize());
  std::cout << "wrote " << (dir / "sds.pgm").string() << " and sds.wav\n";
  return 0;
}

struct Colorize {
  std::string gray, ckpt, out, category;
  int steps = 100;
  double gamma = 10.0;
  std::uint64_t seed = 0;
  std::string precision = "double";
};

int run_colorize(const Colorize& o) {
  const Canvas target = read_pnm(o.gray);
  if (target.channels() != 1) throw ShapeError("colorize: --gray must be a single-channel PGM");
  const auto model = load_predictor(o.ckpt, o.precision);
  Category cat;
  if (!o.category.empty()) cat = parse_category(Modality::image, o.category);
  Rng rng(o.seed);
  const Canvas out = colorize(*model, target, o.steps, o.gamma, cat, default_schedule(), rng);
  write_pnm(o.out, out);
  KeyValues man;
  man.set("run.command", std::string("colorize"));
  man.set("run.tool_version", std::string(kToolVersion));
  man.set("category", o.category.empty() ? std::string("none") : std::string(category_name(Modality::image, *cat)));
  man.set("steps", o.steps);
  man.set("gamma", o.gamma);
  man.set("seed", o.seed);
  man.set("precision", o.precision);
  record_input(man, KeyValues{}, "gray", o.gray);
  record_input(man, KeyValues{}, "color_ckpt", o.ckpt);
  record_output(man, o.out);
  write_text(o.out + ".manifest.txt", man.serialize());
  std::cout << "wrote " << o.out << "\n";
  return 0;
}

struct Vocode {
  std::string canvas, out;
  int iterations = 100;
  std::uint64_t seed = 0;
};

int run_vocode(const Vocode& o) {
  const Canvas c = read_pnm(o.canvas);
  const Waveform w = vocode(c, o.iterations, Rng(o.seed).derive(kVocoderStream));
  write_wav(o.out, w);
  KeyValues man;
  man.set("run.command", std::string("vocode"));
  man.set("run.tool_version", std::string(kToolVersion));
  man.set("griffin_lim_iters", o.iterations);
  man.set("seed", o.seed);
  record_input(man, KeyValues{}, "canvas", o.canvas);
  record_output(man, o.out);
  write_text(o.out + ".manifest.txt", man.serialize());
  std::cout << "wrote " << o.out << " (peak " << format_double(w.peak()) << ")\n";
  return 0;
}

int run_cycle_check(const Vocode& o) {
  const Canvas c = read_pnm(o.canvas);
  Rng rng = Rng(o.seed).derive(kVocoderStream);
  const CycleResult r = cycle_check(c, AudioPipelineSpec{}, rng, o.iterations);
  if (!std::isfinite(r.mean_abs_error)) throw NumericError("cycle error is not finite");
  KeyValues report;
  report.set("canvas", o.canvas);
  report.set("griffin_lim_iters", o.iterations);
  report.set("seed", o.seed);
  report.set("mean_abs_error", r.mean_abs_error);
  report.set("waveform_peak", r.waveform.peak());
  std::cout << report.serialize();
  if (!o.out.empty()) {
    write_pnm(o.out, r.reencoded);
    write_text(o.out + ".report.txt", report.serialize());
  }
  return 0;
}

struct Eval {
  std::string ref, gen, classifier, category, csv;
};

int run_eval(const Eval& o) {
  const ClassifierModel clf = load_classifier(o.classifier);
  std::vector<Canvas> ref = load_canvases(o.ref), gen = load_canvases(o.gen);
  for (auto& c : ref) c = to_gray(c);
  for (auto& c : gen) c = to_gray(c);
  Table t;
  t.header = {"metric", "value", "ci95", "n_ref", "n_gen"};
  const std::string nr = std::to_string(ref.size()), ng = std::to_string(gen.size());
  const double fd = frechet_feature_distance(classifier_features(clf, ref), classifier_features(clf, gen));
  t.rows.push_back({"frechet_feature_distance", format_double(fd), "", nr, ng});
  if (!o.category.empty()) {
    const int cat = std::stoi(o.category);
    const Alignment a = alignment_score(clf, gen, cat);
    t.rows.push_back({"alignment_gen", format_double(a.mean), format_double(a.half_width), nr, ng});
    const Alignment b = alignment_score(clf, ref, cat);
    t.rows.push_back({"alignment_ref", format_double(b.mean), format_double(b.half_width), nr, ng});
  }
  std::cout << t.to_text();
  if (!o.csv.empty()) write_text(o.csv, t.to_csv());
  return 0;
}

struct Ablate {
  std::string axis, audio_ckpt, image_ckpt, audio_classifier, image_classifier, config, out;
  Overrides ov;
};

int run_ablate(const Ablate& o) {
  const KeyValues kv = load_config(o.config, o.ov, {"n", "seed", "gamma_a", "gamma_v", "t_a", "t_v", "steps",
                                                    "sigma", "precision"});
  const AblationAxis axis = parse_axis(o.axis);
  const int n = get_int(kv, "n", 32);
  const std::string precision = kv.get_or("precision", "double");
  const auto audio = load_predictor(o.audio_ckpt, precision);
  const auto image = load_predictor(o.image_ckpt, precision);
  const ClassifierModel ac = load_classifier(o.audio_classifier), ic = load_classifier(o.image_classifier);
  const CompositionConfig base = composition_config(kv);
  const EvalModels models{*audio, *image, ac, ic};
  const auto rows = ablation_sweep(default_cells(axis, base), n, models, matched_pairs(), default_schedule(),
                                   Rng(base.seed), kCanvasShape);
  const Table t = ablation_table(axis, rows);
  std::cout << t.to_text();
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    const fs::path dir = o.out;
    write_text(dir / "ablation.txt", t.to_text());
    write_text(dir / "ablation.csv", t.to_csv());
    KeyValues man = manifest_for("ablate", kv);
    man.set("axis", o.axis);
    man.set("n", n);
    man.set("precision", precision);
    put_composition(man, base);
    record_input(man, kv, "audio_ckpt", o.audio_ckpt);
    record_input(man, kv, "image_ckpt", o.image_ckpt);
    record_input(man, kv, "audio_classifier", o.audio_classifier);
    record_input(man, kv, "image_classifier", o.image_classifier);
    record_output(man, dir / "ablation.csv");
    write_text(dir / "manifest.txt", man.serialize());
  }
  return 0;
}

int run_verify_gmm(std::uint64_t seed) {
  bool ok = true;
  for (const auto& c : gmm_oracle_suite(seed)) {
    std::printf("%s %s %s [%.2fs]\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str(), c.seconds);
    ok = ok && c.pass;
  }
  return ok ? 0 : 2;
}

void add_pair_options(CLI::App* sub, Pair& p) {
  sub->add_option("--audio-category", p.audio_category, "Sound category name or id");
  sub->add_option("--image-category", p.image_category, "Glyph category name or id");
  sub->add_option("--audio-ckpt", p.audio_ckpt, "Audio denoiser checkpoint")->required()->check(CLI::ExistingFile);
  sub->add_option("--image-ckpt", p.image_ckpt, "Image denoiser checkpoint")->required()->check(CLI::ExistingFile);
  sub->add_option("--config", p.config, "key=value config file (a previous manifest works)")
      ->check(CLI::ExistingFile);
  sub->add_option("--out", p.out, "Output directory")->required();
  add_override(sub, p.ov, "--seed", "seed", "Sampler seed");
  add_override(sub, p.ov, "--precision", "precision", "Inference precision: double or float");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"imsound: images that sound, at toy scale"};
  app.require_subcommand(1);

  GenData gd;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--modality", gd.modality, "image, audio or color")->required();
  gen->add_option("--n", gd.n, "Item count");
  gen->add_option("--seed", gd.seed, "Seed");
  gen->add_option("--out", gd.out, "Output directory")->required();

  Train tr;
  auto* train = app.add_subcommand("train", "Train a denoiser");
  train->add_option("--modality", tr.modality, "Expected dataset modality");
  train->add_option("--data", tr.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--config", tr.config, "key=value config file")->check(CLI::ExistingFile);
  train->add_option("--out", tr.out, "Checkpoint path")->required();
  add_override(train, tr.ov, "--steps", "steps", "Optimizer steps");
  add_override(train, tr.ov, "--batch", "batch", "Batch size");
  add_override(train, tr.ov, "--seed", "seed", "Seed");
  add_override(train, tr.ov, "--precision", "precision", "Training precision: double or float");

  TrainClassifier tc;
  auto* tcl = app.add_subcommand("train-classifier", "Train a category classifier");
  tcl->add_option("--modality", tc.modality, "Expected dataset modality");
  tcl->add_option("--data", tc.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tcl->add_option("--heldout", tc.heldout, "Held-out dataset (default: last fifth of --data)")
      ->check(CLI::ExistingDirectory);
  tcl->add_option("--out", tc.out, "Checkpoint path")->required();
  tcl->add_option("--steps", tc.steps, "Optimizer steps");
  tcl->add_option("--batch", tc.batch, "Batch size");
  tcl->add_option("--superpose", tc.superpose, "Probability of training on the max of two same-class items");
  tcl->add_option("--seed", tc.seed, "Seed");

  Sample sa;
  auto* sample = app.add_subcommand("sample", "Sample one modality");
  sample->add_option("--modality", sa.modality, "image, audio or color")->required();
  sample->add_option("--category", sa.category, "Category name or id")->required();
  sample->add_option("--ckpt", sa.ckpt, "Denoiser checkpoint")->required()->check(CLI::ExistingFile);
  sample->add_option("--config", sa.config, "key=value config file")->check(CLI::ExistingFile);
  sample->add_option("--out", sa.out, "Output directory")->required();
  add_override(sample, sa.ov, "--n", "n", "Sample count");
  add_override(sample, sa.ov, "--seed", "seed", "Seed");
  add_override(sample, sa.ov, "--gamma", "gamma", "Guidance scale");
  add_override(sample, sa.ov, "--steps", "steps", "DDIM steps");
  add_override(sample, sa.ov, "--precision", "precision", "Inference precision: double or float");

  Pair co, im, sd;
  auto* compose = app.add_subcommand("compose", "Sample a canvas that is both a glyph and a spectrogram");
  add_pair_options(compose, co);
  add_override(compose, co.ov, "--gamma-a", "gamma_a", "Audio guidance scale");
  add_override(compose, co.ov, "--gamma-v", "gamma_v", "Image guidance scale");
  add_override(compose, co.ov, "--t-a", "t_a", "Audio warm-start fraction");
  add_override(compose, co.ov, "--t-v", "t_v", "Image warm-start fraction");
  add_override(compose, co.ov, "--steps", "steps", "DDIM steps");
  auto* imprint_cmd = app.add_subcommand("imprint", "Imprint baseline");
  add_pair_options(imprint_cmd, im);
  add_override(imprint_cmd, im.ov, "--rho", "rho", "Imprint strength in [0,1]");
  auto* sds = app.add_subcommand("sds", "Score-distillation baseline");
  add_pair_options(sds, sd);
  add_override(sds, sd.ov, "--steps", "steps", "Optimizer steps");
  add_override(sds, sd.ov, "--lambda-sds", "lambda_sds", "Weight of the image term");

  Colorize cz;
  auto* color = app.add_subcommand("colorize", "Colorize a grayscale canvas");
  color->add_option("--gray", cz.gray, "Grayscale PGM target")->required()->check(CLI::ExistingFile);
  color->add_option("--color-ckpt", cz.ckpt, "3-channel denoiser checkpoint")->required()->check(CLI::ExistingFile);
  color->add_option("--out", cz.out, "Output PPM")->required();
  color->add_option("--category", cz.category, "Glyph category name or id (default: unconditional)");
  color->add_option("--steps", cz.steps, "DDIM steps");
  color->add_option("--gamma", cz.gamma, "Guidance scale");
  color->add_option("--seed", cz.seed, "Seed");
  color->add_option("--precision", cz.precision, "Inference precision: double or float");

  Vocode vo, cc;
  auto* voc = app.add_subcommand("vocode", "Spectrogram canvas to WAV by Griffin-Lim");
  voc->add_option("--canvas", vo.canvas, "Spectrogram PGM")->required()->check(CLI::ExistingFile);
  voc->add_option("--out", vo.out, "Output WAV")->required();
  voc->add_option("--iterations", vo.iterations, "Griffin-Lim iterations");
  voc->add_option("--seed", vo.seed, "Phase initialization seed");
  auto* cyc = app.add_subcommand("cycle-check", "Vocode, re-encode and report the canvas error");
  cyc->add_option("--canvas", cc.canvas, "Spectrogram PGM")->required()->check(CLI::ExistingFile);
  cyc->add_option("--out", cc.out, "Optional re-encoded PGM (plus .report.txt)");
  cyc->add_option("--iterations", cc.iterations, "Griffin-Lim iterations");
  cyc->add_option("--seed", cc.seed, "Phase initialization seed");

  Eval ev;
  auto* eval = app.add_subcommand("eval", "Classifier-feature metrics between two canvas sets");
  eval->add_option("--ref", ev.ref, "Reference directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--gen", ev.gen, "Generated directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--classifier", ev.classifier, "Classifier checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--category", ev.category, "Target class id for alignment scores");
  eval->add_option("--csv", ev.csv, "Also write the table as CSV");

  Ablate ab;
  auto* abl = app.add_subcommand("ablate", "Guidance or warm-start ablation table");
  abl->add_option("--axis", ab.axis, "guidance or warm_start")->required();
  abl->add_option("--audio-ckpt", ab.audio_ckpt, "Audio denoiser")->required()->check(CLI::ExistingFile);
  abl->add_option("--image-ckpt", ab.image_ckpt, "Image denoiser")->required()->check(CLI::ExistingFile);
  abl->add_option("--audio-classifier", ab.audio_classifier, "Audio classifier")->required()->check(CLI::ExistingFile);
  abl->add_option("--image-classifier", ab.image_classifier, "Image classifier")->required()->check(CLI::ExistingFile);
  abl->add_option("--config", ab.config, "key=value config file")->check(CLI::ExistingFile);
  abl->add_option("--out", ab.out, "Output directory for ablation.txt/.csv");
  add_override(abl, ab.ov, "--n", "n", "Samples per cell");
  add_override(abl, ab.ov, "--seed", "seed", "Seed");
  add_override(abl, ab.ov, "--precision", "precision", "Inference precision: double or float");

  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify-gmm", "Run the analytic oracle suite");
  verify->add_option("--seed", verify_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "imsound: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*gen) return run_gen_data(gd);
    if (*train) return run_train(tr);
    if (*tcl) return run_train_classifier(tc);
    if (*sample) return run_sample(sa);
    if (*compose) return run_compose(co);
    if (*imprint_cmd) return run_imprint(im);
    if (*sds) return run_sds(sd);
    if (*color) return run_colorize(cz);
    if (*voc) return run_vocode(vo);
    if (*cyc) return run_cycle_check(cc);
    if (*eval) return run_eval(ev);
    if (*abl) return run_ablate(ab);
    if (*verify) return run_verify_gmm(verify_seed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "imsound: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "imsound: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
