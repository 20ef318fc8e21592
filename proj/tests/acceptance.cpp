// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance --workdir DIR --cli PATH [--reuse] [--only 1,2,...]
//
// Trained checkpoints are kept in DIR; --reuse loads them instead of
// retraining (criterion 6 then reports the metrics recorded at training time).

#include "imsound/analytic.hpp"
#include "imsound/audio.hpp"
#include "imsound/baselines.hpp"
#include "imsound/datagen.hpp"
#include "imsound/denoiser.hpp"
#include "imsound/eval.hpp"
#include "imsound/io.hpp"
#include "imsound/oracles.hpp"
#include "imsound/sampler.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace imsound;

namespace {

constexpr int kTrainSteps = 20000;
constexpr int kTrainBatch = 6;
constexpr int kTrainItems = 1000;
constexpr int kHeldItems = 250;
constexpr int kComposeSamples = 64;
constexpr int kWarmStartSamples = 40;
constexpr std::uint64_t kSeed = 7;

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Models {
  DenoiserModel image, audio, color;
  ClassifierModel image_clf, audio_clf;
  KeyValues training;  // metrics recorded when the models were trained
};

struct Context {
  fs::path workdir;
  std::string cli;
  bool reuse = false;
  std::optional<Models> models;
  std::vector<Canvas> composed;  // criterion 7 samples, reused by criterion 9
};

// ---------------------------------------------------------------------------

Outcome gmm_composition() {
  Clock clock;
  Rng rng(kSeed);
  const SampleMoments m = gaussian_composition_moments(10000, 100, rng, default_schedule());
  Rng rng2(kSeed);
  const bool bitwise = self_composition_is_exact(rng2, default_schedule());
  const double secs = clock.seconds();
  const bool pass = std::abs(m.mean) <= 0.05 && std::abs(m.variance - 1.0) <= 0.10 && bitwise && secs < 30.0;
  return {pass, "mean=" + fmt(m.mean) + " var=" + fmt(m.variance) + " n=" + std::to_string(m.n) +
                    " self_composition_bitwise=" + (bitwise ? "yes" : "no") + " time=" + fmt(secs) + "s"};
}

Outcome analytic_score() {
  Clock clock;
  Rng rng(kSeed);
  const double err = noise_predictor_fd_error(1000, rng, default_schedule());
  const double secs = clock.seconds();
  return {err < 1e-5 && secs < 10.0, "max_rel_error=" + fmt(err) + " probes=1000 time=" + fmt(secs) + "s"};
}

Outcome identities() {
  Rng rng(kSeed);
  const Shape sh{1, 8, 16};
  const Canvas u = gaussian_canvas(rng, sh), c = gaussian_canvas(rng, sh);
  const bool cfg0 = cfg(u, c, 0.0).values() == u.values();
  const bool cfg1 = cfg(u, c, 1.0).values() == c.values();

  double convex = 0.0;
  for (double la : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const Canvas e = compose_eps(u, c, la, 1.0 - la);
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      convex = std::max(convex, std::abs(e.values()[i] - (la * u.values()[i] + (1.0 - la) * c.values()[i])));
    }
  }

  const CompositionConfig d;
  bool table = true;
  for (int t = 0; t <= 100; ++t) {
    const ModalityWeights w = warm_start_weights(t, 100, d.t_a, d.t_v);
    const double lv = t > 90 ? 0.0 : 0.5;
    const double la = t > 90 ? 1.0 : 0.5;
    table = table && w.lambda_v == lv && w.lambda_a == la;
  }

  Canvas spec(sh), img(sh);
  spec.values() = (gaussian_canvas(rng, sh).values().array().tanh() * 0.5 + 0.5).matrix();
  img.values() = (gaussian_canvas(rng, sh).values().array().tanh() * 0.5 + 0.5).matrix();
  double imp = 0.0;
  for (double rho : {0.0, 0.3, 0.5, 1.0}) {
    const Canvas out = imprint(spec, img, rho);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      const double s = spec.values()[i], g = img.values()[i];
      imp = std::max(imp, std::abs(out.values()[i] - s * (1.0 - rho * (1.0 - g))));
    }
  }
  const bool pass = cfg0 && cfg1 && convex <= 1e-15 && table && imp <= 1e-15;
  return {pass, std::string("cfg_gamma0=") + (cfg0 ? "exact" : "differs") + " cfg_gamma1=" +
                    (cfg1 ? "exact" : "differs") + " compose_eps_err=" + fmt(convex) +
                    " warm_start_table=" + (table ? "exact" : "differs") + " imprint_err=" + fmt(imp)};
}

Outcome ddim_exactness() {
  Rng rng(kSeed);
  const double err = ddim_reconstruction_error(rng, default_schedule());
  return {err < 1e-10, "max_abs_error=" + fmt(err)};
}

Outcome gradient_check() {
  Clock clock;
  Rng rng(kSeed);
  DenoiserModel model;
  model.initialize(rng);
  // Nonzero output layer so every parameter receives gradient.
  for (Eigen::Index i = 0; i < model.parameters().size(); ++i) {
    if (model.parameters()[i] == 0.0) model.parameters()[i] = 0.05 * rng.normal();
  }
  const GradCheckResult r = grad_check(model, 128, rng);
  const double secs = clock.seconds();
  return {r.max_rel_error < 1e-3 && r.probes >= 100 && secs < 60.0,
          "max_rel_error=" + fmt(r.max_rel_error) + " probes=" + std::to_string(r.probes) + " time=" + fmt(secs) +
              "s"};
}

// ---------------------------------------------------------------------------

Models train_models(const fs::path& dir) {
  Models m;
  Clock total;
  const Rng root(kSeed);
  for (Modality mod : {Modality::image, Modality::audio}) {
    const std::string tag(name(mod));
    const auto train = make_dataset(mod, kTrainItems, root.derive(1));
    const auto held = make_dataset(mod, kHeldItems, root.derive(2));
    Rng crng = root.derive(3);
    const auto clf = train_classifier(train, ClassifierTrainConfig{}, crng, &held);
    TrainConfig tc;
    tc.steps = kTrainSteps;
    tc.batch = kTrainBatch;
    tc.single_precision = true;
    Rng trng = root.derive(4);
    const TrainResult res = train_denoiser(train, tc, default_schedule(), trng);
    m.training.set(tag + ".classifier_accuracy", clf.accuracy);
    m.training.set(tag + ".loss_step100", smoothed_loss(res.loss, 100));
    m.training.set(tag + ".loss_final", smoothed_loss(res.loss, kTrainSteps - 1));
    save_checkpoint(dir / (tag + ".ckpt"), res.model);
    save_checkpoint(dir / (tag + "_clf.ckpt"), clf.model);
    (mod == Modality::image ? m.image : m.audio) = res.model;
    (mod == Modality::image ? m.image_clf : m.audio_clf) = clf.model;
  }
  m.training.set("seconds", total.seconds());

  TrainConfig cc;
  cc.steps = 500;
  cc.batch = kTrainBatch;
  cc.single_precision = true;
  Rng crng = root.derive(5);
  m.color = train_denoiser(make_dataset(Modality::color, 200, root.derive(6)), cc, default_schedule(), crng,
                           DenoiserConfig{.channels = 3})
                .model;
  save_checkpoint(dir / "color.ckpt", m.color);
  write_text(dir / "training.txt", m.training.serialize());
  return m;
}

Models& models(Context& ctx) {
  if (ctx.models) return *ctx.models;
  const fs::path& d = ctx.workdir;
  const bool have = fs::exists(d / "training.txt") && fs::exists(d / "image.ckpt") &&
                    fs::exists(d / "audio.ckpt") && fs::exists(d / "color.ckpt") &&
                    fs::exists(d / "image_clf.ckpt") && fs::exists(d / "audio_clf.ckpt");
  if (ctx.reuse && have) {
    Models m;
    m.image = load_denoiser(d / "image.ckpt");
    m.audio = load_denoiser(d / "audio.ckpt");
    m.color = load_denoiser(d / "color.ckpt");
    m.image_clf = load_classifier(d / "image_clf.ckpt");
    m.audio_clf = load_classifier(d / "audio_clf.ckpt");
    m.training = KeyValues::load(d / "training.txt");
    ctx.models = std::move(m);
  } else {
    ctx.models = train_models(d);
  }
  return *ctx.models;
}

Outcome training(Context& ctx) {
  const KeyValues& t = models(ctx).training;
  bool pass = true;
  std::string detail;
  for (const char* tag : {"image", "audio"}) {
    const std::string p(tag);
    const double l100 = std::stod(t.get(p + ".loss_step100")), lend = std::stod(t.get(p + ".loss_final"));
    const double acc = std::stod(t.get(p + ".classifier_accuracy"));
    pass = pass && lend < 0.5 * l100 && acc >= 0.95;
    detail += p + ": loss " + fmt(l100) + "->" + fmt(lend) + " (ratio " + fmt(lend / l100) + ") clf_acc=" +
              fmt(acc) + "; ";
  }
  const double secs = std::stod(t.get("seconds"));
  pass = pass && secs < 1800.0;
  return {pass, detail + "steps=" + std::to_string(kTrainSteps) + " time=" + fmt(secs) + "s" +
                    (ctx.reuse ? " (recorded)" : "")};
}

Outcome composition(Context& ctx) {
  Models& m = models(ctx);
  Clock clock;
  const DenoiserPredictor<float> audio(m.audio.cast<float>()), image(m.image.cast<float>());
  const auto pairs = matched_pairs();
  const CompositionConfig config;
  const Rng root(kSeed);
  Eigen::VectorXd p_img(kComposeSamples), p_aud(kComposeSamples), x_img(kComposeSamples), x_aud(kComposeSamples);
  ctx.composed.clear();
  for (int k = 0; k < kComposeSamples; ++k) {
    const CategoryPair& pair = pairs[std::size_t(k) % pairs.size()];
    Rng r = root.derive(std::uint64_t(k));
    const Canvas x =
        sample_composed(audio, image, pair.audio, pair.image, config, default_schedule(), r, kCanvasShape).canvas;
    p_img[k] = m.image_clf.probabilities(x)[pair.image];
    p_aud[k] = m.audio_clf.probabilities(x)[pair.audio];
    ctx.composed.push_back(x);

    Rng ri = root.derive(std::uint64_t(k) + 1000), ra = root.derive(std::uint64_t(k) + 2000);
    const Canvas xi = sample_single(image, pair.image, config.gamma_v, config.steps, default_schedule(), ri,
                                    kCanvasShape)
                          .canvas;
    const Canvas xa = sample_single(audio, pair.audio, config.gamma_a, config.steps, default_schedule(), ra,
                                    kCanvasShape)
                          .canvas;
    x_aud[k] = m.audio_clf.probabilities(xi)[pair.audio];
    x_img[k] = m.image_clf.probabilities(xa)[pair.image];
  }
  const double secs = clock.seconds();
  const bool pass = p_img.mean() >= 0.5 && p_aud.mean() >= 0.5 && x_aud.mean() <= 0.3 && x_img.mean() <= 0.3 &&
                    secs < 600.0;
  return {pass, "composed: image=" + fmt(p_img.mean()) + " audio=" + fmt(p_aud.mean()) +
                    "; image-only on audio classifier=" + fmt(x_aud.mean()) +
                    "; audio-only on image classifier=" + fmt(x_img.mean()) + " n=" +
                    std::to_string(kComposeSamples) + " time=" + fmt(secs) + "s"};
}

Outcome warm_start(Context& ctx) {
  Models& m = models(ctx);
  const DenoiserPredictor<float> audio(m.audio.cast<float>()), image(m.image.cast<float>());
  CompositionConfig v_late, a_late;
  v_late.t_v = 0.9;
  v_late.t_a = 1.0;
  a_late.t_v = 1.0;
  a_late.t_a = 0.9;
  const EvalModels em{audio, image, m.audio_clf, m.image_clf};
  const auto rows = ablation_sweep({{"0.9/1", v_late}, {"1/0.9", a_late}}, kWarmStartSamples, em, matched_pairs(),
                                   default_schedule(), Rng(kSeed), kCanvasShape);
  const AblationRow& a_first = rows[0];  // audio alone for the first tenth
  const AblationRow& v_first = rows[1];
  const bool pass = a_first.audio.mean >= v_first.audio.mean && v_first.image.mean >= a_first.image.mean;
  return {pass, "t_v=0.9,t_a=1: image=" + fmt(a_first.image.mean) + " audio=" + fmt(a_first.audio.mean) +
                    "; t_v=1,t_a=0.9: image=" + fmt(v_first.image.mean) + " audio=" + fmt(v_first.audio.mean) +
                    " n=" + std::to_string(kWarmStartSamples) + " per cell"};
}

Outcome vocoder(Context& ctx) {
  const AudioPipelineSpec spec;
  const auto sounds = make_dataset(Modality::audio, 25, Rng(kSeed).derive(8));
  double worst = 0.0;
  for (std::size_t i = 0; i < sounds.size(); ++i) {
    Rng r = Rng(kSeed).derive(100 + i);
    worst = std::max(worst, cycle_check(sounds[i].canvas, spec, r).mean_abs_error);
  }

  double composed_mean = 0.0;
  bool finite = true;
  const std::size_t nc = std::min<std::size_t>(ctx.composed.size(), 10);
  for (std::size_t i = 0; i < nc; ++i) {
    Rng r = Rng(kSeed).derive(200 + i);
    const double e = cycle_check(ctx.composed[i], spec, r).mean_abs_error;
    finite = finite && std::isfinite(e);
    composed_mean += e / double(nc);
  }

  double worst_sc = 0.0;
  for (double f : {220.0, 440.0, 1000.0, 2500.0}) {
    Waveform w;
    w.samples.resize(16000);
    for (Eigen::Index i = 0; i < w.samples.size(); ++i) {
      w.samples[i] = 0.5 * std::sin(2.0 * M_PI * f * double(i) / w.sample_rate);
    }
    LinearSpectrogram mag{stft(w, spec).cwiseAbs()};
    Rng r = Rng(kSeed).derive(300);
    worst_sc = std::max(worst_sc, griffin_lim(mag, spec, r, 100).convergence.back());
  }
  const bool pass = worst < 0.05 && finite && worst_sc < 0.1;
  return {pass, "synth_max_error=" + fmt(worst) + " (25 canvases) composed_mean_error=" +
                    (nc ? fmt(composed_mean) : std::string("n/a")) + " (" + std::to_string(nc) +
                    " samples) tone_spectral_convergence=" + fmt(worst_sc)};
}

Outcome colorization(Context& ctx) {
  Models& m = models(ctx);
  const DenoiserPredictor<double> model(m.color);
  double worst = 0.0;
  for (int k = 0; k < 5; ++k) {
    Rng g = Rng(kSeed).derive(400 + std::uint64_t(k));
    const Canvas target = render_glyph(image_category(k), g);
    Rng r = Rng(kSeed).derive(500 + std::uint64_t(k));
    const Canvas out = colorize(model, target, 100, 10.0, k, default_schedule(), r);
    worst = std::max(worst, (grayscale(out).values() - target.values()).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-6, "max_abs_channel_mean_diff=" + fmt(worst) + " (5 targets)"};
}

int run(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null").c_str());
  return rc;
}

Outcome determinism(Context& ctx) {
  models(ctx);
  const fs::path d = ctx.workdir;
  const std::string ckpts = " --audio-ckpt " + (d / "audio.ckpt").string() + " --image-ckpt " +
                            (d / "image.ckpt").string();
  fs::remove_all(d / "run1");
  fs::remove_all(d / "run2");
  const int rc1 = run(ctx.cli + " compose --audio-category harmonic-stack --image-category vertical-bars --seed 3" +
                      ckpts + " --out " + (d / "run1").string());
  const int rc2 = run(ctx.cli + " compose --config " + (d / "run1" / "manifest.txt").string() + ckpts + " --out " +
                      (d / "run2").string());
  if (rc1 != 0 || rc2 != 0) {
    return {false, "compose exited with " + std::to_string(rc1) + "/" + std::to_string(rc2)};
  }
  bool same = true;
  for (const char* f : {"composed.pgm", "composed.wav"}) {
    same = same && read_bytes(d / "run1" / f) == read_bytes(d / "run2" / f);
  }
  const KeyValues man = KeyValues::load(d / "run1" / "manifest.txt");
  const bool defaults = man.get("gamma_a") == "10" && man.get("t_v") == "0.9" && man.get("t_a") == "1" &&
                        man.get("steps") == "100";
  return {same && defaults, std::string("pgm+wav ") + (same ? "byte-identical" : "differ") +
                                " across manifest replay; manifest defaults " + (defaults ? "recorded" : "missing")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"imsound acceptance run"};
  Context ctx;
  std::string only;
  app.add_option("--workdir", ctx.workdir, "Directory for checkpoints and outputs")->required();
  app.add_option("--cli", ctx.cli, "Path to the imsound executable")->required()->check(CLI::ExistingFile);
  app.add_flag("--reuse", ctx.reuse, "Load checkpoints from a previous run");
  app.add_option("--only", only, "Comma-separated criterion ids");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(ctx.workdir);

  std::set<int> selected;
  std::stringstream ss(only);
  for (std::string tok; std::getline(ss, tok, ',');) selected.insert(std::stoi(tok));

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gmm-composition-oracle", gmm_composition},
      {"analytic-score-exactness", analytic_score},
      {"algebraic-identities", identities},
      {"ddim-oracle-reconstruction", ddim_exactness},
      {"denoiser-gradient-check", gradient_check},
      {"training-efficacy", [&] { return training(ctx); }},
      {"end-to-end-composition", [&] { return composition(ctx); }},
      {"warm-start-direction", [&] { return warm_start(ctx); }},
      {"vocoder-cycle-consistency", [&] { return vocoder(ctx); }},
      {"colorize-projection", [&] { return colorization(ctx); }},
      {"compose-determinism", [&] { return determinism(ctx); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
