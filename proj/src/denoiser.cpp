#include "imsound/denoiser.hpp"

#include "imsound/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace imsound {

using nn::col2im;
using nn::im2col;

// ---------------------------------------------------------------------------
// DenoiserT

// Activations kept for the backward pass plus scratch for it. One instance
// per thread is reused across calls so the large buffers are allocated once.
template <typename S>
struct DenoiserT<S>::Cache {
  int cat_row = 0;
  Vec h0, a1, z1, film;
  Mat h, out;
  Mat cols[4];
  Mat u[3];
  Mat v[3];
  Mat d_out, d_cols, d_h, d_v, d_u;
};

template <typename S>
DenoiserT<S>::DenoiserT(DenoiserConfig cfg) : cfg_(cfg) {
  if (cfg_.channels < 1 || cfg_.width < 1 || cfg_.embed_dim < 2 || cfg_.embed_dim % 2 != 0 ||
      cfg_.mlp_hidden < 1 || cfg_.categories < 1) {
    throw ParameterError("invalid denoiser configuration");
  }
  const int in[4] = {cfg_.channels, cfg_.width, cfg_.width, cfg_.width};
  const int out[4] = {cfg_.width, cfg_.width, cfg_.width, cfg_.channels};
  for (int l = 0; l < 4; ++l) {
    ids_.conv_w[l] = layout_.add("conv" + std::to_string(l) + ".weight", out[l], in[l] * 9);
    ids_.conv_b[l] = layout_.add("conv" + std::to_string(l) + ".bias", out[l], 1);
  }
  ids_.embed = layout_.add("category_embedding", cfg_.categories + 1, cfg_.embed_dim);
  ids_.mlp_w1 = layout_.add("film.w1", cfg_.mlp_hidden, cfg_.embed_dim);
  ids_.mlp_b1 = layout_.add("film.b1", cfg_.mlp_hidden, 1);
  ids_.mlp_w2 = layout_.add("film.w2", 6 * cfg_.width, cfg_.mlp_hidden);
  ids_.mlp_b2 = layout_.add("film.b2", 6 * cfg_.width, 1);
  params_ = Vec::Zero(layout_.total());
}

template <typename S>
void DenoiserT<S>::initialize(Rng& rng) {
  params_.setZero();
  auto fill = [&](int id, double sd) {
    auto m = layout_.map(params_, id);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = S(sd * rng.normal());
  };
  for (int l = 0; l < 4; ++l) {
    const double fan_in = double(layout_[ids_.conv_w[l]].cols);
    fill(ids_.conv_w[l], (l == 3 ? 0.1 : 1.0) / std::sqrt(fan_in));
  }
  fill(ids_.embed, 1.0);
  fill(ids_.mlp_w1, 1.0 / std::sqrt(double(cfg_.embed_dim)));
}

template <typename S>
int DenoiserT<S>::category_row(Category category) const {
  if (!category) return cfg_.categories;
  if (*category < 0 || *category >= cfg_.categories) {
    throw ParameterError("category id " + std::to_string(*category) + " outside [0, " +
                         std::to_string(cfg_.categories) + ")");
  }
  return *category;
}

template <typename S>
typename DenoiserT<S>::Cache& DenoiserT<S>::workspace() {
  thread_local Cache cache;
  return cache;
}

template <typename S>
void DenoiserT<S>::forward(const CanvasT<S>& x_t, Category category, int t, Cache& c) const {
  if (x_t.channels() != cfg_.channels) {
    throw ShapeError("denoiser expects " + std::to_string(cfg_.channels) + " channels, got " +
                     to_string(x_t.shape()));
  }
  if (t < 0) throw ParameterError("timestep must be nonnegative");
  const int H = x_t.height(), W = x_t.width();
  const Eigen::Index P = Eigen::Index(H) * W;
  const int row = category_row(category);

  c.cat_row = row;
  c.h0 = nn::timestep_embedding<S>(t, cfg_.embed_dim) +
         layout_.map(params_, ids_.embed).row(row).transpose();
  c.a1 = layout_.map(params_, ids_.mlp_w1) * c.h0 + layout_.map(params_, ids_.mlp_b1);
  c.z1 = cfg_.linear ? Vec(c.a1) : Vec(nn::silu(c.a1.array()).matrix());
  c.film = layout_.map(params_, ids_.mlp_w2) * c.z1 + layout_.map(params_, ids_.mlp_b2);

  c.h = Eigen::Map<const Mat>(x_t.values().data(), cfg_.channels, P);
  for (int l = 0; l < 3; ++l) {
    im2col(c.h, H, W, 1, c.cols[l]);
    c.u[l].noalias() = layout_.map(params_, ids_.conv_w[l]) * c.cols[l];
    c.u[l].colwise() += Vec(layout_.map(params_, ids_.conv_b[l]));
    const auto scale = c.film.segment(2 * l * cfg_.width, cfg_.width);
    const auto shift = c.film.segment((2 * l + 1) * cfg_.width, cfg_.width);
    c.v[l] = (Vec::Ones(cfg_.width) + scale).asDiagonal() * c.u[l];
    c.v[l].colwise() += shift;
    if (cfg_.linear) {
      c.h = c.v[l];
    } else {
      c.h = nn::silu(c.v[l].array()).matrix();
    }
  }
  im2col(c.h, H, W, 1, c.cols[3]);
  c.out.noalias() = layout_.map(params_, ids_.conv_w[3]) * c.cols[3];
  c.out.colwise() += Vec(layout_.map(params_, ids_.conv_b[3]));
}

template <typename S>
CanvasT<S> DenoiserT<S>::predict(const CanvasT<S>& x_t, Category category, int t) const {
  Cache& c = workspace();
  forward(x_t, category, t, c);
  return CanvasT<S>(x_t.shape(), Eigen::Map<const Vec>(c.out.data(), c.out.size()));
}

template <typename S>
S DenoiserT<S>::accumulate_gradient(const CanvasT<S>& x_t, Category category, int t,
                                    const CanvasT<S>& target, S loss_scale, Vec& grad) const {
  require_same_shape(x_t.shape(), target.shape(), "accumulate_gradient");
  if (grad.size() != params_.size()) throw ShapeError("gradient vector has wrong size");
  Cache& c = workspace();
  forward(x_t, category, t, c);
  const int H = x_t.height(), W = x_t.width();
  const Eigen::Index P = Eigen::Index(H) * W;
  c.d_out = c.out - Eigen::Map<const Mat>(target.values().data(), cfg_.channels, P);
  const S sse = c.d_out.squaredNorm();
  c.d_out *= S(2) * loss_scale;
  Vec d_film = Vec::Zero(c.film.size());

  layout_.map(grad, ids_.conv_w[3]).noalias() += c.d_out * c.cols[3].transpose();
  layout_.map(grad, ids_.conv_b[3]) += c.d_out.rowwise().sum();
  c.d_cols.noalias() = layout_.map(params_, ids_.conv_w[3]).transpose() * c.d_out;
  col2im(c.d_cols, cfg_.width, H, W, 1, c.d_h);

  for (int l = 2; l >= 0; --l) {
    if (cfg_.linear) {
      c.d_v = c.d_h;
    } else {
      c.d_v = (c.d_h.array() * nn::silu_grad(c.v[l].array())).matrix();
    }
    d_film.segment(2 * l * cfg_.width, cfg_.width) += (c.d_v.array() * c.u[l].array()).rowwise().sum().matrix();
    d_film.segment((2 * l + 1) * cfg_.width, cfg_.width) += c.d_v.rowwise().sum();
    const Vec gain = Vec::Ones(cfg_.width) + c.film.segment(2 * l * cfg_.width, cfg_.width);
    c.d_u = gain.asDiagonal() * c.d_v;
    layout_.map(grad, ids_.conv_w[l]).noalias() += c.d_u * c.cols[l].transpose();
    layout_.map(grad, ids_.conv_b[l]) += c.d_u.rowwise().sum();
    if (l > 0) {
      c.d_cols.noalias() = layout_.map(params_, ids_.conv_w[l]).transpose() * c.d_u;
      col2im(c.d_cols, cfg_.width, H, W, 1, c.d_h);
    }
  }

  layout_.map(grad, ids_.mlp_w2).noalias() += d_film * c.z1.transpose();
  layout_.map(grad, ids_.mlp_b2) += d_film;
  const Vec d_z1 = layout_.map(params_, ids_.mlp_w2).transpose() * d_film;
  const Vec d_a1 = cfg_.linear ? d_z1 : Vec((d_z1.array() * nn::silu_grad(c.a1.array())).matrix());
  layout_.map(grad, ids_.mlp_w1).noalias() += d_a1 * c.h0.transpose();
  layout_.map(grad, ids_.mlp_b1) += d_a1;
  const Vec d_h0 = layout_.map(params_, ids_.mlp_w1).transpose() * d_a1;
  layout_.map(grad, ids_.embed).row(c.cat_row) += d_h0.transpose();
  return sse;
}

template class DenoiserT<double>;
template class DenoiserT<float>;

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (steps < 1) throw ParameterError("train: steps must be >= 1");
  if (batch < 1) throw ParameterError("train: batch must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ParameterError("train: dropout must lie in [0, 1)");
  if (!(adam.learning_rate > 0.0)) throw ParameterError("train: learning rate must be positive");
}

namespace {

template <typename S>
DenoiserT<S> train_impl(const std::vector<DatasetItem>& dataset, const TrainConfig& cfg,
                        const NoiseSchedule& schedule, Rng& rng, const DenoiserConfig& model_cfg,
                        const Shape& shape, const ProgressFn& progress, std::vector<double>& trace) {
  DenoiserT<S> model(model_cfg);
  model.initialize(rng);
  nn::Adam<S> adam(model.parameters().size(), cfg.adam);
  nn::Vector<S> grad(model.parameters().size());
  const S scale = S(1.0 / (double(cfg.batch) * double(shape.size())));
  const int T = schedule.steps();
  trace.reserve(std::size_t(cfg.steps));

  for (int step = 0; step < cfg.steps; ++step) {
    grad.setZero();
    double sse = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      const auto& item = dataset[std::size_t(rng.uniform_int(0, int(dataset.size()) - 1))];
      const int t = rng.uniform_int(1, T);
      const Canvas eps = gaussian_canvas(rng, shape);
      const Category cat = rng.bernoulli(cfg.dropout) ? Category{} : Category{item.category};
      const Canvas x_t = forward_diffuse(to_model_space(item.canvas), t, eps, schedule);
      sse += double(model.accumulate_gradient(x_t.cast<S>(), cat, t, eps.cast<S>(), scale, grad));
    }
    const double loss = sse * double(scale);
    if (!std::isfinite(loss) || !grad.allFinite()) {
      throw TrainingError("denoiser training diverged at step " + std::to_string(step));
    }
    adam.step(model.parameters(), grad);
    trace.push_back(loss);
    if (progress) progress(step, loss);
  }
  return model;
}

}  // namespace

TrainResult train_denoiser(const std::vector<DatasetItem>& dataset, const TrainConfig& cfg,
                           const NoiseSchedule& schedule, Rng& rng, DenoiserConfig model_cfg,
                           const ProgressFn& progress) {
  cfg.validate();
  if (dataset.empty()) throw ParameterError("train: dataset is empty");
  const Shape shape = dataset.front().canvas.shape();
  for (const auto& it : dataset) {
    require_same_shape(it.canvas.shape(), shape, "train dataset");
  }
  model_cfg.channels = shape.channels;

  TrainResult res{DenoiserModel(model_cfg), {}};
  if (cfg.single_precision) {
    res.model = train_impl<float>(dataset, cfg, schedule, rng, model_cfg, shape, progress, res.loss)
                    .cast<double>();
  } else {
    res.model = train_impl<double>(dataset, cfg, schedule, rng, model_cfg, shape, progress, res.loss);
  }
  return res;
}

double smoothed_loss(const std::vector<double>& loss, int step, int window) {
  if (loss.empty()) throw ParameterError("smoothed_loss: empty trace");
  const int last = std::clamp(step, 0, int(loss.size()) - 1);
  const int first = std::max(0, last - window + 1);
  double s = 0.0;
  for (int i = first; i <= last; ++i) s += loss[std::size_t(i)];
  return s / double(last - first + 1);
}

double gradient_rel_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

GradCheckResult grad_check(const DenoiserModel& model, int probes, Rng& rng, Shape shape, double h,
                           int batch) {
  if (probes < 1) throw ParameterError("grad_check: probes must be >= 1");
  DenoiserModel m = model;
  shape.channels = m.config().channels;

  struct Example {
    Canvas x_t, target;
    Category cat;
    int t;
  };
  std::vector<Example> examples;
  for (int b = 0; b < batch; ++b) {
    const int c = rng.uniform_int(-1, m.config().categories - 1);
    examples.push_back({gaussian_canvas(rng, shape), gaussian_canvas(rng, shape),
                        c < 0 ? Category{} : Category{c}, rng.uniform_int(1, 1000)});
  }
  const double scale = 1.0 / (double(batch) * double(shape.size()));
  auto loss = [&]() {
    double total = 0.0;
    for (const auto& e : examples) {
      total += (m.predict(e.x_t, e.cat, e.t).values() - e.target.values()).squaredNorm();
    }
    return total * scale;
  };

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(m.parameters().size());
  for (const auto& e : examples) m.accumulate_gradient(e.x_t, e.cat, e.t, e.target, scale, grad);

  GradCheckResult res;
  for (int p = 0; p < probes; ++p) {
    const Eigen::Index i = rng.uniform_int(0, int(m.parameters().size()) - 1);
    const double saved = m.parameters()[i];
    m.parameters()[i] = saved + h;
    const double plus = loss();
    m.parameters()[i] = saved - h;
    const double minus = loss();
    m.parameters()[i] = saved;
    const double numeric = (plus - minus) / (2.0 * h);
    res.max_rel_error = std::max(res.max_rel_error, gradient_rel_error(grad[i], numeric));
    ++res.probes;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Classifier

using nn::RowMatrix;
using Mat = RowMatrix<double>;

struct ClassifierModel::Cache {
  int H1 = 0, W1 = 0, H2 = 0, W2 = 0;
  Mat in, cols1, u1, h1, cols2, u2;
  Eigen::VectorXd pooled, a3, f, logits;
  Mat d_u2, d_cols2, d_h1, d_u1;
};

ClassifierModel::Cache& ClassifierModel::workspace() {
  thread_local Cache cache;
  return cache;
}

ClassifierModel::ClassifierModel(ClassifierConfig cfg) : cfg_(cfg) {
  w1_ = layout_.add("conv1.weight", cfg_.width1, cfg_.channels * 9);
  b1_ = layout_.add("conv1.bias", cfg_.width1, 1);
  w2_ = layout_.add("conv2.weight", cfg_.width2, cfg_.width1 * 9);
  b2_ = layout_.add("conv2.bias", cfg_.width2, 1);
  w3_ = layout_.add("feature.weight", cfg_.feature_dim, cfg_.width2);
  b3_ = layout_.add("feature.bias", cfg_.feature_dim, 1);
  w4_ = layout_.add("head.weight", cfg_.classes, cfg_.feature_dim);
  b4_ = layout_.add("head.bias", cfg_.classes, 1);
  params_ = Eigen::VectorXd::Zero(layout_.total());
}

void ClassifierModel::initialize(Rng& rng) {
  params_.setZero();
  for (int id : {w1_, w2_, w3_, w4_}) {
    auto m = layout_.map(params_, id);
    const double sd = 1.0 / std::sqrt(double(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = sd * rng.normal();
  }
}

Eigen::VectorXd ClassifierModel::forward(const Canvas& x, Cache* cache) const {
  if (x.channels() != cfg_.channels) throw ShapeError("classifier channel mismatch");
  Cache& c = cache ? *cache : workspace();
  const int H = x.height(), W = x.width();
  c.H1 = nn::conv_out(H, 2);
  c.W1 = nn::conv_out(W, 2);
  c.H2 = nn::conv_out(c.H1, 2);
  c.W2 = nn::conv_out(c.W1, 2);

  c.in = (Eigen::Map<const Mat>(x.values().data(), x.channels(), Eigen::Index(H) * W).array() *
              2.0 - 1.0).matrix();
  im2col(c.in, H, W, 2, c.cols1);
  c.u1.noalias() = layout_.map(params_, w1_) * c.cols1;
  c.u1.colwise() += Eigen::VectorXd(layout_.map(params_, b1_));
  c.h1 = nn::silu(c.u1.array()).matrix();
  im2col(c.h1, c.H1, c.W1, 2, c.cols2);
  c.u2.noalias() = layout_.map(params_, w2_) * c.cols2;
  c.u2.colwise() += Eigen::VectorXd(layout_.map(params_, b2_));
  c.pooled = nn::silu(c.u2.array()).matrix().rowwise().mean();
  c.a3 = layout_.map(params_, w3_) * c.pooled + layout_.map(params_, b3_);
  c.f = nn::silu(c.a3.array()).matrix();
  c.logits = layout_.map(params_, w4_) * c.f + layout_.map(params_, b4_);
  return c.logits;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Eigen::VectorXd ClassifierModel::logits(const Canvas& x) const { return forward(x, nullptr); }
Eigen::VectorXd ClassifierModel::probabilities(const Canvas& x) const { return softmax(logits(x)); }

Eigen::VectorXd ClassifierModel::features(const Canvas& x) const {
  Cache& c = workspace();
  forward(x, &c);
  return c.f;
}

int ClassifierModel::predict(const Canvas& x) const {
  Eigen::Index best = 0;
  logits(x).maxCoeff(&best);
  return int(best);
}

double ClassifierModel::accumulate_gradient(const Canvas& x, int label, double loss_scale,
                                            Eigen::VectorXd& grad) const {
  if (label < 0 || label >= cfg_.classes) throw ParameterError("classifier label out of range");
  Cache& c = workspace();
  forward(x, &c);
  Eigen::VectorXd d_logits = softmax(c.logits);
  const double loss = -std::log(std::max(d_logits[label], 1e-300));
  d_logits[label] -= 1.0;
  d_logits *= loss_scale;

  layout_.map(grad, w4_).noalias() += d_logits * c.f.transpose();
  layout_.map(grad, b4_) += d_logits;
  const Eigen::VectorXd d_f = layout_.map(params_, w4_).transpose() * d_logits;
  const Eigen::VectorXd d_a3 = (d_f.array() * nn::silu_grad(c.a3.array())).matrix();
  layout_.map(grad, w3_).noalias() += d_a3 * c.pooled.transpose();
  layout_.map(grad, b3_) += d_a3;
  const Eigen::VectorXd d_pooled = layout_.map(params_, w3_).transpose() * d_a3;

  const Eigen::Index P2 = c.u2.cols();
  c.d_u2 = ((d_pooled / double(P2)).replicate(1, P2).array() * nn::silu_grad(c.u2.array())).matrix();
  layout_.map(grad, w2_).noalias() += c.d_u2 * c.cols2.transpose();
  layout_.map(grad, b2_) += c.d_u2.rowwise().sum();
  c.d_cols2.noalias() = layout_.map(params_, w2_).transpose() * c.d_u2;
  col2im(c.d_cols2, cfg_.width1, c.H1, c.W1, 2, c.d_h1);
  c.d_u1 = (c.d_h1.array() * nn::silu_grad(c.u1.array())).matrix();
  layout_.map(grad, w1_).noalias() += c.d_u1 * c.cols1.transpose();
  layout_.map(grad, b1_) += c.d_u1.rowwise().sum();
  return loss;
}

double accuracy(const ClassifierModel& model, const std::vector<DatasetItem>& items) {
  if (items.empty()) throw ParameterError("accuracy: empty item list");
  int correct = 0;
  for (const auto& it : items) correct += model.predict(it.canvas) == it.category;
  return double(correct) / double(items.size());
}

ClassifierTrainResult train_classifier(const std::vector<DatasetItem>& train,
                                       const ClassifierTrainConfig& cfg, Rng& rng,
                                       const std::vector<DatasetItem>* heldout,
                                       ClassifierConfig model_cfg) {
  if (train.empty()) throw ParameterError("train_classifier: dataset is empty");
  if (cfg.steps < 1 || cfg.batch < 1) throw ParameterError("train_classifier: bad budget");
  if (!(cfg.superpose >= 0.0 && cfg.superpose <= 1.0)) {
    throw ParameterError("train_classifier: superpose must lie in [0,1]");
  }
  std::vector<std::vector<std::size_t>> by_class(std::size_t(model_cfg.classes));
  for (std::size_t i = 0; i < train.size(); ++i) {
    const int c = train[i].category;
    if (c < 0 || c >= model_cfg.classes) throw ParameterError("train_classifier: label out of range");
    by_class[std::size_t(c)].push_back(i);
  }
  model_cfg.channels = train.front().canvas.channels();
  ClassifierTrainResult res{ClassifierModel(model_cfg), {}, 0.0};
  res.model.initialize(rng);
  nn::Adam<double> adam(res.model.parameters().size(), cfg.adam);
  Eigen::VectorXd grad(res.model.parameters().size());
  for (int step = 0; step < cfg.steps; ++step) {
    grad.setZero();
    double loss = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      const auto& it = train[std::size_t(rng.uniform_int(0, int(train.size()) - 1))];
      if (cfg.superpose > 0.0 && rng.uniform() < cfg.superpose) {
        const auto& peers = by_class[std::size_t(it.category)];
        const auto& other = train[peers[std::size_t(rng.uniform_int(0, int(peers.size()) - 1))]];
        const Canvas both(it.canvas.shape(), it.canvas.values().cwiseMax(other.canvas.values()));
        loss += res.model.accumulate_gradient(both, it.category, 1.0 / cfg.batch, grad);
      } else {
        loss += res.model.accumulate_gradient(it.canvas, it.category, 1.0 / cfg.batch, grad);
      }
    }
    loss /= cfg.batch;
    if (!std::isfinite(loss) || !grad.allFinite()) {
      throw TrainingError("classifier training diverged at step " + std::to_string(step));
    }
    adam.step(res.model.parameters(), grad);
    res.loss.push_back(loss);
  }
  res.accuracy = accuracy(res.model, heldout ? *heldout : train);
  if (res.accuracy < cfg.min_accuracy) {
    throw TrainingError("classifier accuracy " + format_double(res.accuracy) + " below " +
                        format_double(cfg.min_accuracy) + " after full budget");
  }
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'I', 'M', 'S', 'N', 'D', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}
void put_f64(std::vector<unsigned char>& b, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& b) : b_(b) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b_[at_ + std::size_t(i)]) << (8 * i);
    at_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b_[at_ + std::size_t(i)]) << (8 * i);
    at_ += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(b_.begin() + long(at_), b_.begin() + long(at_ + n));
    at_ += n;
    return s;
  }
  bool done() const { return at_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (at_ + n > b_.size()) throw FormatError("truncated checkpoint");
  }
  const std::vector<unsigned char>& b_;
  std::size_t at_ = 0;
};

std::vector<unsigned char> encode(std::uint32_t kind, const std::vector<int>& hyper,
                                  const nn::ParameterLayout& layout, const Eigen::VectorXd& params) {
  std::vector<unsigned char> b(kMagic, kMagic + 8);
  put_u32(b, kVersion);
  put_u32(b, kind);
  put_u32(b, std::uint32_t(hyper.size()));
  for (int h : hyper) put_u32(b, std::uint32_t(h));
  put_u32(b, std::uint32_t(layout.tensors().size()));
  for (const auto& t : layout.tensors()) {
    put_u32(b, std::uint32_t(t.name.size()));
    b.insert(b.end(), t.name.begin(), t.name.end());
    put_u32(b, std::uint32_t(t.rows));
    put_u32(b, std::uint32_t(t.cols));
    for (Eigen::Index i = 0; i < t.size(); ++i) put_f64(b, params[t.offset + i]);
  }
  return b;
}

std::vector<int> decode_header(Reader& r, std::uint32_t expected_kind) {
  if (r.str(8) != std::string(kMagic, 8)) throw FormatError("not a checkpoint (bad magic)");
  if (r.u32() != kVersion) throw FormatError("unsupported checkpoint version");
  const std::uint32_t kind = r.u32();
  if (kind != expected_kind) {
    throw FormatError(expected_kind == 1 ? "checkpoint is not a denoiser" : "checkpoint is not a classifier");
  }
  const std::uint32_t n = r.u32();
  if (n > 64) throw FormatError("implausible hyperparameter count");
  std::vector<int> hyper;
  for (std::uint32_t i = 0; i < n; ++i) hyper.push_back(int(std::int32_t(r.u32())));
  return hyper;
}

void decode_tensors(Reader& r, const nn::ParameterLayout& layout, Eigen::VectorXd& params) {
  const std::uint32_t count = r.u32();
  if (count != layout.tensors().size()) throw FormatError("checkpoint tensor count mismatch");
  for (const auto& t : layout.tensors()) {
    const std::string name = r.str(r.u32());
    const int rows = int(r.u32()), cols = int(r.u32());
    if (name != t.name || rows != t.rows || cols != t.cols) {
      throw FormatError("checkpoint tensor '" + name + "' does not match expected '" + t.name + "'");
    }
    for (Eigen::Index i = 0; i < t.size(); ++i) params[t.offset + i] = r.f64();
  }
  if (!r.done()) throw FormatError("trailing bytes in checkpoint");
  if (!params.allFinite()) throw FormatError("checkpoint contains non-finite parameters");
}

}  // namespace

std::vector<unsigned char> encode_checkpoint(const DenoiserModel& m) {
  const auto& c = m.config();
  return encode(1, {c.channels, c.width, c.embed_dim, c.mlp_hidden, c.categories, c.linear ? 1 : 0},
                m.layout(), m.parameters());
}

std::vector<unsigned char> encode_checkpoint(const ClassifierModel& m) {
  const auto& c = m.config();
  return encode(2, {c.channels, c.width1, c.width2, c.feature_dim, c.classes}, m.layout(),
                m.parameters());
}

DenoiserModel decode_denoiser(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  const auto h = decode_header(r, 1);
  if (h.size() != 6) throw FormatError("denoiser checkpoint header has wrong length");
  DenoiserModel m(DenoiserConfig{h[0], h[1], h[2], h[3], h[4], h[5] != 0});
  decode_tensors(r, m.layout(), m.parameters());
  return m;
}

ClassifierModel decode_classifier(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  const auto h = decode_header(r, 2);
  if (h.size() != 5) throw FormatError("classifier checkpoint header has wrong length");
  ClassifierModel m(ClassifierConfig{h[0], h[1], h[2], h[3], h[4]});
  decode_tensors(r, m.layout(), m.parameters());
  return m;
}

void save_checkpoint(const std::filesystem::path& path, const DenoiserModel& m) {
  write_bytes(path, encode_checkpoint(m));
}
void save_checkpoint(const std::filesystem::path& path, const ClassifierModel& m) {
  write_bytes(path, encode_checkpoint(m));
}
DenoiserModel load_denoiser(const std::filesystem::path& path) { return decode_denoiser(read_bytes(path)); }
ClassifierModel load_classifier(const std::filesystem::path& path) {
  return decode_classifier(read_bytes(path));
}

}  // namespace imsound
