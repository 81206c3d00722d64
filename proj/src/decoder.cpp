#include "hyperlock/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "hyperlock/errors.hpp"
#include "hyperlock/kernels.hpp"
#include "hyperlock/random.hpp"

namespace hyperlock::nn {

namespace {

constexpr int kModelVersion = 1;

void check_finite_loss(double loss, std::size_t epoch) {
  if (!std::isfinite(loss)) throw DivergenceError(epoch);
}

// Loss of one example given its logits; writes dLoss/dlogits into grad (scaled).
double head_loss_and_grad(Head head, std::span<const double> logits, std::size_t label,
                          std::span<const double> target, double scale, std::span<double> grad) {
  if (head == Head::SoftmaxClassifier) {
    const auto p = softmax(logits);
    for (std::size_t c = 0; c < p.size(); ++c) grad[c] = scale * (p[c] - (c == label ? 1.0 : 0.0));
    return loss_nll(p, label);
  }
  const double r = loss_rmse(logits, target);
  const double denom = static_cast<double>(logits.size()) * r;
  for (std::size_t c = 0; c < logits.size(); ++c) grad[c] = r > 0.0 ? scale * (logits[c] - target[c]) / denom : 0.0;
  return r;
}

// Adapters giving both dataset kinds the same shape for the SGD loop.
struct ClassificationView {
  const ClassificationSet& set;
  std::vector<std::vector<std::uint32_t>> active;

  explicit ClassificationView(const ClassificationSet& s) : set(s) {
    active.reserve(s.size());
    for (const auto& x : s.inputs) active.push_back(x.active_indices());
  }
  std::size_t size() const { return set.size(); }
  kernels::SparseRow row(std::size_t i) const { return active[i]; }
  std::size_t label(std::size_t i) const { return set.labels[i]; }
  std::span<const double> target(std::size_t) const { return {}; }
};

struct RegressionView {
  const RegressionSet& set;
  explicit RegressionView(const RegressionSet& s) : set(s) {}
  std::size_t size() const { return set.size(); }
  kernels::DenseRow row(std::size_t i) const { return set.inputs.row(i); }
  std::size_t label(std::size_t) const { return 0; }
  std::span<const double> target(std::size_t i) const { return set.targets.row(i); }
};

template <class View>
double view_mean_loss(const LinearDecoder& model, const View& view) {
  using Row = decltype(view.row(0));
  constexpr std::size_t kChunk = 512;
  double total = 0.0;
  std::vector<Row> rows;
  Matrix logits;
  std::vector<double> scratch(model.out_dim());
  for (std::size_t start = 0; start < view.size(); start += kChunk) {
    const std::size_t end = std::min(view.size(), start + kChunk);
    rows.clear();
    for (std::size_t i = start; i < end; ++i) rows.push_back(view.row(i));
    kernels::parallel::linear_forward(model.weights(), model.bias(), std::span<const Row>(rows), logits);
    for (std::size_t i = start; i < end; ++i) {
      total += head_loss_and_grad(model.head(), logits.row(i - start), view.label(i), view.target(i), 0.0, scratch);
    }
  }
  return total / static_cast<double>(view.size());
}

template <class View>
void check_dims(const LinearDecoder& model, const View& view, std::string_view name);

template <>
void check_dims(const LinearDecoder& model, const ClassificationView& view, std::string_view name) {
  if (model.head() != Head::SoftmaxClassifier) throw ShapeError("classification data needs a classifier head");
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (view.set.inputs[i].dim() != model.in_dim())
      throw ShapeError(std::string(name) + " input dimension does not match decoder width");
    if (view.set.labels[i] >= model.out_dim()) throw ShapeError(std::string(name) + " label out of range");
  }
  if (view.set.labels.size() != view.set.inputs.size()) throw ShapeError(std::string(name) + " label count mismatch");
}

template <>
void check_dims(const LinearDecoder& model, const RegressionView& view, std::string_view name) {
  if (model.head() != Head::Regression) throw ShapeError("regression data needs a regression head");
  if (view.set.inputs.cols() != model.in_dim() || view.set.targets.cols() != model.out_dim() ||
      view.set.targets.rows() != view.set.inputs.rows())
    throw ShapeError(std::string(name) + " shape does not match decoder");
}

template <class View>
TrainResult train_impl(LinearDecoder model, const View& train_view, const View& val_view, const TrainConfig& cfg) {
  using Row = decltype(train_view.row(0));
  cfg.validate();
  if (train_view.size() == 0) throw ValueError("training set is empty");
  if (val_view.size() == 0) throw ValueError("validation set is empty");
  check_dims(model, train_view, "training set");
  check_dims(model, val_view, "validation set");

  RandomStream rng(derive_seed(cfg.seed, "shuffle"));
  std::vector<std::size_t> order(train_view.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainReport report;
  std::optional<LinearDecoder> best;
  double best_loss = std::numeric_limits<double>::infinity();
  double reference_loss = best_loss;
  std::size_t stale = 0;

  std::vector<Row> rows;
  Matrix logits;
  Matrix grads;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double train_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::size_t n = end - start;
      rows.clear();
      for (std::size_t i = start; i < end; ++i) rows.push_back(train_view.row(order[i]));
      kernels::parallel::linear_forward(model.weights(), model.bias(), std::span<const Row>(rows), logits);
      if (grads.rows() != n || grads.cols() != model.out_dim()) grads = Matrix(n, model.out_dim());
      const double scale = 1.0 / static_cast<double>(n);
      for (std::size_t s = 0; s < n; ++s) {
        const std::size_t idx = order[start + s];
        train_total += head_loss_and_grad(model.head(), logits.row(s), train_view.label(idx), train_view.target(idx),
                                          scale, grads.row(s));
      }
      check_finite_loss(train_total, epoch);
      kernels::parallel::linear_update(model.weights(), model.bias(), std::span<const Row>(rows), grads,
                                       cfg.learning_rate);
    }
    const double train_loss = train_total / static_cast<double>(order.size());
    const double val_loss = view_mean_loss(model, val_view);
    check_finite_loss(val_loss, epoch);

    report.epochs_run = epoch;
    report.train_loss_history.push_back(train_loss);
    report.val_loss_history.push_back(val_loss);

    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = model;
      report.best_epoch = epoch;
    }
    if (val_loss < reference_loss - cfg.min_delta) {
      reference_loss = val_loss;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      report.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }
  return {std::move(*best), std::move(report)};
}

}  // namespace

const char* to_string(Head head) noexcept {
  return head == Head::Regression ? "regression" : "softmax-classifier";
}

Head head_from_string(std::string_view s) {
  if (s == "regression") return Head::Regression;
  if (s == "softmax-classifier") return Head::SoftmaxClassifier;
  throw ConfigError("head", "expected \"regression\" or \"softmax-classifier\"");
}

LinearDecoder::LinearDecoder(Matrix w, std::vector<double> b, Head head)
    : w_(std::move(w)), b_(std::move(b)), head_(head) {
  if (w_.rows() == 0 || w_.cols() == 0) throw ShapeError("decoder weight matrix is empty");
  if (b_.size() != w_.rows()) throw ShapeError("decoder bias length does not match output dimension");
}

LinearDecoder LinearDecoder::zeros(std::size_t out_dim, std::size_t in_dim, Head head) {
  return LinearDecoder(Matrix(out_dim, in_dim), std::vector<double>(out_dim, 0.0), head);
}

LinearDecoder LinearDecoder::initialized(std::size_t out_dim, std::size_t in_dim, Head head, std::uint64_t seed) {
  auto model = zeros(out_dim, in_dim, head);
  RandomStream rng(derive_seed(seed, "init"));
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (double& v : model.weights().values()) v = rng.uniform(-bound, bound);
  return model;
}

std::vector<double> LinearDecoder::logits(const hd::BinaryHypervector& x) const {
  if (x.dim() != in_dim()) throw ShapeError("hypervector dimension does not match decoder width");
  std::vector<double> out(b_);
  const auto active = x.active_indices();
  for (std::size_t c = 0; c < out.size(); ++c) {
    const auto row = w_.row(c);
    for (auto j : active) out[c] += row[j];
  }
  return out;
}

std::vector<double> LinearDecoder::logits(std::span<const double> x) const {
  if (x.size() != in_dim()) throw ShapeError("input length does not match decoder width");
  std::vector<double> out(b_);
  for (std::size_t c = 0; c < out.size(); ++c) {
    const auto row = w_.row(c);
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) acc += row[j] * x[j];
    out[c] += acc;
  }
  return out;
}

std::vector<double> LinearDecoder::forward(const hd::BinaryHypervector& x) const {
  auto z = logits(x);
  return head_ == Head::SoftmaxClassifier ? softmax(z) : z;
}

std::vector<double> LinearDecoder::forward(std::span<const double> x) const {
  auto z = logits(x);
  return head_ == Head::SoftmaxClassifier ? softmax(z) : z;
}

std::size_t LinearDecoder::predict(const hd::BinaryHypervector& x) const { return argmax(logits(x)); }

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - peak);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ValueError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double loss_rmse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ShapeError("rmse: prediction and target lengths differ");
  if (pred.empty()) throw ShapeError("rmse: empty vectors");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

double loss_nll(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) throw ShapeError("nll: label out of range");
  return -std::log(std::max(probs[label], kProbabilityFloor));
}

void TrainConfig::validate() const {
  if (!(std::isfinite(learning_rate) && learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
  if (batch_size == 0) throw ConfigError("batch_size", "must be at least 1");
  if (max_epochs == 0) throw ConfigError("max_epochs", "must be positive");
  if (patience == 0) throw ConfigError("patience", "must be positive");
  if (!(std::isfinite(min_delta) && min_delta >= 0.0)) throw ConfigError("min_delta", "must be nonnegative");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate}, {"batch_size", cfg.batch_size}, {"max_epochs", cfg.max_epochs},
          {"patience", cfg.patience},           {"min_delta", cfg.min_delta},   {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& defaults) {
  TrainConfig cfg = defaults;
  try {
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.min_delta = j.value("min_delta", cfg.min_delta);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("train", e.what());
  }
  cfg.validate();
  return cfg;
}

TrainResult train(LinearDecoder init, const ClassificationSet& train_set, const ClassificationSet& val_set,
                  const TrainConfig& cfg) {
  return train_impl(std::move(init), ClassificationView(train_set), ClassificationView(val_set), cfg);
}

TrainResult train(LinearDecoder init, const RegressionSet& train_set, const RegressionSet& val_set,
                  const TrainConfig& cfg) {
  return train_impl(std::move(init), RegressionView(train_set), RegressionView(val_set), cfg);
}

double mean_loss(const LinearDecoder& model, const ClassificationSet& set) {
  if (set.size() == 0) throw ValueError("mean_loss of an empty set");
  ClassificationView view(set);
  check_dims(model, view, "dataset");
  return view_mean_loss(model, view);
}

double mean_loss(const LinearDecoder& model, const RegressionSet& set) {
  if (set.size() == 0) throw ValueError("mean_loss of an empty set");
  RegressionView view(set);
  check_dims(model, view, "dataset");
  return view_mean_loss(model, view);
}

double accuracy(const LinearDecoder& model, const ClassificationSet& set) {
  if (set.size() == 0) throw ValueError("accuracy of an empty set");
  ClassificationView view(set);
  check_dims(model, view, "dataset");
  std::vector<kernels::SparseRow> rows;
  for (std::size_t i = 0; i < view.size(); ++i) rows.push_back(view.row(i));
  Matrix logits;
  kernels::parallel::linear_forward(model.weights(), model.bias(), std::span<const kernels::SparseRow>(rows), logits);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (argmax(logits.row(i)) == set.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

double mean_rmse(const LinearDecoder& model, const RegressionSet& set, bool clamp_unit) {
  if (set.size() == 0) throw ValueError("mean_rmse of an empty set");
  RegressionView view(set);
  check_dims(model, view, "dataset");
  std::vector<kernels::DenseRow> rows;
  for (std::size_t i = 0; i < view.size(); ++i) rows.push_back(view.row(i));
  Matrix pred;
  kernels::parallel::linear_forward(model.weights(), model.bias(), std::span<const kernels::DenseRow>(rows), pred);
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto p = pred.row(i);
    if (clamp_unit) {
      for (double& v : p) v = std::clamp(v, 0.0, 1.0);
    }
    total += loss_rmse(p, set.targets.row(i));
  }
  return total / static_cast<double>(set.size());
}

double Gradient::norm() const {
  double s = 0.0;
  for (double v : dw.values()) s += v * v;
  for (double v : db) s += v * v;
  return std::sqrt(s);
}

double example_loss(const LinearDecoder& model, const GradientExample& ex) {
  const auto z = model.logits(std::span<const double>(ex.input));
  if (model.head() == Head::SoftmaxClassifier) return loss_nll(softmax(z), ex.label);
  return loss_rmse(z, ex.target);
}

Gradient analytic_gradient(const LinearDecoder& model, const GradientExample& ex) {
  const auto z = model.logits(std::span<const double>(ex.input));
  if (model.head() == Head::SoftmaxClassifier && ex.label >= model.out_dim())
    throw ShapeError("gradient example label out of range");
  if (model.head() == Head::Regression && ex.target.size() != model.out_dim())
    throw ShapeError("gradient example target length mismatch");
  std::vector<double> g(model.out_dim());
  head_loss_and_grad(model.head(), z, ex.label, ex.target, 1.0, g);
  Gradient grad{Matrix(model.out_dim(), model.in_dim()), g};
  for (std::size_t c = 0; c < model.out_dim(); ++c) {
    for (std::size_t j = 0; j < model.in_dim(); ++j) grad.dw(c, j) = g[c] * ex.input[j];
  }
  return grad;
}

double grad_check(const LinearDecoder& model, const GradientExample& ex, double h) {
  if (!(h > 0.0)) throw ValueError("grad_check step must be positive");
  const Gradient analytic = analytic_gradient(model, ex);
  LinearDecoder probe = model;
  double worst = 0.0;
  auto compare = [&](double a, double& param) {
    const double saved = param;
    param = saved + h;
    const double up = example_loss(probe, ex);
    param = saved - h;
    const double down = example_loss(probe, ex);
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max(std::abs(a), std::abs(numeric));
    if (scale == 0.0) return;
    worst = std::max(worst, std::abs(a - numeric) / scale);
  };
  for (std::size_t c = 0; c < model.out_dim(); ++c) {
    for (std::size_t j = 0; j < model.in_dim(); ++j) compare(analytic.dw(c, j), probe.weights()(c, j));
    compare(analytic.db[c], probe.bias()[c]);
  }
  return worst;
}

RidgeResult fit_ridge(const RegressionSet& train_set, const RegressionSet& val_set, std::span<const double> lambdas) {
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  if (lambdas.empty()) throw ConfigError("lambdas", "need at least one ridge strength");
  if (train_set.size() == 0 || val_set.size() == 0) throw ValueError("ridge fit needs nonempty train and validation sets");
  const std::size_t n = train_set.size();
  const std::size_t d = train_set.inputs.cols();
  const std::size_t out = train_set.targets.cols();
  if (train_set.targets.rows() != n || val_set.inputs.cols() != d || val_set.targets.cols() != out)
    throw ShapeError("ridge fit: inconsistent dataset shapes");

  Mat a(n, d + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = train_set.inputs.row(i);
    for (std::size_t j = 0; j < d; ++j) a(i, j) = row[j];
    a(i, d) = 1.0;
  }
  const Eigen::Map<const Mat> targets(train_set.targets.values().data(), n, out);

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d + 1, d + 1);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  const Eigen::MatrixXd rhs = a.transpose() * targets;

  RidgeReport report;
  std::optional<LinearDecoder> best;
  double best_rmse = std::numeric_limits<double>::infinity();
  for (double lambda : lambdas) {
    if (!(std::isfinite(lambda) && lambda >= 0.0)) throw ConfigError("lambdas", "ridge strengths must be nonnegative");
    Eigen::MatrixXd h = gram;
    h.diagonal().head(d).array() += lambda * static_cast<double>(n);
    Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(h);
    double rmse = std::numeric_limits<double>::quiet_NaN();
    if (llt.info() == Eigen::Success) {
      const Eigen::MatrixXd m = llt.solve(rhs);  // (d+1) x out
      LinearDecoder model = LinearDecoder::zeros(out, d, Head::Regression);
      for (std::size_t c = 0; c < out; ++c) {
        for (std::size_t j = 0; j < d; ++j) model.weights()(c, j) = m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
        model.bias()[c] = m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c));
      }
      if (model.weights().values().end() ==
          std::find_if(model.weights().values().begin(), model.weights().values().end(),
                       [](double v) { return !std::isfinite(v); })) {
        rmse = mean_rmse(model, val_set, false);
        if (rmse < best_rmse) {
          best_rmse = rmse;
          best = std::move(model);
          report.chosen_lambda = lambda;
        }
      }
    }
    report.lambdas.push_back(lambda);
    report.val_rmse.push_back(rmse);
  }
  if (!best) throw DivergenceError(0);
  return {std::move(*best), std::move(report)};
}

nlohmann::json to_json(const ModelFile& model) {
  const auto& dec = model.decoder;
  const auto w = dec.weights().values();
  return {{"format", "hyperlock-model"},
          {"version", kModelVersion},
          {"head", to_string(dec.head())},
          {"out_dim", dec.out_dim()},
          {"in_dim", dec.in_dim()},
          {"weights", std::vector<double>(w.begin(), w.end())},
          {"bias", dec.bias()},
          {"epsilon", model.epsilon},
          {"train_config", to_json(model.train)},
          {"master_seed", model.master_seed},
          {"extra", model.extra}};
}

ModelFile model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "hyperlock-model") throw FormatError("not a model document");
    if (j.value("version", 0) != kModelVersion) throw FormatError("unsupported model document version");
    const auto out = j.at("out_dim").get<std::size_t>();
    const auto in = j.at("in_dim").get<std::size_t>();
    const auto w = j.at("weights").get<std::vector<double>>();
    auto b = j.at("bias").get<std::vector<double>>();
    if (out == 0 || in == 0 || w.size() != out * in || b.size() != out)
      throw FormatError("model weight arrays do not match declared dimensions");
    Matrix m(out, in);
    std::copy(w.begin(), w.end(), m.values().begin());
    LinearDecoder dec(std::move(m), std::move(b), head_from_string(j.at("head").get<std::string>()));
    return ModelFile{std::move(dec), j.at("epsilon").get<double>(), train_config_from_json(j.at("train_config")),
                     j.at("master_seed").get<std::uint64_t>(), j.value("extra", nlohmann::json::object())};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model document: ") + e.what());
  }
}

}  // namespace hyperlock::nn
