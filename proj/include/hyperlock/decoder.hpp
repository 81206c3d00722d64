#pragma once

// Single-layer neural decoder with a regression head (RMSE) or a linear + softmax
// head (NLL), trained by mini-batch SGD with patience-based early stopping.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hyperlock/hypervector.hpp"
#include "hyperlock/matrix.hpp"

namespace hyperlock::nn {

enum class Head { Regression, SoftmaxClassifier };

const char* to_string(Head head) noexcept;
Head head_from_string(std::string_view s);

/// Reported NLL never exceeds -ln(kProbabilityFloor).
inline constexpr double kProbabilityFloor = 1e-12;

class LinearDecoder {
 public:
  LinearDecoder(Matrix w, std::vector<double> b, Head head);

  static LinearDecoder zeros(std::size_t out_dim, std::size_t in_dim, Head head);
  /// Weights uniform in [-1/sqrt(in_dim), 1/sqrt(in_dim)], zero bias.
  static LinearDecoder initialized(std::size_t out_dim, std::size_t in_dim, Head head, std::uint64_t seed);

  std::size_t out_dim() const noexcept { return w_.rows(); }
  std::size_t in_dim() const noexcept { return w_.cols(); }
  Head head() const noexcept { return head_; }

  const Matrix& weights() const noexcept { return w_; }
  Matrix& weights() noexcept { return w_; }
  const std::vector<double>& bias() const noexcept { return b_; }
  std::vector<double>& bias() noexcept { return b_; }

  std::vector<double> logits(const hd::BinaryHypervector& x) const;
  std::vector<double> logits(std::span<const double> x) const;

  /// Regression: w x + b. Classifier: softmax(w x + b).
  std::vector<double> forward(const hd::BinaryHypervector& x) const;
  std::vector<double> forward(std::span<const double> x) const;

  /// Argmax class; ties go to the lowest index.
  std::size_t predict(const hd::BinaryHypervector& x) const;

  bool operator==(const LinearDecoder&) const = default;

 private:
  Matrix w_;
  std::vector<double> b_;
  Head head_;
};

std::vector<double> softmax(std::span<const double> logits);
std::size_t argmax(std::span<const double> values);

double loss_rmse(std::span<const double> pred, std::span<const double> target);
double loss_nll(std::span<const double> probs, std::size_t label);

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 60;
  std::size_t patience = 5;
  double min_delta = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep the values of `defaults`.
TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& defaults = {});

struct TrainReport {
  std::size_t epochs_run = 0;
  std::vector<double> train_loss_history;
  std::vector<double> val_loss_history;
  bool stopped_early = false;
  std::size_t best_epoch = 0;  ///< 1-based
};

struct ClassificationSet {
  std::vector<hd::BinaryHypervector> inputs;
  std::vector<std::uint32_t> labels;
  std::size_t size() const noexcept { return inputs.size(); }
};

struct RegressionSet {
  Matrix inputs;   ///< one example per row
  Matrix targets;  ///< one target per row
  std::size_t size() const noexcept { return inputs.rows(); }
};

struct TrainResult {
  LinearDecoder model;
  TrainReport report;
};

/// Mini-batch SGD with seeded per-epoch shuffling. Returns the best-validation weights.
/// Throws DivergenceError on a non-finite loss.
TrainResult train(LinearDecoder init, const ClassificationSet& train_set, const ClassificationSet& val_set,
                  const TrainConfig& cfg);
TrainResult train(LinearDecoder init, const RegressionSet& train_set, const RegressionSet& val_set,
                  const TrainConfig& cfg);

double mean_loss(const LinearDecoder& model, const ClassificationSet& set);
double mean_loss(const LinearDecoder& model, const RegressionSet& set);
double accuracy(const LinearDecoder& model, const ClassificationSet& set);

/// Mean per-example RMSE; optionally with predictions clamped to [0, 1].
double mean_rmse(const LinearDecoder& model, const RegressionSet& set, bool clamp_unit);

// Gradient verification -----------------------------------------------------

struct GradientExample {
  std::vector<double> input;
  std::size_t label = 0;       ///< classifier head
  std::vector<double> target;  ///< regression head
};

struct Gradient {
  Matrix dw;
  std::vector<double> db;
  double norm() const;
};

double example_loss(const LinearDecoder& model, const GradientExample& ex);
Gradient analytic_gradient(const LinearDecoder& model, const GradientExample& ex);

/// Max relative error between the analytic gradient and central differences of
/// step h over every weight and bias.
double grad_check(const LinearDecoder& model, const GradientExample& ex, double h);

// Closed-form regression fit --------------------------------------------------

struct RidgeReport {
  std::vector<double> lambdas;
  std::vector<double> val_rmse;  ///< NaN where the solve failed
  double chosen_lambda = 0.0;
};

struct RidgeResult {
  LinearDecoder model;
  RidgeReport report;
};

/// Regression decoder minimising mean squared error + lambda * n * ||W||^2 (bias
/// unpenalised); lambda chosen by mean validation RMSE.
RidgeResult fit_ridge(const RegressionSet& train_set, const RegressionSet& val_set,
                      std::span<const double> lambdas);

// Model file ----------------------------------------------------------------

struct ModelFile {
  LinearDecoder decoder;
  double epsilon = 0.0;
  TrainConfig train;
  std::uint64_t master_seed = 0;
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json to_json(const ModelFile& model);
ModelFile model_from_json(const nlohmann::json& j);

}  // namespace hyperlock::nn
