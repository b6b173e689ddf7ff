#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "focus/features.hpp"

namespace focus {

inline constexpr std::size_t kInputs = kFeatureCount;
inline constexpr std::size_t kHidden1 = 8;
inline constexpr std::size_t kHidden2 = 8;
inline constexpr std::size_t kOutputs = 1;

/// All weights and biases of the 4-8-8-1 network in one contiguous block:
/// W1 (8x4, row-major), b1, W2 (8x8), b2, W3 (1x8), b3. Gradients use the
/// same type so the optimizer can treat both as flat vectors.
class MlpParams {
 public:
  static constexpr std::size_t kW1 = 0;
  static constexpr std::size_t kB1 = kW1 + kHidden1 * kInputs;
  static constexpr std::size_t kW2 = kB1 + kHidden1;
  static constexpr std::size_t kB2 = kW2 + kHidden2 * kHidden1;
  static constexpr std::size_t kW3 = kB2 + kHidden2;
  static constexpr std::size_t kB3 = kW3 + kOutputs * kHidden2;
  static constexpr std::size_t kCount = kB3 + kOutputs;

  double& w1(std::size_t row, std::size_t col) { return values_[kW1 + row * kInputs + col]; }
  double w1(std::size_t row, std::size_t col) const { return values_[kW1 + row * kInputs + col]; }
  double& b1(std::size_t i) { return values_[kB1 + i]; }
  double b1(std::size_t i) const { return values_[kB1 + i]; }
  double& w2(std::size_t row, std::size_t col) { return values_[kW2 + row * kHidden1 + col]; }
  double w2(std::size_t row, std::size_t col) const { return values_[kW2 + row * kHidden1 + col]; }
  double& b2(std::size_t i) { return values_[kB2 + i]; }
  double b2(std::size_t i) const { return values_[kB2 + i]; }
  double& w3(std::size_t col) { return values_[kW3 + col]; }
  double w3(std::size_t col) const { return values_[kW3 + col]; }
  double& b3() { return values_[kB3]; }
  double b3() const { return values_[kB3]; }

  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }

  bool all_finite() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;

 private:
  std::array<double, kCount> values_{};
};

using MlpModel = MlpParams;
using MlpGradient = MlpParams;

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::size_t folds = 5;
  double threshold = 0.5;

  void validate() const;
};

/// Adam moment accumulators. Empty vectors mean "fresh": they are sized to the
/// parameter block on the first step.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

/// Training samples; labels are 0 (low) or 1 (high).
struct Dataset {
  std::vector<FeatureArray> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  void push_back(const FeatureArray& x, int y) {
    features.push_back(x);
    labels.push_back(y);
  }
  Dataset subset(std::span<const std::size_t> indices) const;
  void validate() const;
};

inline constexpr double kLossClamp = 1e-12;

double sigmoid(double z);
double forward(const MlpModel& model, const FeatureArray& x);

/// Mean binary cross-entropy with predictions clamped to [1e-12, 1 - 1e-12].
double bce_loss(std::span<const double> predictions, std::span<const int> labels);

struct BackwardResult {
  MlpGradient gradient;
  double loss = 0.0;
};

/// Analytic gradient of the mean clamped BCE loss over the batch. ReLU has
/// derivative 0 at exactly 0; samples whose prediction sits in the clamped
/// region contribute no gradient, matching the clamped loss.
BackwardResult backward(const MlpModel& model, std::span<const FeatureArray> features,
                        std::span<const int> labels);

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const TrainConfig& config);

/// He-uniform weights for the ReLU layers, Glorot-uniform for the sigmoid
/// output layer, zero biases.
MlpModel initialize_model(std::uint64_t seed);

struct TrainResult {
  MlpModel model;
  std::vector<double> loss_history;  // mean training loss per epoch
  std::vector<std::string> warnings;
};

TrainResult train(const Dataset& dataset, const TrainConfig& config);

double accuracy(const MlpModel& model, const Dataset& dataset, double threshold = 0.5);

struct RecognitionSeries {
  std::vector<std::size_t> window_index;
  std::vector<double> t_seconds;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

RecognitionSeries predict_series(const MlpModel& model, std::span<const FeatureVector> features);

struct FoldAssignment {
  std::vector<std::vector<std::size_t>> folds;  // sample indices per fold
  bool stratified = true;
};

/// Stratified when every class has at least `folds` members: each class is
/// shuffled and dealt round-robin, so per-class fold sizes differ by at most 1.
FoldAssignment make_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed);

struct KFoldResult {
  std::vector<double> fold_accuracies;
  double median_accuracy = 0.0;
  FoldAssignment assignment;
  std::vector<std::string> warnings;
};

/// Fold k trains from seed + k on all other folds and is scored on fold k.
KFoldResult kfold_cv(const Dataset& dataset, const TrainConfig& config);

double median(std::vector<double> values);

inline constexpr int kModelFormatVersion = 1;

struct StoredModel {
  MlpModel model;
  TrainConfig config;
};

void save_model(const MlpModel& model, const TrainConfig& config, std::ostream& out);
std::string save_model(const MlpModel& model, const TrainConfig& config);
StoredModel load_model(std::istream& in);
StoredModel load_model(std::string_view text);

}  // namespace focus
