#include "focus/mlp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "focus/errors.hpp"
#include "focus/rng.hpp"
#include "focus/text_format.hpp"

namespace focus {

bool MlpParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw DataError("learning_rate must be positive");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw DataError("beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw DataError("beta2 must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw DataError("epsilon must be positive");
  if (epochs == 0) throw DataError("epochs must be positive");
  if (batch_size == 0) throw DataError("batch_size must be positive");
  if (folds == 0) throw DataError("folds must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) throw DataError("threshold must lie in (0, 1)");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (auto i : indices) out.push_back(features[i], labels[i]);
  return out;
}

void Dataset::validate() const {
  if (features.size() != labels.size()) throw DataError("feature/label count mismatch");
  for (std::size_t i = 0; i < size(); ++i) {
    if (labels[i] != kLabelLow && labels[i] != kLabelHigh) {
      throw DataError("labels must be 0 or 1");
    }
    for (double v : features[i]) {
      if (!std::isfinite(v)) throw DataError("non-finite feature value");
    }
  }
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

struct Activations {
  std::array<double, kHidden1> z1{};
  std::array<double, kHidden1> a1{};
  std::array<double, kHidden2> z2{};
  std::array<double, kHidden2> a2{};
  double z3 = 0.0;
};

Activations run_layers(const MlpModel& m, const FeatureArray& x) {
  Activations act;
  for (std::size_t i = 0; i < kHidden1; ++i) {
    double sum = m.b1(i);
    for (std::size_t j = 0; j < kInputs; ++j) sum += m.w1(i, j) * x[j];
    act.z1[i] = sum;
    act.a1[i] = sum > 0.0 ? sum : 0.0;
  }
  for (std::size_t i = 0; i < kHidden2; ++i) {
    double sum = m.b2(i);
    for (std::size_t j = 0; j < kHidden1; ++j) sum += m.w2(i, j) * act.a1[j];
    act.z2[i] = sum;
    act.a2[i] = sum > 0.0 ? sum : 0.0;
  }
  double sum = m.b3();
  for (std::size_t j = 0; j < kHidden2; ++j) sum += m.w3(j) * act.a2[j];
  act.z3 = sum;
  return act;
}

// Keeps the probability strictly inside (0, 1) even when the logit saturates.
double open_unit(double p) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - 0x1.0p-53;
  return std::clamp(p, lo, hi);
}

double sample_loss(double p, int y) {
  const double pc = std::clamp(p, kLossClamp, 1.0 - kLossClamp);
  return y == kLabelHigh ? -std::log(pc) : -std::log1p(-pc);
}

}  // namespace

double forward(const MlpModel& model, const FeatureArray& x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("non-finite network input");
  }
  return open_unit(sigmoid(run_layers(model, x).z3));
}

double bce_loss(std::span<const double> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw DataError("prediction/label count mismatch");
  }
  if (predictions.empty()) throw DataError("loss of an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    total += sample_loss(predictions[i], labels[i]);
  }
  return total / static_cast<double>(predictions.size());
}

BackwardResult backward(const MlpModel& model, std::span<const FeatureArray> features,
                        std::span<const int> labels) {
  if (features.size() != labels.size()) throw DataError("feature/label count mismatch");
  if (features.empty()) throw DataError("backward pass on an empty batch");

  BackwardResult result;
  MlpGradient& g = result.gradient;
  const double inv_n = 1.0 / static_cast<double>(features.size());

  for (std::size_t s = 0; s < features.size(); ++s) {
    const auto& x = features[s];
    const auto act = run_layers(model, x);
    const double p = sigmoid(act.z3);
    const int y = labels[s];
    result.loss += sample_loss(p, y) * inv_n;

    // d(loss)/d(z3) = p - y inside the clamp; the clamped region is flat.
    if (!(p > kLossClamp && p < 1.0 - kLossClamp)) continue;
    const double dz3 = (p - static_cast<double>(y)) * inv_n;

    g.b3() += dz3;
    std::array<double, kHidden2> dz2{};
    for (std::size_t j = 0; j < kHidden2; ++j) {
      g.w3(j) += dz3 * act.a2[j];
      dz2[j] = act.z2[j] > 0.0 ? dz3 * model.w3(j) : 0.0;
    }
    std::array<double, kHidden1> da1{};
    for (std::size_t i = 0; i < kHidden2; ++i) {
      if (dz2[i] == 0.0) continue;
      g.b2(i) += dz2[i];
      for (std::size_t j = 0; j < kHidden1; ++j) {
        g.w2(i, j) += dz2[i] * act.a1[j];
        da1[j] += model.w2(i, j) * dz2[i];
      }
    }
    for (std::size_t i = 0; i < kHidden1; ++i) {
      const double dz1 = act.z1[i] > 0.0 ? da1[i] : 0.0;
      if (dz1 == 0.0) continue;
      g.b1(i) += dz1;
      for (std::size_t j = 0; j < kInputs; ++j) g.w1(i, j) += dz1 * x[j];
    }
  }
  if (!g.all_finite() || !std::isfinite(result.loss)) {
    throw NumericError("non-finite gradient; parameters have diverged");
  }
  return result;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const TrainConfig& config) {
  if (grads.size() != params.size()) throw DataError("gradient shape does not match parameters");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DataError("optimizer state shape does not match parameters");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

MlpModel initialize_model(std::uint64_t seed) {
  Rng rng(seed);
  MlpModel m;
  const double limit1 = std::sqrt(6.0 / static_cast<double>(kInputs));
  for (std::size_t i = 0; i < kHidden1; ++i)
    for (std::size_t j = 0; j < kInputs; ++j) m.w1(i, j) = rng.uniform(-limit1, limit1);
  const double limit2 = std::sqrt(6.0 / static_cast<double>(kHidden1));
  for (std::size_t i = 0; i < kHidden2; ++i)
    for (std::size_t j = 0; j < kHidden1; ++j) m.w2(i, j) = rng.uniform(-limit2, limit2);
  const double limit3 = std::sqrt(6.0 / static_cast<double>(kHidden2 + kOutputs));
  for (std::size_t j = 0; j < kHidden2; ++j) m.w3(j) = rng.uniform(-limit3, limit3);
  return m;
}

TrainResult train(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  dataset.validate();
  if (dataset.size() == 0) throw DataError("cannot train on an empty dataset");

  TrainResult result;
  const auto positives = std::count(dataset.labels.begin(), dataset.labels.end(), kLabelHigh);
  if (positives == 0 || static_cast<std::size_t>(positives) == dataset.size()) {
    result.warnings.push_back("training data contains a single class");
  }

  result.model = initialize_model(derive_seed(config.seed, 0));
  Rng shuffler(derive_seed(config.seed, 1));
  AdamState state;

  const std::size_t n = dataset.size();
  const std::size_t batch = std::min(config.batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<FeatureArray> xs;
  std::vector<int> ys;
  xs.reserve(batch);
  ys.reserve(batch);

  result.loss_history.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffler.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(start + batch, n);
      xs.clear();
      ys.clear();
      for (std::size_t k = start; k < end; ++k) {
        xs.push_back(dataset.features[order[k]]);
        ys.push_back(dataset.labels[order[k]]);
      }
      const auto step = backward(result.model, xs, ys);
      epoch_loss += step.loss * static_cast<double>(end - start);
      adam_step(result.model.flat(), step.gradient.flat(), state, config);
      if (!result.model.all_finite()) {
        throw NumericError("parameters became non-finite at epoch " + std::to_string(epoch));
      }
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(n));
  }
  return result;
}

double accuracy(const MlpModel& model, const Dataset& dataset, double threshold) {
  if (dataset.size() == 0) throw DataError("accuracy of an empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int predicted = forward(model, dataset.features[i]) >= threshold ? kLabelHigh : kLabelLow;
    if (predicted == dataset.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

RecognitionSeries predict_series(const MlpModel& model, std::span<const FeatureVector> features) {
  RecognitionSeries series;
  series.values.reserve(features.size());
  for (const auto& f : features) {
    series.window_index.push_back(f.window_index);
    series.t_seconds.push_back(f.t_seconds);
    series.values.push_back(forward(model, f.values()));
  }
  return series;
}

FoldAssignment make_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed) {
  if (folds == 0) throw DataError("fold count must be positive");
  if (folds > labels.size()) {
    throw DataError("fold count " + std::to_string(folds) + " exceeds dataset size " +
                    std::to_string(labels.size()));
  }
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[labels[i] == kLabelHigh ? 1 : 0].push_back(i);
  }

  FoldAssignment out;
  out.folds.resize(folds);
  Rng rng(derive_seed(seed, 0xF01D));
  out.stratified = std::all_of(by_class.begin(), by_class.end(), [&](const auto& members) {
    return members.empty() || members.size() >= folds;
  });

  std::size_t cursor = 0;
  const auto deal = [&](std::vector<std::size_t>& members) {
    rng.shuffle(std::span<std::size_t>(members));
    for (auto index : members) {
      out.folds[cursor].push_back(index);
      cursor = (cursor + 1) % folds;
    }
  };
  if (out.stratified) {
    for (auto& members : by_class) deal(members);
  } else {
    std::vector<std::size_t> all(labels.size());
    std::iota(all.begin(), all.end(), 0);
    deal(all);
  }
  for (auto& fold : out.folds) std::sort(fold.begin(), fold.end());
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

KFoldResult kfold_cv(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  dataset.validate();
  if (config.folds < 2) throw DataError("k-fold cross validation needs at least 2 folds");

  KFoldResult result;
  result.assignment = make_folds(dataset.labels, config.folds, config.seed);
  if (!result.assignment.stratified) {
    result.warnings.push_back("a class has fewer members than folds; using unstratified folds");
  }

  for (std::size_t k = 0; k < config.folds; ++k) {
    std::vector<std::size_t> train_idx;
    for (std::size_t j = 0; j < config.folds; ++j) {
      if (j == k) continue;
      const auto& fold = result.assignment.folds[j];
      train_idx.insert(train_idx.end(), fold.begin(), fold.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    TrainConfig fold_config = config;
    fold_config.seed = config.seed + k;
    auto trained = train(dataset.subset(train_idx), fold_config);
    for (auto& w : trained.warnings) result.warnings.push_back("fold " + std::to_string(k) + ": " + w);
    result.fold_accuracies.push_back(
        accuracy(trained.model, dataset.subset(result.assignment.folds[k]), config.threshold));
  }
  result.median_accuracy = median(result.fold_accuracies);
  return result;
}

namespace {

constexpr const char* kModelMagic = "focus-mlp-model";

struct Block {
  const char* name;
  std::size_t offset;
  std::size_t count;
};

constexpr std::array<Block, 6> kBlocks{{
    {"W1", MlpParams::kW1, kHidden1 * kInputs},
    {"b1", MlpParams::kB1, kHidden1},
    {"W2", MlpParams::kW2, kHidden2 * kHidden1},
    {"b2", MlpParams::kB2, kHidden2},
    {"W3", MlpParams::kW3, kOutputs * kHidden2},
    {"b3", MlpParams::kB3, kOutputs},
}};

std::string architecture_line() {
  return "architecture " + std::to_string(kInputs) + " " + std::to_string(kHidden1) + " " +
         std::to_string(kHidden2) + " " + std::to_string(kOutputs);
}

constexpr const char* kActivationsLine = "activations relu relu sigmoid";

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::vector<std::string> expect(const std::string& key) {
    std::string line;
    if (!std::getline(in_, line)) {
      throw InputError("corrupt model file: truncated before '" + key + "'");
    }
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string token; fields >> token;) tokens.push_back(token);
    if (tokens.empty() || tokens.front() != key) {
      throw InputError("corrupt model file: expected '" + key + "'");
    }
    tokens.erase(tokens.begin());
    return tokens;
  }

  std::string single(const std::string& key) {
    auto tokens = expect(key);
    if (tokens.size() != 1) throw InputError("corrupt model file: bad '" + key + "' line");
    return tokens.front();
  }

 private:
  std::istream& in_;
};

std::size_t parse_count(const std::string& token) {
  const auto v = parse_integer(token);
  if (v < 0) throw InputError("negative count in model file");
  return static_cast<std::size_t>(v);
}

}  // namespace

void save_model(const MlpModel& model, const TrainConfig& config, std::ostream& out) {
  if (!model.all_finite()) throw NumericError("refusing to save a non-finite model");
  out << kModelMagic << '\n';
  out << "format_version " << kModelFormatVersion << '\n';
  out << architecture_line() << '\n';
  out << kActivationsLine << '\n';
  out << "learning_rate " << format_double(config.learning_rate) << '\n';
  out << "beta1 " << format_double(config.beta1) << '\n';
  out << "beta2 " << format_double(config.beta2) << '\n';
  out << "epsilon " << format_double(config.epsilon) << '\n';
  out << "epochs " << config.epochs << '\n';
  out << "batch_size " << config.batch_size << '\n';
  out << "folds " << config.folds << '\n';
  out << "threshold " << format_double(config.threshold) << '\n';
  out << "seed " << config.seed << '\n';
  const auto flat = model.flat();
  for (const auto& block : kBlocks) {
    out << block.name;
    for (std::size_t i = 0; i < block.count; ++i) out << ' ' << format_double(flat[block.offset + i]);
    out << '\n';
  }
  out << "end\n";
}

std::string save_model(const MlpModel& model, const TrainConfig& config) {
  std::ostringstream out;
  save_model(model, config, out);
  return out.str();
}

StoredModel load_model(std::istream& in) {
  LineReader reader(in);
  std::string magic;
  if (!std::getline(in, magic) || trim(magic) != kModelMagic) {
    throw InputError("corrupt model file: missing header");
  }
  const auto version = parse_integer(reader.single("format_version"));
  if (version != kModelFormatVersion) {
    throw DataError("unsupported model format version " + std::to_string(version));
  }
  const auto arch = reader.expect("architecture");
  const std::array<std::size_t, 4> expected{kInputs, kHidden1, kHidden2, kOutputs};
  bool arch_ok = arch.size() == expected.size();
  for (std::size_t i = 0; arch_ok && i < expected.size(); ++i) {
    arch_ok = parse_count(arch[i]) == expected[i];
  }
  if (!arch_ok) {
    std::string got;
    for (const auto& a : arch) got += " " + a;
    throw DataError("model architecture mismatch: expected 4 8 8 1, got" + got);
  }
  const auto acts = reader.expect("activations");
  if (acts != std::vector<std::string>{"relu", "relu", "sigmoid"}) {
    throw DataError("model activation mismatch");
  }

  StoredModel stored;
  try {
    auto& c = stored.config;
    c.learning_rate = parse_double(reader.single("learning_rate"));
    c.beta1 = parse_double(reader.single("beta1"));
    c.beta2 = parse_double(reader.single("beta2"));
    c.epsilon = parse_double(reader.single("epsilon"));
    c.epochs = parse_count(reader.single("epochs"));
    c.batch_size = parse_count(reader.single("batch_size"));
    c.folds = parse_count(reader.single("folds"));
    c.threshold = parse_double(reader.single("threshold"));
    const auto seed = reader.single("seed");
    std::uint64_t seed_value = 0;
    auto [end, ec] = std::from_chars(seed.data(), seed.data() + seed.size(), seed_value);
    if (ec != std::errc() || end != seed.data() + seed.size()) throw InputError("bad seed");
    c.seed = seed_value;

    auto flat = stored.model.flat();
    for (const auto& block : kBlocks) {
      const auto values = reader.expect(block.name);
      if (values.size() != block.count) {
        if (in.peek() == std::char_traits<char>::eof()) {
          throw InputError(std::string("corrupt model file: truncated inside ") + block.name);
        }
        throw DataError(std::string("model shape mismatch in ") + block.name);
      }
      for (std::size_t i = 0; i < block.count; ++i) flat[block.offset + i] = parse_double(values[i]);
    }
    reader.expect("end");
  } catch (const DataError&) {
    throw;
  } catch (const InputError& e) {
    const std::string what = e.what();
    if (what.rfind("corrupt model file", 0) == 0) throw;
    throw InputError("corrupt model file: " + what);
  }
  if (!stored.model.all_finite()) throw InputError("corrupt model file: non-finite parameter");
  return stored;
}

StoredModel load_model(std::string_view text) {
  std::istringstream in{std::string(text)};
  return load_model(in);
}

}  // namespace focus
