#include "focus/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "focus/errors.hpp"
#include "focus/rng.hpp"
#include "focus/text_format.hpp"

namespace focus {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kTrainSeedStream = 1;
constexpr std::uint64_t kSynthSeedStream = 2;

// Applies each present key through its handler; rejects keys without one.
void apply_section(const json& section, const std::string& name,
                   const std::map<std::string, std::function<void(const json&)>>& handlers) {
  if (!section.is_object()) throw InputError("config section '" + name + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    const auto it = handlers.find(key);
    if (it == handlers.end()) {
      throw InputError("unknown config key '" + (name.empty() ? key : name + "." + key) + "'");
    }
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw InputError("config key '" + key + "': " + e.what());
    }
  }
}

template <typename T>
std::function<void(const json&)> set(T& target) {
  return [&target](const json& value) {
    if constexpr (std::is_floating_point_v<T>) {
      if (!value.is_number()) throw InputError("expected a number");
    } else {
      if (!value.is_number_unsigned()) throw InputError("expected a non-negative integer");
    }
    target = value.get<T>();
  };
}

std::string comment_line(const PipelineConfig& config) { return "config " + config.to_json(); }

LabeledTrace read_trace_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open trace '" + path.string() + "'");
  ParseOptions options;
  options.source = path.string();
  return parse_trace(in, options);
}

std::vector<FeatureRow> read_feature_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open feature file '" + path.string() + "'");
  return read_feature_csv(in, path.string());
}

SeriesTable read_series_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open series file '" + path.string() + "'");
  return read_series_csv(in, path.string());
}

StoredModel read_model_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model '" + path.string() + "'");
  return load_model(in);
}

// Histogram, fit and fit-curve files for an estimation series.
struct FitOutputs {
  std::optional<BimodalFit> fit;
  std::string status;
  std::string report;
  std::string curve;
  std::string histogram;
};

FitOutputs fit_estimates(const std::vector<double>& values, const PipelineConfig& config) {
  FitOutputs out;
  const auto echo = config.to_json();
  if (values.empty()) {
    out.status = "empty series";
    out.report = fit_failure_json(out.status, nullptr, echo);
    return out;
  }
  const auto hist = build_histogram(values, config.fit.bins);
  std::ostringstream hist_csv;
  write_histogram_csv(hist_csv, hist);
  out.histogram = hist_csv.str();
  if (hist.nonzero_bins() < 6) {
    out.status = "fewer than 6 nonzero bins";
    out.report = fit_failure_json(out.status, &hist, echo);
    return out;
  }
  out.fit = fit_bimodal(hist, std::nullopt, config.fit);
  out.status = "ok";
  out.report = fit_report_json(*out.fit, hist, echo);
  std::ostringstream curve;
  write_fit_curve_csv(curve, out.fit->params);
  out.curve = curve.str();
  return out;
}

}  // namespace

void PipelineConfig::derive_seeds() {
  train.seed = derive_seed(seed, kTrainSeedStream);
  synth.seed = derive_seed(seed, kSynthSeedStream);
}

void PipelineConfig::validate() const {
  features.validate();
  if (histogram2d_bins == 0) throw DataError("histogram2d_bins must be positive");
  train.validate();
  kalman.validate();
  fit.validate();
  synth.validate();
  if (traces_per_class == 0) throw DataError("traces_per_class must be positive");
}

std::string PipelineConfig::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["features"] = {{"window_frames", features.window_frames},
                   {"min_valid_samples", features.min_valid_samples},
                   {"confidence_threshold", features.confidence_threshold},
                   {"histogram2d_bins", histogram2d_bins}};
  j["train"] = {{"learning_rate", train.learning_rate}, {"beta1", train.beta1},
                {"beta2", train.beta2},                 {"epsilon", train.epsilon},
                {"epochs", train.epochs},               {"batch_size", train.batch_size},
                {"folds", train.folds},                 {"threshold", train.threshold}};
  j["kalman"] = {{"transition", kalman.transition},
                 {"process_noise", kalman.process_noise},
                 {"observation_scale", kalman.observation_scale},
                 {"measurement_noise", kalman.measurement_noise},
                 {"initial_estimate", kalman.initial_estimate},
                 {"initial_covariance", kalman.initial_covariance}};
  j["fit"] = {{"bins", fit.bins},
              {"max_iterations", fit.max_iterations},
              {"relative_sse_tolerance", fit.relative_sse_tolerance},
              {"step_tolerance", fit.step_tolerance},
              {"min_width", fit.min_width},
              {"min_amplitude", fit.min_amplitude},
              {"initial_damping", fit.initial_damping}};
  ordered_json pose = ordered_json::array();
  for (const auto& p : synth.base_pose) pose.push_back({p.x, p.y, p.confidence});
  j["synth"] = {{"frames", synth.frames},
                {"fps", synth.fps},
                {"jitter_high", synth.jitter_high},
                {"jitter_low", synth.jitter_low},
                {"drift_low", synth.drift_low},
                {"drift_period_seconds", synth.drift_period_seconds},
                {"traces_per_class", traces_per_class},
                {"base_pose", pose}};
  return j.dump();
}

PipelineConfig parse_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("malformed config: ") + e.what());
  }
  PipelineConfig c;
  const auto section = [](PipelineConfig& cfg, const std::string& name, const json& value) {
    std::map<std::string, std::function<void(const json&)>> handlers;
    if (name == "features") {
      handlers = {{"window_frames", set(cfg.features.window_frames)},
                  {"min_valid_samples", set(cfg.features.min_valid_samples)},
                  {"confidence_threshold", set(cfg.features.confidence_threshold)},
                  {"histogram2d_bins", set(cfg.histogram2d_bins)}};
    } else if (name == "train") {
      handlers = {{"learning_rate", set(cfg.train.learning_rate)},
                  {"beta1", set(cfg.train.beta1)},
                  {"beta2", set(cfg.train.beta2)},
                  {"epsilon", set(cfg.train.epsilon)},
                  {"epochs", set(cfg.train.epochs)},
                  {"batch_size", set(cfg.train.batch_size)},
                  {"folds", set(cfg.train.folds)},
                  {"threshold", set(cfg.train.threshold)}};
    } else if (name == "kalman") {
      handlers = {{"transition", set(cfg.kalman.transition)},
                  {"process_noise", set(cfg.kalman.process_noise)},
                  {"observation_scale", set(cfg.kalman.observation_scale)},
                  {"measurement_noise", set(cfg.kalman.measurement_noise)},
                  {"initial_estimate", set(cfg.kalman.initial_estimate)},
                  {"initial_covariance", set(cfg.kalman.initial_covariance)}};
    } else if (name == "fit") {
      handlers = {{"bins", set(cfg.fit.bins)},
                  {"max_iterations", set(cfg.fit.max_iterations)},
                  {"relative_sse_tolerance", set(cfg.fit.relative_sse_tolerance)},
                  {"step_tolerance", set(cfg.fit.step_tolerance)},
                  {"min_width", set(cfg.fit.min_width)},
                  {"min_amplitude", set(cfg.fit.min_amplitude)},
                  {"initial_damping", set(cfg.fit.initial_damping)}};
    } else if (name == "synth") {
      handlers = {{"frames", set(cfg.synth.frames)},
                  {"fps", set(cfg.synth.fps)},
                  {"jitter_high", set(cfg.synth.jitter_high)},
                  {"jitter_low", set(cfg.synth.jitter_low)},
                  {"drift_low", set(cfg.synth.drift_low)},
                  {"drift_period_seconds", set(cfg.synth.drift_period_seconds)},
                  {"traces_per_class", set(cfg.traces_per_class)},
                  {"base_pose", [&cfg](const json& v) {
                     if (!v.is_array() || v.size() != kPointsPerFrame) {
                       throw InputError("base_pose must list 10 [x, y, confidence] points");
                     }
                     for (std::size_t i = 0; i < kPointsPerFrame; ++i) {
                       const auto& t = v[i];
                       if (!t.is_array() || t.size() != 3) {
                         throw InputError("base_pose entries must be [x, y, confidence]");
                       }
                       cfg.synth.base_pose[i] = Point{t[0].get<double>(), t[1].get<double>(),
                                                      t[2].get<double>()};
                     }
                   }}};
    }
    apply_section(value, name, handlers);
  };

  apply_section(doc, "",
                {{"seed", set(c.seed)},
                 {"out", [&c](const json& v) {
                    if (!v.is_string()) throw InputError("'out' must be a string");
                    c.out_dir = v.get<std::string>();
                  }},
                 {"features", [&](const json& v) { section(c, "features", v); }},
                 {"train", [&](const json& v) { section(c, "train", v); }},
                 {"kalman", [&](const json& v) { section(c, "kalman", v); }},
                 {"fit", [&](const json& v) { section(c, "fit", v); }},
                 {"synth", [&](const json& v) { section(c, "synth", v); }}});
  c.derive_seeds();
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  try {
    return parse_config(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

PreprocessResult cmd_preprocess(std::span<const fs::path> trace_files, const PipelineConfig& config,
                                const fs::path& out_dir) {
  if (trace_files.empty()) throw InputError("no trace files given");
  PreprocessResult result;
  for (const auto& path : trace_files) {
    const auto trace = read_trace_file(path);
    const auto extraction = extract_features(trace, config.features);
    result.dropped_windows += extraction.dropped_windows;
    for (const auto& fv : extraction.windows) result.rows.push_back(FeatureRow{fv, trace.label});
  }
  std::ostringstream csv;
  write_feature_csv(csv, result.rows, comment_line(config));
  write_file_atomic(out_dir / kFeaturesFile, csv.str());
  return result;
}

TrainReport cmd_train(const fs::path& feature_file, const PipelineConfig& config,
                      const fs::path& out_dir) {
  if (config.train.folds < 2) throw DataError("k-fold cross validation needs at least 2 folds");
  const auto rows = read_feature_file(feature_file);
  Dataset dataset;
  for (const auto& row : rows) {
    if (!row.label) throw DataError("training rows must be labeled");
    dataset.push_back(row.features.values(), *row.label);
  }
  if (dataset.size() == 0) throw DataError("feature file has no rows");
  const auto positives = std::count(dataset.labels.begin(), dataset.labels.end(), kLabelHigh);
  if (positives == 0 || static_cast<std::size_t>(positives) == dataset.size()) {
    throw DataError("training data contains a single class");
  }

  TrainReport report;
  report.kfold = kfold_cv(dataset, config.train);
  report.final_model = train(dataset, config.train);

  std::ostringstream folds;
  folds << "# " << comment_line(config) << '\n' << "fold,accuracy\n";
  for (std::size_t k = 0; k < report.kfold.fold_accuracies.size(); ++k) {
    folds << k << ',' << format_double(report.kfold.fold_accuracies[k]) << '\n';
  }
  folds << "median," << format_double(report.kfold.median_accuracy) << '\n';

  std::ostringstream loss;
  loss << "epoch,loss\n";
  for (std::size_t e = 0; e < report.final_model.loss_history.size(); ++e) {
    loss << e << ',' << format_double(report.final_model.loss_history[e]) << '\n';
  }

  const auto model_text = save_model(report.final_model.model, config.train);
  write_file_atomic(out_dir / kModelFile, model_text);
  write_file_atomic(out_dir / kFoldsFile, folds.str());
  write_file_atomic(out_dir / kLossFile, loss.str());
  return report;
}

RecognitionSeries cmd_recognize(const fs::path& model_file, const fs::path& feature_file,
                                const PipelineConfig& config, const fs::path& out_dir) {
  const auto stored = read_model_file(model_file);
  const auto rows = read_feature_file(feature_file);
  std::vector<FeatureVector> features;
  features.reserve(rows.size());
  for (const auto& row : rows) features.push_back(row.features);
  auto series = predict_series(stored.model, features);
  std::ostringstream csv;
  write_recognition_csv(csv, series, comment_line(config));
  write_file_atomic(out_dir / kRecognitionFile, csv.str());
  return series;
}

EstimationSeries cmd_estimate(const fs::path& series_file, const PipelineConfig& config,
                              const fs::path& out_dir) {
  const auto table = read_series_file(series_file);
  auto estimation = run_filter(table.recognition, config.kalman);
  std::ostringstream csv;
  write_series_csv(csv, table.recognition, estimation, comment_line(config));
  write_file_atomic(out_dir / kSeriesFile, csv.str());
  return estimation;
}

BimodalFit cmd_fit(const fs::path& series_file, const PipelineConfig& config,
                   const fs::path& out_dir) {
  const auto table = read_series_file(series_file);
  if (!table.estimation) throw InputError(series_file.string() + ": no s_e column to fit");
  const auto outputs = fit_estimates(table.estimation->values, config);
  if (!outputs.fit) throw DataError("cannot fit estimation series: " + outputs.status);
  write_file_atomic(out_dir / kHistogramFile, outputs.histogram);
  write_file_atomic(out_dir / kFitCurveFile, outputs.curve);
  write_file_atomic(out_dir / kFitReportFile, outputs.report);
  return *outputs.fit;
}

std::vector<fs::path> cmd_synth(const PipelineConfig& config, const fs::path& out_dir) {
  const auto traces = generate_dataset(config.synth, config.traces_per_class);
  std::vector<fs::path> written;
  written.reserve(traces.size());
  for (std::size_t k = 0; k < traces.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof(name), "trace_%04zu_%s.jsonl", k,
                  *traces[k].label == kLabelHigh ? "high" : "low");
    const auto path = out_dir / kTracesDir / name;
    write_file_atomic(path, serialize_trace(traces[k]));
    written.push_back(path);
  }
  return written;
}

RunResult cmd_run(const fs::path& trace_file, const fs::path& model_file,
                  const PipelineConfig& config, const fs::path& out_dir) {
  const auto stored = read_model_file(model_file);
  const auto trace = read_trace_file(trace_file);

  RunResult result;
  auto extraction = extract_features(trace, config.features);
  if (extraction.windows.empty()) {
    throw DataError(trace_file.string() + ": no complete valid feature window");
  }
  result.features = std::move(extraction.windows);
  result.dropped_windows = extraction.dropped_windows;
  result.recognition = predict_series(stored.model, result.features);
  result.estimation = run_filter(result.recognition, config.kalman);
  auto fit_outputs = fit_estimates(result.estimation.values, config);
  result.fit = fit_outputs.fit;
  result.fit_status = fit_outputs.status;

  std::vector<FeatureRow> rows;
  for (const auto& fv : result.features) rows.push_back(FeatureRow{fv, trace.label});
  std::ostringstream features_csv;
  write_feature_csv(features_csv, rows, comment_line(config));
  std::ostringstream series_csv;
  write_series_csv(series_csv, result.recognition, result.estimation, comment_line(config));
  std::ostringstream hist2d_csv;
  write_histogram2d_csv(hist2d_csv, emit_2d_histogram(trace, config.histogram2d_bins,
                                                      config.features.confidence_threshold));

  write_file_atomic(out_dir / kFeaturesFile, features_csv.str());
  write_file_atomic(out_dir / kSeriesFile, series_csv.str());
  write_file_atomic(out_dir / kHistogram2DFile, hist2d_csv.str());
  write_file_atomic(out_dir / kHistogramFile, fit_outputs.histogram);
  write_file_atomic(out_dir / kFitReportFile, fit_outputs.report);
  if (result.fit) {
    write_file_atomic(out_dir / kFitCurveFile, fit_outputs.curve);
  } else {
    std::error_code ignored;
    fs::remove(out_dir / kFitCurveFile, ignored);
  }
  return result;
}

}  // namespace focus
