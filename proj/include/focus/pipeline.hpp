#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "focus/features.hpp"
#include "focus/kalman.hpp"
#include "focus/mixture_fit.hpp"
#include "focus/mlp.hpp"
#include "focus/synth.hpp"

namespace focus {

namespace fs = std::filesystem;

/// Settings for every stage. Stage seeds are not configurable on their own:
/// they are derived from the master seed by derive_seeds().
struct PipelineConfig {
  std::uint64_t seed = 42;
  FeatureWindowConfig features;
  std::size_t histogram2d_bins = 20;
  TrainConfig train;
  KalmanParams kalman;
  FitOptions fit;
  SynthConfig synth;
  std::size_t traces_per_class = 200;
  std::string out_dir = "out";

  void derive_seeds();
  void validate() const;
  // Compact JSON of every setting except paths; echoed into output files.
  std::string to_json() const;
};

/// Parses a JSON config document. Missing keys keep their defaults; unknown
/// keys are rejected with InputError. Seeds are derived before returning.
PipelineConfig parse_config(std::string_view json_text);
PipelineConfig load_config(const fs::path& path);

// Output file names inside the output directory.
inline constexpr const char* kFeaturesFile = "features.csv";
inline constexpr const char* kModelFile = "model.txt";
inline constexpr const char* kFoldsFile = "folds.csv";
inline constexpr const char* kLossFile = "loss.csv";
inline constexpr const char* kRecognitionFile = "recognition.csv";
inline constexpr const char* kSeriesFile = "series.csv";
inline constexpr const char* kFitReportFile = "fit_report.json";
inline constexpr const char* kFitCurveFile = "fit_curve.csv";
inline constexpr const char* kHistogramFile = "histogram.csv";
inline constexpr const char* kHistogram2DFile = "hist2d.csv";
inline constexpr const char* kTracesDir = "traces";

struct PreprocessResult {
  std::vector<FeatureRow> rows;
  std::size_t dropped_windows = 0;
};

PreprocessResult cmd_preprocess(std::span<const fs::path> trace_files, const PipelineConfig& config,
                                const fs::path& out_dir);

struct TrainReport {
  KFoldResult kfold;
  TrainResult final_model;
};

/// Cross-validates, then trains the final model on all rows. Throws DataError
/// for unlabeled or single-class data and for fewer than 2 folds.
TrainReport cmd_train(const fs::path& feature_file, const PipelineConfig& config,
                      const fs::path& out_dir);

RecognitionSeries cmd_recognize(const fs::path& model_file, const fs::path& feature_file,
                                const PipelineConfig& config, const fs::path& out_dir);

EstimationSeries cmd_estimate(const fs::path& series_file, const PipelineConfig& config,
                              const fs::path& out_dir);

BimodalFit cmd_fit(const fs::path& series_file, const PipelineConfig& config,
                   const fs::path& out_dir);

std::vector<fs::path> cmd_synth(const PipelineConfig& config, const fs::path& out_dir);

struct RunResult {
  std::vector<FeatureVector> features;
  std::size_t dropped_windows = 0;
  RecognitionSeries recognition;
  EstimationSeries estimation;
  std::optional<BimodalFit> fit;  // empty when the series cannot support a fit
  std::string fit_status;
};

/// trace -> features -> recognition -> estimation -> bimodal fit, writing
/// every intermediate file.
RunResult cmd_run(const fs::path& trace_file, const fs::path& model_file,
                  const PipelineConfig& config, const fs::path& out_dir);

}  // namespace focus
