#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "focus/mlp.hpp"

namespace focus {

/// Scalar filter parameters. The defaults model a level that stays constant
/// between windows with no process noise, observed directly.
struct KalmanParams {
  double transition = 1.0;          // state carried from one window to the next
  double process_noise = 0.0;       // variance added by each prediction
  double observation_scale = 1.0;   // measurement = scale * state + noise
  double measurement_noise = 0.1;   // measurement variance
  double initial_estimate = 0.5;
  double initial_covariance = 0.9;

  void validate() const;
};

struct KalmanState {
  double estimate = 0.0;
  double covariance = 0.0;
  std::uint64_t step = 0;
  double gain = 0.0;  // gain applied on the most recent step
};

KalmanState initial_state(const KalmanParams& params);

/// One predict + update cycle consuming a single measurement.
KalmanState kf_step(const KalmanState& state, double measurement, const KalmanParams& params);

struct EstimationSeries {
  std::vector<std::size_t> window_index;
  std::vector<double> t_seconds;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// Filters the recognition series from the initial state, one step per
/// measurement; returns the post-update estimates.
EstimationSeries run_filter(const RecognitionSeries& series, const KalmanParams& params);

// Rows of window_index,t_seconds,s_r[,s_e]. s_e is absent for recognition-only files.
struct SeriesTable {
  RecognitionSeries recognition;
  std::optional<EstimationSeries> estimation;
};

inline constexpr const char* kRecognitionCsvHeader = "window_index,t_seconds,s_r";
inline constexpr const char* kSeriesCsvHeader = "window_index,t_seconds,s_r,s_e";

void write_recognition_csv(std::ostream& out, const RecognitionSeries& series,
                           const std::string& comment = {});
void write_series_csv(std::ostream& out, const RecognitionSeries& recognition,
                      const EstimationSeries& estimation, const std::string& comment = {});
SeriesTable read_series_csv(std::istream& in, const std::string& source = "<series>");

}  // namespace focus
