#include "focus/kalman.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "focus/errors.hpp"
#include "focus/text_format.hpp"

namespace focus {

void KalmanParams::validate() const {
  for (double v : {transition, process_noise, observation_scale, measurement_noise,
                   initial_estimate, initial_covariance}) {
    if (!std::isfinite(v)) throw DataError("Kalman parameters must be finite");
  }
  if (!(measurement_noise > 0.0)) throw DataError("measurement_noise must be positive");
  if (!(initial_covariance > 0.0)) throw DataError("initial_covariance must be positive");
  if (process_noise < 0.0) throw DataError("process_noise must be non-negative");
}

KalmanState initial_state(const KalmanParams& params) {
  params.validate();
  return KalmanState{params.initial_estimate, params.initial_covariance, 0, 0.0};
}

KalmanState kf_step(const KalmanState& state, double measurement, const KalmanParams& params) {
  if (!std::isfinite(measurement)) throw InputError("non-finite measurement");
  const double a = params.transition;
  const double h = params.observation_scale;

  const double predicted = a * state.estimate;
  const double predicted_cov = a * state.covariance * a + params.process_noise;

  const double gain = predicted_cov * h / (h * predicted_cov * h + params.measurement_noise);

  KalmanState next;
  next.estimate = predicted + gain * (measurement - h * predicted);
  next.covariance = predicted_cov - gain * h * predicted_cov;
  next.step = state.step + 1;
  next.gain = gain;
  if (!std::isfinite(next.estimate) || !std::isfinite(next.covariance)) {
    throw NumericError("Kalman update produced a non-finite value");
  }
  return next;
}

EstimationSeries run_filter(const RecognitionSeries& series, const KalmanParams& params) {
  EstimationSeries out;
  out.window_index = series.window_index;
  out.t_seconds = series.t_seconds;
  out.values.reserve(series.size());
  auto state = initial_state(params);
  for (double m : series.values) {
    state = kf_step(state, m, params);
    out.values.push_back(state.estimate);
  }
  return out;
}

void write_recognition_csv(std::ostream& out, const RecognitionSeries& series,
                           const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << kRecognitionCsvHeader << '\n';
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << series.window_index[i] << ',' << format_double(series.t_seconds[i]) << ','
        << format_double(series.values[i]) << '\n';
  }
}

void write_series_csv(std::ostream& out, const RecognitionSeries& recognition,
                      const EstimationSeries& estimation, const std::string& comment) {
  if (recognition.size() != estimation.size()) {
    throw DataError("recognition and estimation series differ in length");
  }
  if (!comment.empty()) out << "# " << comment << '\n';
  out << kSeriesCsvHeader << '\n';
  for (std::size_t i = 0; i < recognition.size(); ++i) {
    out << recognition.window_index[i] << ',' << format_double(recognition.t_seconds[i]) << ','
        << format_double(recognition.values[i]) << ',' << format_double(estimation.values[i])
        << '\n';
  }
}

SeriesTable read_series_csv(std::istream& in, const std::string& source) {
  SeriesTable table;
  std::string line;
  std::size_t line_number = 0;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto context = source + ":" + std::to_string(line_number) + ": ";
    if (columns == 0) {
      if (text == kSeriesCsvHeader) {
        columns = 4;
        table.estimation.emplace();
      } else if (text == kRecognitionCsvHeader) {
        columns = 3;
      } else {
        throw InputError(context + "unexpected series header");
      }
      continue;
    }
    const auto fields = split(text, ',');
    if (fields.size() != columns) {
      throw InputError(context + "expected " + std::to_string(columns) + " fields");
    }
    try {
      const auto index = parse_integer(fields[0]);
      if (index < 0) throw InputError("negative window index");
      const double t = parse_double(fields[1]);
      const double s_r = parse_double(fields[2]);
      if (!std::isfinite(s_r)) throw InputError("non-finite s_r");
      table.recognition.window_index.push_back(static_cast<std::size_t>(index));
      table.recognition.t_seconds.push_back(t);
      table.recognition.values.push_back(s_r);
      if (table.estimation) {
        table.estimation->window_index.push_back(static_cast<std::size_t>(index));
        table.estimation->t_seconds.push_back(t);
        table.estimation->values.push_back(parse_double(fields[3]));
      }
    } catch (const InputError& e) {
      throw InputError(context + e.what());
    }
  }
  if (columns == 0) throw InputError(source + ": missing series header");
  return table;
}

}  // namespace focus
