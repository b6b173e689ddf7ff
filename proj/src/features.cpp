#include "focus/features.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "focus/errors.hpp"
#include "focus/text_format.hpp"

namespace focus {

void FeatureWindowConfig::validate() const {
  if (window_frames < 2) throw DataError("window_frames must be at least 2");
  if (min_valid_samples < 2) throw DataError("min_valid_samples must be at least 2");
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw DataError("confidence_threshold must lie in [0, 1]");
  }
}

double population_std(std::span<const double> values) {
  if (values.size() < 2) {
    throw DataError("standard deviation needs at least two values");
  }
  // Welford's single-pass recurrence.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (double v : values) {
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  }
  return std::sqrt(std::max(m2, 0.0) / static_cast<double>(n));
}

FeatureExtraction extract_features(const LabeledTrace& trace, const FeatureWindowConfig& config) {
  config.validate();
  validate_trace(trace);

  FeatureExtraction result;
  const std::size_t window_count = trace.frames.size() / config.window_frames;
  std::array<std::vector<double>, kFeatureCount> pools;
  for (auto& pool : pools) pool.reserve(kPartSize * config.window_frames);

  for (std::size_t w = 0; w < window_count; ++w) {
    for (auto& pool : pools) pool.clear();
    const auto first = trace.frames.begin() + static_cast<std::ptrdiff_t>(w * config.window_frames);
    for (auto frame = first; frame != first + static_cast<std::ptrdiff_t>(config.window_frames);
         ++frame) {
      for (std::size_t i = 0; i < kPointsPerFrame; ++i) {
        const Point& p = frame->points[i];
        if (p.confidence < config.confidence_threshold) continue;
        const std::size_t part = i < kMidBegin ? 0 : 2;
        pools[part].push_back(p.x);
        pools[part + 1].push_back(p.y);
      }
    }
    const bool valid = std::all_of(pools.begin(), pools.end(), [&](const auto& pool) {
      return pool.size() >= config.min_valid_samples;
    });
    if (!valid) {
      ++result.dropped_windows;
      continue;
    }
    FeatureVector fv;
    fv.window_index = w;
    fv.t_seconds = static_cast<double>(config.window_frames * (w + 1)) / trace.fps;
    fv.sigma_top_x = population_std(pools[0]);
    fv.sigma_top_y = population_std(pools[1]);
    fv.sigma_mid_x = population_std(pools[2]);
    fv.sigma_mid_y = population_std(pools[3]);
    result.windows.push_back(fv);
  }
  return result;
}

std::uint64_t Histogram2D::total() const {
  std::uint64_t sum = 0;
  for (auto c : counts) sum += c;
  return sum;
}

std::size_t Histogram2D::occupied_cells() const {
  return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
}

std::size_t unit_bin(double value, std::size_t bins) {
  const auto bin = static_cast<std::size_t>(value * static_cast<double>(bins));
  return std::min(bin, bins - 1);
}

Histogram2D emit_2d_histogram(const LabeledTrace& trace, std::size_t bins,
                              double confidence_threshold) {
  if (bins < 1) throw DataError("histogram needs at least one bin");
  if (trace.frames.empty()) throw DataError("cannot histogram an empty trace");
  validate_trace(trace);

  Histogram2D hist;
  hist.bins = bins;
  hist.counts.assign(bins * bins, 0);
  for (const auto& frame : trace.frames) {
    for (const auto& p : frame.points) {
      if (p.confidence < confidence_threshold) continue;
      ++hist.counts[unit_bin(p.y, bins) * bins + unit_bin(p.x, bins)];
    }
  }
  return hist;
}

void write_feature_csv(std::ostream& out, std::span<const FeatureRow> rows,
                       const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << kFeatureCsvHeader << '\n';
  for (const auto& row : rows) {
    const auto& f = row.features;
    out << f.window_index << ',' << format_double(f.t_seconds) << ','
        << format_double(f.sigma_top_x) << ',' << format_double(f.sigma_top_y) << ','
        << format_double(f.sigma_mid_x) << ',' << format_double(f.sigma_mid_y) << ',';
    if (row.label) out << *row.label;
    out << '\n';
  }
}

std::vector<FeatureRow> read_feature_csv(std::istream& in, const std::string& source) {
  std::vector<FeatureRow> rows;
  std::string line;
  std::size_t line_number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_number;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto context = source + ":" + std::to_string(line_number) + ": ";
    if (!have_header) {
      if (text != kFeatureCsvHeader) {
        throw InputError(context + "unexpected feature header");
      }
      have_header = true;
      continue;
    }
    const auto fields = split(text, ',');
    if (fields.size() != 7) {
      throw InputError(context + "expected 7 fields, got " + std::to_string(fields.size()));
    }
    try {
      FeatureRow row;
      const auto index = parse_integer(fields[0]);
      if (index < 0) throw InputError("negative window index");
      row.features.window_index = static_cast<std::size_t>(index);
      row.features.t_seconds = parse_double(fields[1]);
      row.features.sigma_top_x = parse_double(fields[2]);
      row.features.sigma_top_y = parse_double(fields[3]);
      row.features.sigma_mid_x = parse_double(fields[4]);
      row.features.sigma_mid_y = parse_double(fields[5]);
      for (double v : row.features.values()) {
        if (!std::isfinite(v) || v < 0.0) throw InputError("feature must be finite and >= 0");
      }
      if (!trim(fields[6]).empty()) {
        const auto label = parse_integer(fields[6]);
        if (label != kLabelLow && label != kLabelHigh) throw InputError("label must be 0 or 1");
        row.label = static_cast<int>(label);
      }
      rows.push_back(row);
    } catch (const InputError& e) {
      throw InputError(context + e.what());
    }
  }
  if (!have_header) throw InputError(source + ": missing feature header");
  return rows;
}

void write_histogram2d_csv(std::ostream& out, const Histogram2D& histogram) {
  for (std::size_t y = 0; y < histogram.bins; ++y) {
    for (std::size_t x = 0; x < histogram.bins; ++x) {
      if (x > 0) out << ',';
      out << histogram.at(x, y);
    }
    out << '\n';
  }
}

}  // namespace focus
