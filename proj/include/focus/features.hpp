#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "focus/keypoint_io.hpp"

namespace focus {

inline constexpr std::size_t kFeatureCount = 4;
using FeatureArray = std::array<double, kFeatureCount>;

/// Per-window spread of the top and middle body parts.
struct FeatureVector {
  std::size_t window_index = 0;
  double t_seconds = 0.0;  // window end: window_frames * (window_index + 1) / fps
  double sigma_top_x = 0.0;
  double sigma_top_y = 0.0;
  double sigma_mid_x = 0.0;
  double sigma_mid_y = 0.0;

  FeatureArray values() const { return {sigma_top_x, sigma_top_y, sigma_mid_x, sigma_mid_y}; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct FeatureWindowConfig {
  std::size_t window_frames = 50;
  std::size_t min_valid_samples = 2;
  double confidence_threshold = 0.1;

  void validate() const;
};

struct FeatureExtraction {
  std::vector<FeatureVector> windows;
  std::size_t dropped_windows = 0;  // windows with a pool below min_valid_samples
};

// Population standard deviation (divisor n). Requires at least two values.
double population_std(std::span<const double> values);

/// Splits the trace into non-overlapping windows of window_frames frames (a
/// trailing partial window is ignored). In each window the x (resp. y)
/// coordinates of all confident points in a part are pooled across every
/// frame, and the pool's population standard deviation is the feature.
FeatureExtraction extract_features(const LabeledTrace& trace, const FeatureWindowConfig& config);

/// bins x bins occupancy counts over [0,1]^2, row-major with y as the row.
struct Histogram2D {
  std::size_t bins = 0;
  std::vector<std::uint64_t> counts;

  std::uint64_t at(std::size_t x_bin, std::size_t y_bin) const { return counts[y_bin * bins + x_bin]; }
  std::uint64_t total() const;
  std::size_t occupied_cells() const;
};

// Bin of a coordinate in [0,1]; 1.0 lands in the last bin.
std::size_t unit_bin(double value, std::size_t bins);

Histogram2D emit_2d_histogram(const LabeledTrace& trace, std::size_t bins,
                              double confidence_threshold = 0.1);

// A feature row as stored in the feature file.
struct FeatureRow {
  FeatureVector features;
  std::optional<int> label;

  friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

inline constexpr const char* kFeatureCsvHeader =
    "window_index,t_seconds,sigma_top_x,sigma_top_y,sigma_mid_x,sigma_mid_y,label";

// Lines starting with '#' are comments; `comment` (if non-empty) is written as one.
void write_feature_csv(std::ostream& out, std::span<const FeatureRow> rows,
                       const std::string& comment = {});
std::vector<FeatureRow> read_feature_csv(std::istream& in, const std::string& source = "<features>");

void write_histogram2d_csv(std::ostream& out, const Histogram2D& histogram);

}  // namespace focus
