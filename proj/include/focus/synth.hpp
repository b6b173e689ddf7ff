#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "focus/keypoint_io.hpp"

namespace focus {

// Seated upper body facing the camera: points 0-4 are the head (nose, eyes,
// ears), points 5-9 the torso (neck, shoulders, elbows).
std::array<Point, kPointsPerFrame> default_base_pose();

/// Surrogate movement model. Each coordinate is the base position plus
/// independent Gaussian jitter per frame; low-concentration traces add a slow
/// sinusoidal sway shared by all points.
struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t frames = 100;
  double fps = kDefaultFps;
  std::array<Point, kPointsPerFrame> base_pose = default_base_pose();
  double jitter_high = 0.002;
  double jitter_low = 0.010;
  double drift_low = 0.02;          // sway amplitude
  double drift_period_seconds = 10.0;

  void validate() const;
};

LabeledTrace generate_trace(const SynthConfig& config, int label);

/// traces_per_class traces of each label, interleaved low/high. Trace k uses
/// seed derive_seed(config.seed, k).
std::vector<LabeledTrace> generate_dataset(const SynthConfig& config, std::size_t traces_per_class);

}  // namespace focus
