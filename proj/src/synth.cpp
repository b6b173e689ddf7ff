#include "focus/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "focus/errors.hpp"
#include "focus/rng.hpp"

namespace focus {

std::array<Point, kPointsPerFrame> default_base_pose() {
  return {{
      {0.50, 0.30, 1.0},  // nose
      {0.47, 0.28, 1.0},  // right eye
      {0.53, 0.28, 1.0},  // left eye
      {0.44, 0.30, 1.0},  // right ear
      {0.56, 0.30, 1.0},  // left ear
      {0.50, 0.42, 1.0},  // neck
      {0.38, 0.45, 1.0},  // right shoulder
      {0.62, 0.45, 1.0},  // left shoulder
      {0.32, 0.62, 1.0},  // right elbow
      {0.68, 0.62, 1.0},  // left elbow
  }};
}

void SynthConfig::validate() const {
  if (frames == 0) throw DataError("synthetic trace needs at least one frame");
  if (!(fps > 0.0) || !std::isfinite(fps)) throw DataError("fps must be positive");
  if (!(jitter_high >= 0.0) || !(jitter_low >= 0.0)) throw DataError("jitter must be non-negative");
  if (!(jitter_high < jitter_low)) throw DataError("jitter_high must be smaller than jitter_low");
  if (!(drift_low >= 0.0)) throw DataError("drift_low must be non-negative");
  if (!(drift_period_seconds > 0.0)) throw DataError("drift_period_seconds must be positive");
  for (std::size_t i = 0; i < kPointsPerFrame; ++i) validate_point(base_pose[i], 0, i);
}

LabeledTrace generate_trace(const SynthConfig& config, int label) {
  config.validate();
  if (label != kLabelLow && label != kLabelHigh) throw DataError("label must be 0 or 1");

  Rng rng(config.seed);
  const bool low = label == kLabelLow;
  const double jitter = low ? config.jitter_low : config.jitter_high;
  const double sway = low ? config.drift_low : 0.0;
  const double phase_x = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double phase_y = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double omega = 2.0 * std::numbers::pi / config.drift_period_seconds;

  LabeledTrace trace;
  trace.label = label;
  trace.fps = config.fps;
  trace.frames.resize(config.frames);
  for (std::size_t f = 0; f < config.frames; ++f) {
    KeypointFrame& frame = trace.frames[f];
    frame.frame_index = static_cast<std::int64_t>(f);
    const double t = static_cast<double>(f) / config.fps;
    // Vertical sway is half the horizontal amplitude.
    const double dx = sway * std::sin(omega * t + phase_x);
    const double dy = 0.5 * sway * std::sin(omega * t + phase_y);
    for (std::size_t i = 0; i < kPointsPerFrame; ++i) {
      const Point& base = config.base_pose[i];
      Point& p = frame.points[i];
      const double nx = rng.normal();
      const double ny = rng.normal();
      if (base.confidence == 0.0) continue;
      p.x = std::clamp(base.x + dx + jitter * nx, 0.0, 1.0);
      p.y = std::clamp(base.y + dy + jitter * ny, 0.0, 1.0);
      p.confidence = base.confidence;
    }
  }
  return trace;
}

std::vector<LabeledTrace> generate_dataset(const SynthConfig& config, std::size_t traces_per_class) {
  if (traces_per_class == 0) throw DataError("traces_per_class must be positive");
  std::vector<LabeledTrace> traces;
  traces.reserve(2 * traces_per_class);
  for (std::size_t k = 0; k < 2 * traces_per_class; ++k) {
    SynthConfig trace_config = config;
    trace_config.seed = derive_seed(config.seed, k);
    traces.push_back(generate_trace(trace_config, k % 2 == 0 ? kLabelLow : kLabelHigh));
  }
  return traces;
}

}  // namespace focus
