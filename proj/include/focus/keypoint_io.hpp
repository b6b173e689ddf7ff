#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace focus {

inline constexpr std::size_t kPointsPerFrame = 10;

// Point indices 0-4 form the top (head) part, 5-9 the middle (torso) part.
inline constexpr std::size_t kTopBegin = 0;
inline constexpr std::size_t kMidBegin = 5;
inline constexpr std::size_t kPartSize = 5;

inline constexpr int kLabelLow = 0;
inline constexpr int kLabelHigh = 1;

inline constexpr double kDefaultFps = 20.0;

/// Normalized image coordinates with detector confidence. A confidence of 0
/// marks an undetected point, stored as (0, 0, 0).
struct Point {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct KeypointFrame {
  std::int64_t frame_index = 0;
  std::array<Point, kPointsPerFrame> points{};

  friend bool operator==(const KeypointFrame&, const KeypointFrame&) = default;
};

/// One recording session. The label applies to the whole trace; it is absent
/// for unlabeled data that is only run through inference.
struct LabeledTrace {
  std::vector<KeypointFrame> frames;
  std::optional<int> label;
  double fps = kDefaultFps;

  friend bool operator==(const LabeledTrace&, const LabeledTrace&) = default;
};

// Throws InputError describing the first violated invariant.
void validate_point(const Point& point, std::int64_t frame_index, std::size_t point_index);
void validate_trace(const LabeledTrace& trace);

struct ParseOptions {
  // When set these override the header values.
  std::optional<int> label;
  std::optional<double> fps;
  // Used as the prefix of diagnostics, e.g. a file name.
  std::string source = "<input>";
};

/// Reads the canonical line format: a header record followed by one frame
/// record per line. Errors carry the source name and 1-based line number.
LabeledTrace parse_trace(std::istream& input, const ParseOptions& options = {});
LabeledTrace parse_trace(std::string_view text, const ParseOptions& options = {});

void serialize_trace(const LabeledTrace& trace, std::ostream& sink);
std::string serialize_trace(const LabeledTrace& trace);

/// One frame of pose-detector output: each person is a flat list
/// [x0, y0, c0, x1, y1, c1, ...].
struct DetectorRecord {
  std::int64_t frame_index = 0;
  std::vector<std::vector<double>> people;
};

/// Parses a detector JSON document of the form
/// {"people": [{"pose_keypoints_2d": [...]}, ...]}.
DetectorRecord parse_detector_record(std::string_view json_text, std::int64_t frame_index);

struct DetectorOptions {
  // Pixel dimensions used to normalize coordinates. When absent the detector
  // output is taken to be normalized already.
  std::optional<double> image_width;
  std::optional<double> image_height;
};

/// Maps detector keypoints onto the 10 canonical points. mapping[i] is the
/// detector keypoint index feeding canonical point i. Only the first person of
/// each record is used; a missing person or a keypoint with confidence 0
/// becomes (0, 0, 0). Normalized coordinates are clamped into [0, 1].
std::vector<KeypointFrame> adapt_detector_output(std::span<const DetectorRecord> records,
                                                 std::span<const int> mapping,
                                                 const DetectorOptions& options = {});

}  // namespace focus
