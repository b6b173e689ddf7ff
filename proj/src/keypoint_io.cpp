#include "focus/keypoint_io.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "focus/errors.hpp"

namespace focus {

using nlohmann::json;

namespace {

bool in_unit_interval(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

double as_real(const json& value, const std::string& context) {
  if (!value.is_number()) {
    throw InputError(context + "expected a number");
  }
  return value.get<double>();
}

void check_label(int label) {
  if (label != kLabelLow && label != kLabelHigh) {
    throw InputError("label must be 0 or 1, got " + std::to_string(label));
  }
}

void check_fps(double fps) {
  if (!std::isfinite(fps) || fps <= 0.0) {
    throw InputError("fps must be a positive number");
  }
}

struct Header {
  double fps = kDefaultFps;
  std::optional<int> label;
};

Header parse_header(const json& record, const std::string& context) {
  if (!record.is_object()) {
    throw InputError(context + "header must be an object");
  }
  Header header;
  for (const auto& [key, value] : record.items()) {
    if (key == "fps") {
      header.fps = as_real(value, context + "fps: ");
    } else if (key == "label") {
      if (value.is_null()) {
        header.label.reset();
      } else if (value.is_number_integer()) {
        header.label = value.get<int>();
      } else {
        throw InputError(context + "label must be 0, 1 or null");
      }
    } else {
      throw InputError(context + "unknown header field '" + key + "'");
    }
  }
  if (!record.contains("fps") || !record.contains("label")) {
    throw InputError(context + "header requires 'fps' and 'label'");
  }
  return header;
}

KeypointFrame parse_frame(const json& record, const std::string& context) {
  if (!record.is_object() || record.size() != 2 || !record.contains("frame") ||
      !record.contains("points")) {
    throw InputError(context + "frame record must have exactly 'frame' and 'points'");
  }
  const auto& index = record.at("frame");
  if (!index.is_number_integer() || index.get<std::int64_t>() < 0) {
    throw InputError(context + "'frame' must be a non-negative integer");
  }
  KeypointFrame frame;
  frame.frame_index = index.get<std::int64_t>();

  const auto& points = record.at("points");
  if (!points.is_array() || points.size() != kPointsPerFrame) {
    throw InputError(context + "frame " + std::to_string(frame.frame_index) + ": expected " +
                     std::to_string(kPointsPerFrame) + " points, got " +
                     std::to_string(points.is_array() ? points.size() : 0));
  }
  for (std::size_t i = 0; i < kPointsPerFrame; ++i) {
    const auto& triple = points[i];
    if (!triple.is_array() || triple.size() != 3) {
      throw InputError(context + "point " + std::to_string(i) + " must be [x, y, confidence]");
    }
    Point& p = frame.points[i];
    p.x = as_real(triple[0], context);
    p.y = as_real(triple[1], context);
    p.confidence = as_real(triple[2], context);
    try {
      validate_point(p, frame.frame_index, i);
    } catch (const InputError& e) {
      throw InputError(context + e.what());
    }
  }
  return frame;
}

json frame_to_json(const KeypointFrame& frame) {
  json points = json::array();
  for (const auto& p : frame.points) {
    points.push_back(json::array({p.x, p.y, p.confidence}));
  }
  json record = json::object();
  record["frame"] = frame.frame_index;
  record["points"] = std::move(points);
  return record;
}

}  // namespace

void validate_point(const Point& point, std::int64_t frame_index, std::size_t point_index) {
  const auto name = [&] {
    return "frame " + std::to_string(frame_index) + ", point " + std::to_string(point_index) + ": ";
  };
  if (!in_unit_interval(point.x) || !in_unit_interval(point.y)) {
    throw InputError(name() + "coordinate outside [0, 1]");
  }
  if (!in_unit_interval(point.confidence)) {
    throw InputError(name() + "confidence outside [0, 1]");
  }
}

void validate_trace(const LabeledTrace& trace) {
  check_fps(trace.fps);
  if (trace.label) check_label(*trace.label);
  for (std::size_t f = 0; f < trace.frames.size(); ++f) {
    const auto& frame = trace.frames[f];
    if (frame.frame_index < 0) {
      throw InputError("negative frame index");
    }
    if (f > 0 && frame.frame_index <= trace.frames[f - 1].frame_index) {
      throw InputError("frame index " + std::to_string(frame.frame_index) +
                       " is not strictly increasing");
    }
    for (std::size_t i = 0; i < kPointsPerFrame; ++i) {
      validate_point(frame.points[i], frame.frame_index, i);
    }
  }
}

LabeledTrace parse_trace(std::istream& input, const ParseOptions& options) {
  LabeledTrace trace;
  std::string line;
  std::size_t line_number = 0;
  bool have_header = false;

  while (std::getline(input, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    const auto context = where(options.source, line_number);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError(context + "malformed record (" + e.what() + ")");
    }

    if (!have_header) {
      const auto header = parse_header(record, context);
      trace.fps = header.fps;
      trace.label = header.label;
      have_header = true;
      continue;
    }

    auto frame = parse_frame(record, context);
    if (!trace.frames.empty() && frame.frame_index <= trace.frames.back().frame_index) {
      throw InputError(context + "frame index " + std::to_string(frame.frame_index) +
                       " is not strictly increasing");
    }
    trace.frames.push_back(frame);
  }
  if (input.bad()) {
    throw InputError(options.source + ": read error");
  }
  if (!have_header) {
    throw InputError(options.source + ": missing header record");
  }

  if (options.label) trace.label = options.label;
  if (options.fps) trace.fps = *options.fps;
  try {
    check_fps(trace.fps);
    if (trace.label) check_label(*trace.label);
  } catch (const InputError& e) {
    throw InputError(options.source + ": " + e.what());
  }
  return trace;
}

LabeledTrace parse_trace(std::string_view text, const ParseOptions& options) {
  std::istringstream in{std::string(text)};
  return parse_trace(in, options);
}

void serialize_trace(const LabeledTrace& trace, std::ostream& sink) {
  validate_trace(trace);
  json header = json::object();
  header["fps"] = trace.fps;
  header["label"] = trace.label ? json(*trace.label) : json(nullptr);
  sink << header.dump() << '\n';
  for (const auto& frame : trace.frames) {
    sink << frame_to_json(frame).dump() << '\n';
  }
  if (!sink) {
    throw InputError("failed to write trace");
  }
}

std::string serialize_trace(const LabeledTrace& trace) {
  std::ostringstream out;
  serialize_trace(trace, out);
  return out.str();
}

DetectorRecord parse_detector_record(std::string_view json_text, std::int64_t frame_index) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError("malformed detector record for frame " + std::to_string(frame_index) + " (" +
                     e.what() + ")");
  }
  if (!doc.is_object() || !doc.contains("people") || !doc["people"].is_array()) {
    throw InputError("detector record for frame " + std::to_string(frame_index) +
                     " lacks a 'people' array");
  }
  DetectorRecord record;
  record.frame_index = frame_index;
  for (const auto& person : doc["people"]) {
    std::vector<double> keypoints;
    if (person.contains("pose_keypoints_2d")) {
      const auto& flat = person["pose_keypoints_2d"];
      if (!flat.is_array()) {
        throw InputError("pose_keypoints_2d must be an array");
      }
      keypoints.reserve(flat.size());
      for (const auto& v : flat) {
        keypoints.push_back(as_real(v, "pose_keypoints_2d: "));
      }
    }
    record.people.push_back(std::move(keypoints));
  }
  return record;
}

std::vector<KeypointFrame> adapt_detector_output(std::span<const DetectorRecord> records,
                                                 std::span<const int> mapping,
                                                 const DetectorOptions& options) {
  if (mapping.size() != kPointsPerFrame) {
    throw InputError("keypoint mapping must have exactly " + std::to_string(kPointsPerFrame) +
                     " entries, got " + std::to_string(mapping.size()));
  }
  for (int index : mapping) {
    if (index < 0) {
      throw InputError("keypoint mapping contains negative index " + std::to_string(index));
    }
  }
  const auto check_dim = [](const std::optional<double>& dim, const char* name) {
    if (dim && !(std::isfinite(*dim) && *dim > 0.0)) {
      throw InputError(std::string("image ") + name + " must be positive");
    }
  };
  check_dim(options.image_width, "width");
  check_dim(options.image_height, "height");
  const double width = options.image_width.value_or(1.0);
  const double height = options.image_height.value_or(1.0);

  std::vector<KeypointFrame> frames;
  frames.reserve(records.size());
  for (const auto& record : records) {
    if (record.frame_index < 0 ||
        (!frames.empty() && record.frame_index <= frames.back().frame_index)) {
      throw InputError("detector frame indices must be non-negative and strictly increasing");
    }
    KeypointFrame frame;
    frame.frame_index = record.frame_index;
    if (!record.people.empty()) {
      const auto& flat = record.people.front();
      if (flat.size() % 3 != 0) {
        throw InputError("frame " + std::to_string(record.frame_index) +
                         ": keypoint list length is not a multiple of 3");
      }
      const std::size_t available = flat.size() / 3;
      for (std::size_t i = 0; i < kPointsPerFrame; ++i) {
        const auto source = static_cast<std::size_t>(mapping[i]);
        if (source >= available) {
          throw InputError("frame " + std::to_string(record.frame_index) + ": detector index " +
                           std::to_string(source) + " out of range (" + std::to_string(available) +
                           " keypoints)");
        }
        const double x = flat[3 * source];
        const double y = flat[3 * source + 1];
        const double c = flat[3 * source + 2];
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(c)) {
          throw InputError("frame " + std::to_string(record.frame_index) +
                           ": non-finite detector value");
        }
        if (c <= 0.0) continue;  // undetected stays (0, 0, 0)
        frame.points[i] = Point{std::clamp(x / width, 0.0, 1.0), std::clamp(y / height, 0.0, 1.0),
                                std::clamp(c, 0.0, 1.0)};
      }
    }
    frames.push_back(frame);
  }
  return frames;
}

}  // namespace focus
