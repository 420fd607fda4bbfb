#include "ldm/core_model.hpp"

#include <algorithm>
#include <cmath>

#include "ldm/error.hpp"

namespace ldm {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidElement: return "InvalidElement";
    case ErrorCode::UnknownElement: return "UnknownElement";
    case ErrorCode::AttributeOverlap: return "AttributeOverlap";
    case ErrorCode::TimestampRegression: return "TimestampRegression";
    case ErrorCode::OutOfLocalRange: return "OutOfLocalRange";
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::InvalidMessage: return "InvalidMessage";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NoPose: return "NoPose";
    case ErrorCode::NoMap: return "NoMap";
    case ErrorCode::Unmatched: return "Unmatched";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::SinkError: return "SinkError";
    case ErrorCode::BindError: return "BindError";
    case ErrorCode::FileError: return "FileError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Error";
}

std::string_view to_string(LdmLayer layer) noexcept {
  switch (layer) {
    case LdmLayer::L1_Static: return "L1";
    case LdmLayer::L2_QuasiStatic: return "L2";
    case LdmLayer::L3_Transient: return "L3";
    case LdmLayer::L4_Dynamic: return "L4";
  }
  return "L4";
}

std::optional<LdmLayer> parse_layer(std::string_view text) noexcept {
  if (text == "L1") return LdmLayer::L1_Static;
  if (text == "L2") return LdmLayer::L2_QuasiStatic;
  if (text == "L3") return LdmLayer::L3_Transient;
  if (text == "L4") return LdmLayer::L4_Dynamic;
  return std::nullopt;
}

std::string_view to_string(ElementKind kind) noexcept {
  return kind == ElementKind::Object ? "object" : "context";
}

std::string_view to_string(FrameSource source) noexcept {
  switch (source) {
    case FrameSource::LocalPerception: return "local_perception";
    case FrameSource::V2X: return "v2x";
    case FrameSource::Synthetic: return "synthetic";
  }
  return "synthetic";
}

std::optional<FrameSource> parse_source(std::string_view text) noexcept {
  if (text == "local_perception") return FrameSource::LocalPerception;
  if (text == "v2x") return FrameSource::V2X;
  if (text == "synthetic") return FrameSource::Synthetic;
  return std::nullopt;
}

std::string_view to_string(StreamType type) noexcept {
  switch (type) {
    case StreamType::Camera: return "camera";
    case StreamType::Lidar: return "lidar";
    case StreamType::Gnss: return "gnss";
    case StreamType::V2X: return "v2x";
    case StreamType::Other: return "other";
  }
  return "other";
}

std::optional<StreamType> parse_stream_type(std::string_view text) noexcept {
  if (text == "camera") return StreamType::Camera;
  if (text == "lidar") return StreamType::Lidar;
  if (text == "gnss") return StreamType::Gnss;
  if (text == "v2x") return StreamType::V2X;
  if (text == "other") return StreamType::Other;
  return std::nullopt;
}

double normalize_heading(double degrees) noexcept {
  double h = std::fmod(degrees, 360.0);
  if (h < 0.0) h += 360.0;
  // fmod of a tiny negative value can round up to exactly 360.
  if (h >= 360.0) h = 0.0;
  return h;
}

GeoPose make_pose(double lat, double lon, double alt, double heading,
                  std::optional<double> speed) noexcept {
  return GeoPose{lat, lon, alt, normalize_heading(heading), speed};
}

FrameSpan span_of(const std::vector<FrameRecord>& frames) noexcept {
  if (frames.empty()) return {};
  return {frames.front().frame_index, frames.back().frame_index + 1};
}

namespace {

bool attribute_finite(const AttributeValue& value) {
  if (const auto* d = std::get_if<double>(&value)) return std::isfinite(*d);
  if (const auto* v = std::get_if<std::vector<double>>(&value)) {
    return std::all_of(v->begin(), v->end(), [](double x) { return std::isfinite(x); });
  }
  return true;
}

bool is_map_type(std::string_view semantic_type) {
  return semantic_type == "road.node" || semantic_type == "road.way";
}

}  // namespace

std::vector<Violation> validate_pose(const GeoPose& pose) {
  std::vector<Violation> out;
  if (!(pose.lat >= -90.0 && pose.lat <= 90.0)) out.push_back({"lat", "lat out of range"});
  if (!(pose.lon >= -180.0 && pose.lon < 180.0)) out.push_back({"lon", "lon out of range"});
  if (!std::isfinite(pose.alt)) out.push_back({"alt", "alt not finite"});
  if (!(pose.heading >= 0.0 && pose.heading < 360.0)) {
    out.push_back({"heading", "heading out of range"});
  }
  if (pose.speed && !(*pose.speed >= 0.0 && std::isfinite(*pose.speed))) {
    out.push_back({"speed", "speed negative or not finite"});
  }
  return out;
}

std::vector<Violation> validate_element(const SceneElement& element,
                                        const std::vector<FrameRecord>& frames) {
  std::vector<Violation> out;
  if (element.name.empty()) out.push_back({"name", "name empty"});
  if (is_map_type(element.semantic_type) && element.layer != LdmLayer::L1_Static) {
    out.push_back({"layer", "map element must be L1"});
  }
  for (const auto& [name, value] : element.static_attributes) {
    if (!attribute_finite(value)) out.push_back({"static_attributes", "attribute not finite: " + name});
  }

  std::vector<std::string> overlaps;
  const FrameRecord* prev = nullptr;
  for (const auto& rec : frames) {
    if (rec.element_id != element.id) {
      out.push_back({"element_id", "frame " + std::to_string(rec.frame_index) + " belongs to another element"});
    }
    if (prev != nullptr) {
      if (rec.frame_index <= prev->frame_index) {
        out.push_back({"frame_index", "frames not strictly ordered by index"});
      } else if (rec.timestamp <= prev->timestamp) {
        out.push_back({"timestamp", "timestamp not increasing at frame " + std::to_string(rec.frame_index)});
      }
    }
    prev = &rec;
    if (rec.pose) {
      for (auto& v : validate_pose(*rec.pose)) out.push_back(std::move(v));
    }
    for (const auto& [name, value] : rec.dynamic_attributes) {
      if (element.static_attributes.contains(name) &&
          std::find(overlaps.begin(), overlaps.end(), name) == overlaps.end()) {
        overlaps.push_back(name);
      }
      if (!attribute_finite(value)) out.push_back({"dynamic_attributes", "attribute not finite: " + name});
    }
  }
  for (const auto& name : overlaps) out.push_back({name, "attribute overlap: " + name});

  if (!frames.empty() && element.frame_span != span_of(frames)) {
    out.push_back({"frame_span", "frame_span does not cover stored frames"});
  }
  return out;
}

bool merge_dynamic_into(ElementTrack& track, const FrameRecord& rec) {
  if (rec.element_id != track.element.id) {
    throw Error(ErrorCode::UnknownElement, "frame for element " + std::to_string(rec.element_id.value) +
                                               " merged into element " + std::to_string(track.element.id.value));
  }
  for (const auto& [name, value] : rec.dynamic_attributes) {
    if (track.element.static_attributes.contains(name)) {
      throw Error(ErrorCode::AttributeOverlap, "attribute overlap: " + name);
    }
  }

  auto& frames = track.frames;
  auto it = std::lower_bound(frames.begin(), frames.end(), rec.frame_index,
                             [](const FrameRecord& f, FrameIndex i) { return f.frame_index < i; });
  const bool replace = it != frames.end() && it->frame_index == rec.frame_index;

  if (it != frames.begin() && std::prev(it)->timestamp >= rec.timestamp) {
    throw Error(ErrorCode::TimestampRegression,
                "frame " + std::to_string(rec.frame_index) + " not later than frame " +
                    std::to_string(std::prev(it)->frame_index));
  }
  auto next = replace ? std::next(it) : it;
  if (next != frames.end() && next->timestamp <= rec.timestamp) {
    throw Error(ErrorCode::TimestampRegression,
                "frame " + std::to_string(rec.frame_index) + " not earlier than frame " +
                    std::to_string(next->frame_index));
  }

  if (replace) {
    *it = rec;
  } else {
    frames.insert(it, rec);
  }
  track.element.frame_span = span_of(frames);
  return !replace;
}

ElementTrack merge_dynamic(ElementTrack existing, const FrameRecord& rec) {
  merge_dynamic_into(existing, rec);
  return existing;
}

}  // namespace ldm
