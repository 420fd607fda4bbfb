#pragma once

// Layered scene data model: elements with static descriptors, per-frame
// dynamic records, relations and streams.

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ldm {

using Duration = std::chrono::microseconds;
/// Microseconds since the Unix epoch.
using Timestamp = std::chrono::time_point<std::chrono::system_clock, Duration>;

constexpr Timestamp from_us(std::int64_t us) noexcept { return Timestamp{Duration{us}}; }
constexpr std::int64_t to_us(Timestamp t) noexcept { return t.time_since_epoch().count(); }

enum class LdmLayer : std::uint8_t { L1_Static = 1, L2_QuasiStatic = 2, L3_Transient = 3, L4_Dynamic = 4 };

inline constexpr LdmLayer kAllLayers[] = {LdmLayer::L1_Static, LdmLayer::L2_QuasiStatic,
                                          LdmLayer::L3_Transient, LdmLayer::L4_Dynamic};

std::string_view to_string(LdmLayer layer) noexcept;
std::optional<LdmLayer> parse_layer(std::string_view text) noexcept;

struct ElementId {
  std::uint64_t value = 0;
  auto operator<=>(const ElementId&) const = default;
};

enum class ElementKind : std::uint8_t { Object, Context };
std::string_view to_string(ElementKind kind) noexcept;

enum class FrameSource : std::uint8_t { LocalPerception, V2X, Synthetic };
std::string_view to_string(FrameSource source) noexcept;
std::optional<FrameSource> parse_source(std::string_view text) noexcept;

enum class StreamType : std::uint8_t { Camera, Lidar, Gnss, V2X, Other };
std::string_view to_string(StreamType type) noexcept;
std::optional<StreamType> parse_stream_type(std::string_view text) noexcept;

using FrameIndex = std::uint64_t;

/// Half-open frame interval [begin, end).
struct FrameSpan {
  FrameIndex begin = 0;
  FrameIndex end = 0;

  [[nodiscard]] bool empty() const noexcept { return end <= begin; }
  [[nodiscard]] bool contains(FrameIndex i) const noexcept { return i >= begin && i < end; }
  auto operator<=>(const FrameSpan&) const = default;
};

using AttributeValue = std::variant<bool, double, std::string, std::vector<double>>;
using AttributeMap = std::map<std::string, AttributeValue, std::less<>>;

struct GeoPosition {
  double lat = 0.0;
  double lon = 0.0;
  double alt = 0.0;
  bool operator==(const GeoPosition&) const = default;
};

struct GeoPose {
  double lat = 0.0;
  double lon = 0.0;
  double alt = 0.0;
  /// Degrees clockwise from true north, kept in [0, 360).
  double heading = 0.0;
  /// m/s; absent when the source did not report it.
  std::optional<double> speed;

  [[nodiscard]] GeoPosition position() const noexcept { return {lat, lon, alt}; }
  bool operator==(const GeoPose&) const = default;
};

/// Wraps any finite angle into [0, 360).
double normalize_heading(double degrees) noexcept;

/// Builds a pose with the heading normalized.
GeoPose make_pose(double lat, double lon, double alt = 0.0, double heading = 0.0,
                  std::optional<double> speed = std::nullopt) noexcept;

struct SceneElement {
  ElementId id;
  ElementKind kind = ElementKind::Object;
  std::string name;
  std::string semantic_type;
  LdmLayer layer = LdmLayer::L4_Dynamic;
  AttributeMap static_attributes;
  FrameSpan frame_span;

  bool operator==(const SceneElement&) const = default;
};

struct FrameRecord {
  FrameIndex frame_index = 0;
  Timestamp timestamp{};
  ElementId element_id;
  std::optional<GeoPose> pose;
  AttributeMap dynamic_attributes;
  FrameSource source = FrameSource::LocalPerception;

  bool operator==(const FrameRecord&) const = default;
};

struct Relation {
  ElementId subject;
  std::string predicate;
  ElementId object;
  std::optional<FrameSpan> frame_span;

  auto operator<=>(const Relation&) const = default;
};

struct StreamDescriptor {
  std::string name;
  StreamType stream_type = StreamType::Other;
  std::string source_uri;
  bool operator==(const StreamDescriptor&) const = default;
};

/// An element together with its dynamic history, ordered by frame index.
struct ElementTrack {
  SceneElement element;
  std::vector<FrameRecord> frames;

  bool operator==(const ElementTrack&) const = default;
};

struct Violation {
  std::string field;
  std::string message;
};

/// Checks every element invariant. An empty result means the element is valid.
std::vector<Violation> validate_element(const SceneElement& element,
                                        const std::vector<FrameRecord>& frames = {});

/// Pose range checks only; shared by frame ingestion and validation.
std::vector<Violation> validate_pose(const GeoPose& pose);

/// Inserts or replaces `rec` in the track. Last writer wins on duplicate frame
/// indices; static attributes are left untouched. Throws AttributeOverlap or
/// TimestampRegression.
ElementTrack merge_dynamic(ElementTrack existing, const FrameRecord& rec);

/// In-place variant used by the store. Returns true if a new frame was added,
/// false if an existing frame was replaced.
bool merge_dynamic_into(ElementTrack& track, const FrameRecord& rec);

/// Recomputes frame_span from the stored frames.
FrameSpan span_of(const std::vector<FrameRecord>& frames) noexcept;

}  // namespace ldm

template <>
struct std::hash<ldm::ElementId> {
  std::size_t operator()(const ldm::ElementId& id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};
