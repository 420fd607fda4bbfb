#pragma once

// Collective Perception Message, JSON profile. Field names and units follow
// ETSI CPM (centimetres, centimetres per second); see docs/formats.md.

#include <cstdint>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldm/core_model.hpp"
#include "ldm/openlabel.hpp"

namespace ldm {

enum class ObjectClass : std::uint8_t { Unknown, Pedestrian, Cyclist, Vehicle };

std::string_view to_string(ObjectClass c) noexcept;

/// Bound on |x_distance| and |y_distance|, in centimetres.
inline constexpr std::int64_t kCpmMaxDistanceCm = 13'107'100;

struct PerceivedObject {
  std::uint32_t object_id = 0;
  std::int64_t x_distance = 0;  // cm, east of the reference position
  std::int64_t y_distance = 0;  // cm, north of the reference position
  std::int64_t x_speed = 0;     // cm/s
  std::int64_t y_speed = 0;     // cm/s
  ObjectClass object_class = ObjectClass::Unknown;
  int confidence = 0;  // [0, 100]
  bool operator==(const PerceivedObject&) const = default;
};

struct CpmMessage {
  std::uint32_t station_id = 0;
  Timestamp generation_time{};
  GeoPose reference_position;
  std::vector<PerceivedObject> perceived_objects;
  bool operator==(const CpmMessage&) const = default;
};

/// Throws InvalidMessage naming the offending field.
void validate_cpm(const CpmMessage& m);

/// Throws SyntaxError or InvalidMessage. The result is validated.
CpmMessage parse_cpm(std::string_view text);
CpmMessage parse_cpm(const nlohmann::json& document);

nlohmann::ordered_json to_json(const CpmMessage& m);

std::string cpm_station_name(std::uint32_t station_id);
std::string cpm_object_name(std::uint32_t station_id, std::uint32_t object_id);
std::string_view semantic_type_of(ObjectClass c) noexcept;

/// Frame index used for a CPM: generation time in milliseconds.
FrameIndex cpm_frame_index(Timestamp generation_time) noexcept;

/// One frame at generation_time holding the sending station at its reference
/// position and every perceived object at its absolute position, plus
/// "perceivedBy" relations. Throws InvalidMessage.
OpenLabelPayload cpm_to_openlabel(const CpmMessage& m);

}  // namespace ldm
