#include "ldm/cpm.hpp"

#include <cmath>
#include <set>

#include "ldm/error.hpp"
#include "ldm/geo.hpp"

namespace ldm {

using json = nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::InvalidMessage, field + ": " + what);
}

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) invalid(path, "expected object");
  auto it = obj.find(key);
  if (it == obj.end()) invalid(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

std::int64_t int_field(const json& obj, const char* key, const std::string& path) {
  const auto& v = field(obj, key, path);
  const std::string name = path.empty() ? key : path + "." + key;
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_unsigned()) {
    const auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) invalid(name, "out of range");
    return static_cast<std::int64_t>(u);
  }
  invalid(name, "expected integer");
}

double num_field(const json& v, const std::string& name) {
  if (!v.is_number()) invalid(name, "expected number");
  return v.get<double>();
}

ObjectClass parse_class(const json& v, const std::string& name) {
  if (!v.is_string()) invalid(name, "expected string");
  const auto s = v.get<std::string>();
  if (s == "unknown") return ObjectClass::Unknown;
  if (s == "pedestrian") return ObjectClass::Pedestrian;
  if (s == "cyclist") return ObjectClass::Cyclist;
  if (s == "vehicle") return ObjectClass::Vehicle;
  invalid(name, "unknown object class " + s);
}

}  // namespace

std::string_view to_string(ObjectClass c) noexcept {
  switch (c) {
    case ObjectClass::Unknown: return "unknown";
    case ObjectClass::Pedestrian: return "pedestrian";
    case ObjectClass::Cyclist: return "cyclist";
    case ObjectClass::Vehicle: return "vehicle";
  }
  return "unknown";
}

std::string_view semantic_type_of(ObjectClass c) noexcept {
  switch (c) {
    case ObjectClass::Unknown: return "object.unknown";
    case ObjectClass::Pedestrian: return "person.pedestrian";
    case ObjectClass::Cyclist: return "vehicle.cyclist";
    case ObjectClass::Vehicle: return "vehicle.car";
  }
  return "object.unknown";
}

std::string cpm_station_name(std::uint32_t station_id) { return "station-" + std::to_string(station_id); }

std::string cpm_object_name(std::uint32_t station_id, std::uint32_t object_id) {
  return "cpm-" + std::to_string(station_id) + "-" + std::to_string(object_id);
}

FrameIndex cpm_frame_index(Timestamp generation_time) noexcept {
  return static_cast<FrameIndex>(to_us(generation_time) / 1000);
}

void validate_cpm(const CpmMessage& m) {
  if (to_us(m.generation_time) < 0) invalid("generation_time", "negative");
  for (const auto& v : validate_pose(m.reference_position)) invalid("reference_position." + v.field, v.message);
  std::set<std::uint32_t> seen;
  for (std::size_t i = 0; i < m.perceived_objects.size(); ++i) {
    const auto& o = m.perceived_objects[i];
    const std::string path = "perceived_objects[" + std::to_string(i) + "]";
    if (std::llabs(o.x_distance) > kCpmMaxDistanceCm) invalid(path + ".x_distance", "out of range");
    if (std::llabs(o.y_distance) > kCpmMaxDistanceCm) invalid(path + ".y_distance", "out of range");
    if (o.confidence < 0 || o.confidence > 100) invalid(path + ".confidence", "out of range");
    if (!seen.insert(o.object_id).second) invalid(path + ".object_id", "duplicate object id");
  }
}

CpmMessage parse_cpm(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SyntaxError, "byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return parse_cpm(doc);
}

CpmMessage parse_cpm(const json& doc) {
  CpmMessage m;
  const auto station = int_field(doc, "station_id", "");
  if (station < 0 || station > 0xFFFFFFFFLL) invalid("station_id", "out of range");
  m.station_id = static_cast<std::uint32_t>(station);
  m.generation_time = from_us(int_field(doc, "generation_time", ""));

  const auto& ref = field(doc, "reference_position", "");
  if (!ref.is_object()) invalid("reference_position", "expected object");
  m.reference_position.lat = num_field(field(ref, "lat", "reference_position"), "reference_position.lat");
  m.reference_position.lon = num_field(field(ref, "lon", "reference_position"), "reference_position.lon");
  if (auto it = ref.find("alt"); it != ref.end()) m.reference_position.alt = num_field(*it, "reference_position.alt");
  if (auto it = ref.find("heading"); it != ref.end()) {
    m.reference_position.heading = normalize_heading(num_field(*it, "reference_position.heading"));
  }
  if (auto it = ref.find("speed"); it != ref.end()) m.reference_position.speed = num_field(*it, "reference_position.speed");

  if (auto it = doc.find("perceived_objects"); it != doc.end()) {
    if (!it->is_array()) invalid("perceived_objects", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& o = (*it)[i];
      const std::string path = "perceived_objects[" + std::to_string(i) + "]";
      PerceivedObject p;
      const auto id = int_field(o, "object_id", path);
      if (id < 0 || id > 0xFFFFFFFFLL) invalid(path + ".object_id", "out of range");
      p.object_id = static_cast<std::uint32_t>(id);
      p.x_distance = int_field(o, "x_distance", path);
      p.y_distance = int_field(o, "y_distance", path);
      p.x_speed = o.contains("x_speed") ? int_field(o, "x_speed", path) : 0;
      p.y_speed = o.contains("y_speed") ? int_field(o, "y_speed", path) : 0;
      if (auto c = o.find("object_class"); c != o.end()) p.object_class = parse_class(*c, path + ".object_class");
      const auto conf = o.contains("confidence") ? int_field(o, "confidence", path) : 0;
      if (conf < 0 || conf > 100) invalid(path + ".confidence", "out of range");
      p.confidence = static_cast<int>(conf);
      m.perceived_objects.push_back(p);
    }
  }
  validate_cpm(m);
  return m;
}

nlohmann::ordered_json to_json(const CpmMessage& m) {
  nlohmann::ordered_json out;
  out["station_id"] = m.station_id;
  out["generation_time"] = to_us(m.generation_time);
  auto& ref = out["reference_position"];
  ref["lat"] = m.reference_position.lat;
  ref["lon"] = m.reference_position.lon;
  ref["alt"] = m.reference_position.alt;
  ref["heading"] = m.reference_position.heading;
  if (m.reference_position.speed) ref["speed"] = *m.reference_position.speed;
  auto objects = nlohmann::ordered_json::array();
  for (const auto& o : m.perceived_objects) {
    nlohmann::ordered_json j;
    j["object_id"] = o.object_id;
    j["x_distance"] = o.x_distance;
    j["y_distance"] = o.y_distance;
    j["x_speed"] = o.x_speed;
    j["y_speed"] = o.y_speed;
    j["object_class"] = std::string(to_string(o.object_class));
    j["confidence"] = o.confidence;
    objects.push_back(std::move(j));
  }
  out["perceived_objects"] = std::move(objects);
  return out;
}

OpenLabelPayload cpm_to_openlabel(const CpmMessage& m) {
  validate_cpm(m);
  OpenLabelPayload p;
  PayloadFrame frame;
  frame.timestamp = m.generation_time;
  frame.source = FrameSource::V2X;

  const std::string station_uid = cpm_station_name(m.station_id);
  const ElementRef station_ref{ElementKind::Object, station_uid};
  p.elements.emplace(station_ref,
                     PayloadElement{ElementKind::Object, station_uid, station_uid, "its.station", LdmLayer::L4_Dynamic,
                                    {{"station_id", static_cast<double>(m.station_id)}}});
  frame.entries.emplace(station_ref, PayloadFrameEntry{m.reference_position, {}, std::nullopt, std::nullopt});

  const GeoPosition origin = m.reference_position.position();
  for (const auto& o : m.perceived_objects) {
    const std::string uid = cpm_object_name(m.station_id, o.object_id);
    const ElementRef ref{ElementKind::Object, uid};
    p.elements.emplace(ref, PayloadElement{ElementKind::Object,
                                           uid,
                                           uid,
                                           std::string(semantic_type_of(o.object_class)),
                                           LdmLayer::L4_Dynamic,
                                           {{"station_id", static_cast<double>(m.station_id)},
                                            {"object_id", static_cast<double>(o.object_id)}}});

    const auto pos = geo::enu_to_wgs84(
        origin, {static_cast<double>(o.x_distance) / 100.0, static_cast<double>(o.y_distance) / 100.0, 0.0});
    const double vx = static_cast<double>(o.x_speed), vy = static_cast<double>(o.y_speed);
    const double heading = normalize_heading(geo::rad2deg(std::atan2(vx, vy)));
    GeoPose pose{pos.lat, pos.lon, pos.alt, heading, std::hypot(vx, vy) / 100.0};
    frame.entries.emplace(ref, PayloadFrameEntry{pose, {{"confidence", static_cast<double>(o.confidence)}}, std::nullopt, std::nullopt});

    p.relations.emplace(std::to_string(p.relations.size()),
                        PayloadRelation{"perceivedBy", {ref}, {station_ref}, std::nullopt});
  }
  p.frames.emplace(cpm_frame_index(m.generation_time), std::move(frame));
  return p;
}

}  // namespace ldm
