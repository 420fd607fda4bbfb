#include "ldm/openlabel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "ldm/error.hpp"

namespace ldm {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

bool is_decimal(const std::string& s) {
  return !s.empty() && s.size() < 20 && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

[[noreturn]] void schema(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::SchemaError, path + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) schema(path, std::string("missing key '") + key + "'");
  return *it;
}

const json* optional_member(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

std::string require_string(const json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) schema(path + "." + key, "expected string");
  return v.get<std::string>();
}

double number_of(const json& v, const std::string& path) {
  if (!v.is_number()) schema(path, "expected number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema(path, "number not finite");
  return d;
}

std::int64_t integer_of(const json& v, const std::string& path) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_unsigned()) {
    const auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) schema(path, "integer out of range");
    return static_cast<std::int64_t>(u);
  }
  schema(path, "expected integer");
}

const json& require_object(const json& v, const std::string& path) {
  if (!v.is_object()) schema(path, "expected object");
  return v;
}

AttributeMap parse_attributes(const json& data, const std::string& path) {
  AttributeMap attrs;
  require_object(data, path);
  for (const auto& [family, list] : data.items()) {
    const bool known = family == "boolean" || family == "num" || family == "text" || family == "vec";
    if (!known) continue;  // forward compatibility
    const std::string fpath = path + "." + family;
    if (!list.is_array()) schema(fpath, "expected array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string ipath = fpath + "[" + std::to_string(i) + "]";
      const auto& item = require_object(list[i], ipath);
      std::string name = require_string(item, "name", ipath);
      const auto& val = require(item, "val", ipath);
      if (family == "boolean") {
        if (!val.is_boolean()) schema(ipath + ".val", "expected boolean");
        attrs[name] = val.get<bool>();
      } else if (family == "num") {
        attrs[name] = number_of(val, ipath + ".val");
      } else if (family == "text") {
        if (!val.is_string()) schema(ipath + ".val", "expected string");
        attrs[name] = val.get<std::string>();
      } else {
        if (!val.is_array()) schema(ipath + ".val", "expected array");
        std::vector<double> v;
        v.reserve(val.size());
        for (std::size_t j = 0; j < val.size(); ++j) v.push_back(number_of(val[j], ipath + ".val"));
        attrs[name] = std::move(v);
      }
    }
  }
  return attrs;
}

GeoPose parse_pose(const json& v, const std::string& path) {
  require_object(v, path);
  GeoPose pose;
  pose.lat = number_of(require(v, "lat", path), path + ".lat");
  pose.lon = number_of(require(v, "lon", path), path + ".lon");
  if (const auto* alt = optional_member(v, "alt")) pose.alt = number_of(*alt, path + ".alt");
  if (const auto* h = optional_member(v, "heading")) pose.heading = normalize_heading(number_of(*h, path + ".heading"));
  if (const auto* s = optional_member(v, "speed")) pose.speed = number_of(*s, path + ".speed");
  return pose;
}

FrameIndex parse_frame_index(const std::string& key, const std::string& path) {
  if (!is_decimal(key)) schema(path, "frame key is not a non-negative integer: " + key);
  FrameIndex idx = 0;
  auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), idx);
  if (ec != std::errc{}) schema(path, "frame key out of range: " + key);
  return idx;
}

const char* section_name(ElementKind kind) { return kind == ElementKind::Object ? "objects" : "contexts"; }
const char* data_name(ElementKind kind) { return kind == ElementKind::Object ? "object_data" : "context_data"; }

std::optional<ElementKind> kind_from_rdf(const std::string& t) {
  if (t == "object") return ElementKind::Object;
  if (t == "context") return ElementKind::Context;
  return std::nullopt;
}

std::vector<ElementRef> parse_rdf(const json& list, const std::string& path,
                                  const std::map<ElementRef, PayloadElement>& elements) {
  if (!list.is_array()) schema(path, "expected array");
  std::vector<ElementRef> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string ipath = path + "[" + std::to_string(i) + "]";
    const auto& item = require_object(list[i], ipath);
    auto kind = kind_from_rdf(require_string(item, "type", ipath));
    if (!kind) schema(ipath + ".type", "expected 'object' or 'context'");
    ElementRef ref{*kind, require_string(item, "uid", ipath)};
    if (!elements.contains(ref)) schema(ipath, "unresolved " + std::string(to_string(ref.kind)) + " uid " + ref.uid);
    out.push_back(std::move(ref));
  }
  return out;
}

ordered_json attributes_json(const AttributeMap& attrs) {
  ordered_json booleans = ordered_json::array(), nums = ordered_json::array(), texts = ordered_json::array(),
               vecs = ordered_json::array();
  for (const auto& [name, value] : attrs) {
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          ordered_json item;
          item["name"] = name;
          item["val"] = v;
          if constexpr (std::is_same_v<T, bool>) {
            booleans.push_back(std::move(item));
          } else if constexpr (std::is_same_v<T, double>) {
            nums.push_back(std::move(item));
          } else if constexpr (std::is_same_v<T, std::string>) {
            texts.push_back(std::move(item));
          } else {
            vecs.push_back(std::move(item));
          }
        },
        value);
  }
  ordered_json out = ordered_json::object();
  if (!booleans.empty()) out["boolean"] = std::move(booleans);
  if (!nums.empty()) out["num"] = std::move(nums);
  if (!texts.empty()) out["text"] = std::move(texts);
  if (!vecs.empty()) out["vec"] = std::move(vecs);
  return out;
}

ordered_json pose_json(const GeoPose& p) {
  ordered_json out;
  out["lat"] = p.lat;
  out["lon"] = p.lon;
  out["alt"] = p.alt;
  out["heading"] = p.heading;
  if (p.speed) out["speed"] = *p.speed;
  return out;
}

}  // namespace

bool UidLess::operator()(const std::string& a, const std::string& b) const noexcept {
  const bool da = is_decimal(a), db = is_decimal(b);
  if (da && db) {
    // Compare by magnitude, ignoring leading zeros, then textually.
    auto strip = [](const std::string& s) {
      const auto p = s.find_first_not_of('0');
      return p == std::string::npos ? std::string_view{} : std::string_view(s).substr(p);
    };
    const auto sa = strip(a), sb = strip(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
    return a < b;
  }
  if (da != db) return da;
  return a < b;
}

OpenLabelPayload parse_openlabel(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SyntaxError, "byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return parse_openlabel(doc);
}

OpenLabelPayload parse_openlabel(const json& document) {
  if (!document.is_object()) schema("$", "document is not a JSON object");
  const bool has_ol = document.contains("openlabel"), has_vcd = document.contains("vcd");
  if (!has_ol && !has_vcd) schema("$", "missing root scene key");
  if (has_ol && has_vcd) schema("$", "more than one root scene key");
  const std::string root_path = has_ol ? "openlabel" : "vcd";
  const auto& root = require_object(document.at(root_path), root_path);

  OpenLabelPayload p;
  if (const auto* meta = optional_member(root, "metadata")) {
    require_object(*meta, root_path + ".metadata");
    if (const auto* v = optional_member(*meta, "schema_version")) {
      if (!v->is_string()) schema(root_path + ".metadata.schema_version", "expected string");
      p.schema_version = v->get<std::string>();
    }
  }

  for (auto kind : {ElementKind::Object, ElementKind::Context}) {
    const auto* section = optional_member(root, section_name(kind));
    if (section == nullptr) continue;
    const std::string spath = root_path + "." + section_name(kind);
    require_object(*section, spath);
    for (const auto& [uid, body] : section->items()) {
      const std::string epath = spath + "." + uid;
      require_object(body, epath);
      PayloadElement e;
      e.kind = kind;
      e.uid = uid;
      e.name = require_string(body, "name", epath);
      e.type = require_string(body, "type", epath);
      if (const auto* layer = optional_member(body, "ldm_layer")) {
        if (!layer->is_string()) schema(epath + ".ldm_layer", "expected string");
        auto l = parse_layer(layer->get<std::string>());
        if (!l) schema(epath + ".ldm_layer", "unknown layer " + layer->get<std::string>());
        e.layer = *l;
      }
      if (const auto* data = optional_member(body, data_name(kind))) {
        e.static_attributes = parse_attributes(*data, epath + "." + data_name(kind));
      }
      p.elements.emplace(ElementRef{kind, uid}, std::move(e));
    }
  }

  if (const auto* frames = optional_member(root, "frames")) {
    const std::string fpath = root_path + ".frames";
    require_object(*frames, fpath);
    for (const auto& [key, body] : frames->items()) {
      const std::string path = fpath + "." + key;
      const FrameIndex idx = parse_frame_index(key, path);
      require_object(body, path);
      PayloadFrame frame;
      const auto& props = require_object(require(body, "frame_properties", path), path + ".frame_properties");
      frame.timestamp = from_us(integer_of(require(props, "timestamp", path + ".frame_properties"),
                                           path + ".frame_properties.timestamp"));
      if (const auto* src = optional_member(props, "source")) {
        auto s = src->is_string() ? parse_source(src->get<std::string>()) : std::nullopt;
        if (!s) schema(path + ".frame_properties.source", "unknown source");
        frame.source = s;
      }
      for (auto kind : {ElementKind::Object, ElementKind::Context}) {
        const auto* section = optional_member(body, section_name(kind));
        if (section == nullptr) continue;
        const std::string spath = path + "." + section_name(kind);
        require_object(*section, spath);
        for (const auto& [uid, entry_body] : section->items()) {
          const std::string epath = spath + "." + uid;
          ElementRef ref{kind, uid};
          if (!p.elements.contains(ref)) {
            schema(epath, "unresolved " + std::string(to_string(kind)) + " uid " + uid);
          }
          require_object(entry_body, epath);
          PayloadFrameEntry entry;
          if (const auto* pose = optional_member(entry_body, "geo_pose")) entry.pose = parse_pose(*pose, epath + ".geo_pose");
          if (const auto* data = optional_member(entry_body, data_name(kind))) {
            entry.dynamic_attributes = parse_attributes(*data, epath + "." + data_name(kind));
          }
          if (const auto* ts = optional_member(entry_body, "timestamp")) {
            entry.timestamp = from_us(integer_of(*ts, epath + ".timestamp"));
          }
          if (const auto* src = optional_member(entry_body, "source")) {
            auto s = src->is_string() ? parse_source(src->get<std::string>()) : std::nullopt;
            if (!s) schema(epath + ".source", "unknown source");
            entry.source = s;
          }
          frame.entries.emplace(std::move(ref), std::move(entry));
        }
      }
      p.frames.emplace(idx, std::move(frame));
    }
  }

  if (const auto* streams = optional_member(root, "streams")) {
    const std::string spath = root_path + ".streams";
    require_object(*streams, spath);
    for (const auto& [name, body] : streams->items()) {
      const std::string path = spath + "." + name;
      require_object(body, path);
      StreamDescriptor s{name, StreamType::Other, {}};
      if (const auto* t = optional_member(body, "type")) {
        auto st = t->is_string() ? parse_stream_type(t->get<std::string>()) : std::nullopt;
        if (!st) schema(path + ".type", "unknown stream type");
        s.stream_type = *st;
      }
      if (const auto* uri = optional_member(body, "uri")) {
        if (!uri->is_string()) schema(path + ".uri", "expected string");
        s.source_uri = uri->get<std::string>();
      }
      p.streams.emplace(name, std::move(s));
    }
  }

  if (const auto* cs = optional_member(root, "coordinate_systems")) {
    p.coordinate_systems = ordered_json::parse(cs->dump());
  }

  if (const auto* relations = optional_member(root, "relations")) {
    const std::string rpath = root_path + ".relations";
    require_object(*relations, rpath);
    for (const auto& [uid, body] : relations->items()) {
      const std::string path = rpath + "." + uid;
      require_object(body, path);
      PayloadRelation r;
      r.predicate = require_string(body, "type", path);
      r.subjects = parse_rdf(require(body, "rdf_subjects", path), path + ".rdf_subjects", p.elements);
      r.objects = parse_rdf(require(body, "rdf_objects", path), path + ".rdf_objects", p.elements);
      if (const auto* fis = optional_member(body, "frame_intervals")) {
        if (!fis->is_array()) schema(path + ".frame_intervals", "expected array");
        for (std::size_t i = 0; i < fis->size(); ++i) {
          const std::string ipath = path + ".frame_intervals[" + std::to_string(i) + "]";
          const auto& fi = require_object((*fis)[i], ipath);
          const auto start = integer_of(require(fi, "frame_start", ipath), ipath + ".frame_start");
          const auto end = integer_of(require(fi, "frame_end", ipath), ipath + ".frame_end");
          if (start < 0 || end < start) schema(ipath, "invalid frame interval");
          // frame_end is inclusive on the wire; spans are half-open.
          FrameSpan span{static_cast<FrameIndex>(start), static_cast<FrameIndex>(end) + 1};
          if (r.frame_span) {
            span.begin = std::min(span.begin, r.frame_span->begin);
            span.end = std::max(span.end, r.frame_span->end);
          }
          r.frame_span = span;
        }
      }
      p.relations.emplace(uid, std::move(r));
    }
  }
  return p;
}

ordered_json to_json(const OpenLabelPayload& p) {
  ordered_json root;
  root["metadata"]["schema_version"] = p.schema_version;

  for (auto kind : {ElementKind::Object, ElementKind::Context}) {
    ordered_json section = ordered_json::object();
    for (const auto& [ref, e] : p.elements) {
      if (ref.kind != kind) continue;
      ordered_json body;
      body["name"] = e.name;
      body["type"] = e.type;
      body["ldm_layer"] = std::string(to_string(e.layer));
      if (!e.static_attributes.empty()) body[data_name(kind)] = attributes_json(e.static_attributes);
      section[ref.uid] = std::move(body);
    }
    root[section_name(kind)] = std::move(section);
  }

  ordered_json frames = ordered_json::object();
  for (const auto& [idx, f] : p.frames) {
    ordered_json body;
    body["frame_properties"]["timestamp"] = to_us(f.timestamp);
    if (f.source) body["frame_properties"]["source"] = std::string(to_string(*f.source));
    for (auto kind : {ElementKind::Object, ElementKind::Context}) {
      ordered_json section = ordered_json::object();
      for (const auto& [ref, entry] : f.entries) {
        if (ref.kind != kind) continue;
        ordered_json e = ordered_json::object();
        if (entry.timestamp) e["timestamp"] = to_us(*entry.timestamp);
        if (entry.source) e["source"] = std::string(to_string(*entry.source));
        if (entry.pose) e["geo_pose"] = pose_json(*entry.pose);
        if (!entry.dynamic_attributes.empty()) e[data_name(kind)] = attributes_json(entry.dynamic_attributes);
        section[ref.uid] = std::move(e);
      }
      if (!section.empty()) body[section_name(kind)] = std::move(section);
    }
    frames[std::to_string(idx)] = std::move(body);
  }
  root["frames"] = std::move(frames);

  ordered_json streams = ordered_json::object();
  for (const auto& [name, s] : p.streams) {
    streams[name]["type"] = std::string(to_string(s.stream_type));
    streams[name]["uri"] = s.source_uri;
  }
  root["streams"] = std::move(streams);

  if (!p.coordinate_systems.is_null()) root["coordinate_systems"] = p.coordinate_systems;

  ordered_json relations = ordered_json::object();
  for (const auto& [uid, r] : p.relations) {
    ordered_json body;
    body["name"] = "";
    body["type"] = r.predicate;
    auto rdf = [](const std::vector<ElementRef>& refs) {
      ordered_json list = ordered_json::array();
      for (const auto& ref : refs) list.push_back({{"type", std::string(to_string(ref.kind))}, {"uid", ref.uid}});
      return list;
    };
    body["rdf_subjects"] = rdf(r.subjects);
    body["rdf_objects"] = rdf(r.objects);
    if (r.frame_span && !r.frame_span->empty()) {
      body["frame_intervals"] = ordered_json::array(
          {{{"frame_start", r.frame_span->begin}, {"frame_end", r.frame_span->end - 1}}});
    }
    relations[uid] = std::move(body);
  }
  root["relations"] = std::move(relations);

  ordered_json doc;
  doc["openlabel"] = std::move(root);
  return doc;
}

std::string serialize_openlabel(const OpenLabelPayload& payload) { return to_json(payload).dump(); }

}  // namespace ldm
