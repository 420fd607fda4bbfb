#pragma once

// OpenLABEL-style scene documents: the JSON exchange format for perception
// input and archive output. See docs/formats.md for the exact profile.

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldm/core_model.hpp"

namespace ldm {

/// Orders uids numerically when both are decimal integers, otherwise
/// lexicographically; numeric uids sort first.
struct UidLess {
  bool operator()(const std::string& a, const std::string& b) const noexcept;
};

struct ElementRef {
  ElementKind kind = ElementKind::Object;
  std::string uid;

  bool operator==(const ElementRef&) const = default;
  bool operator<(const ElementRef& o) const noexcept {
    if (kind != o.kind) return kind < o.kind;
    return UidLess{}(uid, o.uid);
  }
};

struct PayloadElement {
  ElementKind kind = ElementKind::Object;
  std::string uid;
  std::string name;
  std::string type;
  LdmLayer layer = LdmLayer::L4_Dynamic;
  AttributeMap static_attributes;
  bool operator==(const PayloadElement&) const = default;
};

struct PayloadFrameEntry {
  std::optional<GeoPose> pose;
  AttributeMap dynamic_attributes;
  /// Override the frame-level timestamp / source for this element.
  std::optional<Timestamp> timestamp;
  std::optional<FrameSource> source;
  bool operator==(const PayloadFrameEntry&) const = default;
};

struct PayloadFrame {
  Timestamp timestamp{};
  std::optional<FrameSource> source;
  std::map<ElementRef, PayloadFrameEntry> entries;

  [[nodiscard]] Timestamp timestamp_of(const ElementRef& ref) const {
    auto it = entries.find(ref);
    return it != entries.end() && it->second.timestamp ? *it->second.timestamp : timestamp;
  }
  bool operator==(const PayloadFrame&) const = default;
};

struct PayloadRelation {
  std::string predicate;
  std::vector<ElementRef> subjects;
  std::vector<ElementRef> objects;
  std::optional<FrameSpan> frame_span;
  bool operator==(const PayloadRelation&) const = default;
};

struct OpenLabelPayload {
  std::string schema_version = "1.0.0";
  std::map<ElementRef, PayloadElement> elements;
  std::map<FrameIndex, PayloadFrame> frames;
  std::map<std::string, StreamDescriptor> streams;
  /// Carried through untouched; not interpreted by the store.
  nlohmann::ordered_json coordinate_systems;
  std::map<std::string, PayloadRelation, UidLess> relations;

  bool operator==(const OpenLabelPayload&) const = default;
};

/// Throws SyntaxError (with byte position) or SchemaError (naming the path).
OpenLabelPayload parse_openlabel(std::string_view text);
/// Throws SchemaError.
OpenLabelPayload parse_openlabel(const nlohmann::json& document);

/// Deterministic document: fixed section order, ascending uids and frames,
/// attributes sorted by name.
nlohmann::ordered_json to_json(const OpenLabelPayload& payload);

/// Compact single-line serialization of to_json.
std::string serialize_openlabel(const OpenLabelPayload& payload);

}  // namespace ldm
