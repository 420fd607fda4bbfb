#pragma once

// Layer-1 road graph built from OpenStreetMap XML: highway ways, the nodes
// they reference, and a bidirectional (oneway-aware) adjacency.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ldm/core_model.hpp"
#include "ldm/geo.hpp"

namespace ldm {

class GraphStore;

using OsmId = std::int64_t;

struct RoadNode {
  OsmId osm_id = 0;
  GeoPosition position;
  bool operator==(const RoadNode&) const = default;
};

struct RoadWay {
  OsmId osm_id = 0;
  std::vector<OsmId> node_refs;
  std::map<std::string, std::string> tags;
  bool oneway = false;
  bool operator==(const RoadWay&) const = default;
};

struct RoadEdge {
  OsmId neighbor = 0;
  OsmId way = 0;
  double length_m = 0.0;
  bool operator==(const RoadEdge&) const = default;
};

struct GeoBounds {
  double min_lat = 0, min_lon = 0, max_lat = 0, max_lon = 0;
  bool operator==(const GeoBounds&) const = default;
};

class RoadGraph {
 public:
  RoadGraph() = default;

  /// Builds adjacency and way bounds. Ways must reference existing nodes,
  /// have >= 2 refs and no repeated consecutive refs.
  static RoadGraph build(std::map<OsmId, RoadNode> nodes, std::map<OsmId, RoadWay> ways);

  /// Union with another graph; entries of `other` win on id collisions.
  [[nodiscard]] RoadGraph merged_with(const RoadGraph& other) const;

  [[nodiscard]] const std::map<OsmId, RoadNode>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::map<OsmId, RoadWay>& ways() const noexcept { return ways_; }
  [[nodiscard]] const std::map<OsmId, std::vector<RoadEdge>>& adjacency() const noexcept { return adjacency_; }
  [[nodiscard]] const std::vector<RoadEdge>& edges_from(OsmId node) const;
  [[nodiscard]] const RoadNode* find_node(OsmId id) const;
  [[nodiscard]] const GeoBounds& way_bounds(OsmId way) const { return bounds_.at(way); }
  [[nodiscard]] bool empty() const noexcept { return ways_.empty() && nodes_.empty(); }
  [[nodiscard]] std::size_t segment_count() const noexcept;

  bool operator==(const RoadGraph& o) const { return nodes_ == o.nodes_ && ways_ == o.ways_; }

 private:
  std::map<OsmId, RoadNode> nodes_;
  std::map<OsmId, RoadWay> ways_;
  std::map<OsmId, std::vector<RoadEdge>> adjacency_;
  std::map<OsmId, GeoBounds> bounds_;
};

struct OsmParseResult {
  RoadGraph graph;
  /// Non-fatal problems, e.g. dropped ways with dangling node refs.
  std::vector<std::string> warnings;
};

/// Throws MalformedDocument (with line number) on XML or attribute errors.
OsmParseResult parse_osm(std::istream& document);
OsmParseResult parse_osm(std::string_view document);

struct MapLoadCounts {
  std::size_t nodes = 0;
  std::size_t ways = 0;
  bool operator==(const MapLoadCounts&) const = default;
};

/// Upserts nodes ("road.node") and ways ("road.way") as L1 elements plus
/// ordered "hasNode" relations. Re-loading the same graph is a no-op.
MapLoadCounts load_into_store(const RoadGraph& graph, GraphStore& store);

std::string road_node_name(OsmId id);
std::string road_way_name(OsmId id);

/// Breadth-first expansion from `from`, seeded by the outgoing edge whose
/// bearing deviates least from `heading_deg`. Returns up to k node ids in
/// traversal order. Throws UnknownNode.
std::vector<OsmId> next_nodes(const RoadGraph& graph, OsmId from, double heading_deg, std::size_t k);

struct MapMatch {
  OsmId way = 0;
  std::size_t segment = 0;
  double distance_m = 0.0;
  /// Clamped position along the segment.
  double t = 0.0;
  bool operator==(const MapMatch&) const = default;
};

struct MatchParams {
  double threshold_m = 50.0;
  double inflation_m = 100.0;
};

/// Distances closer than this are ties, broken by (way id, segment index).
inline constexpr double kMatchTieEpsilon = 1e-9;

/// Nearest segment among ways whose inflated bounds contain p; nullopt if the
/// best distance exceeds the threshold.
std::optional<MapMatch> map_match(const RoadGraph& graph, const GeoPosition& p, MatchParams params = {});

}  // namespace ldm
