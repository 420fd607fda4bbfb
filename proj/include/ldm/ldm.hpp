#pragma once

// The LDM API: configure, add objects, load map, export, read objects and
// get info, plus the ego/node-relative geo-queries consumed by ADAS
// functions. One `Ldm` owns the graph store and the loaded road graph.

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldm/config.hpp"
#include "ldm/core_model.hpp"
#include "ldm/cpm.hpp"
#include "ldm/graph_store.hpp"
#include "ldm/ingest.hpp"
#include "ldm/openlabel.hpp"
#include "ldm/road_graph.hpp"

namespace ldm {

struct ObjectReport {
  ElementId element_id;
  std::string name;
  std::string semantic_type;
  LdmLayer layer = LdmLayer::L4_Dynamic;
  std::optional<GeoPose> pose;
  /// Present iff the query is ego-relative.
  std::optional<double> distance_to_ego;
  /// Present for node-anchored queries.
  std::optional<double> distance_to_node;
  /// Way identity; OSM carries no lane geometry, so "same lane" is "same way".
  std::optional<OsmId> matched_way;
  Timestamp timestamp{};

  bool operator==(const ObjectReport&) const = default;
};

/// Fixed key order: element_id, name, semantic_type, layer, timestamp, pose,
/// distance_to_ego, distance_to_node, matched_way (optional keys omitted).
nlohmann::ordered_json to_json(const ObjectReport& r);

struct InfoField {
  std::string name;
  std::int64_t value = 0;
  bool operator==(const InfoField&) const = default;
};

/// The field list as one ordered JSON object.
nlohmann::ordered_json to_json(const std::vector<InfoField>& fields);

struct ExportCounts {
  std::size_t elements = 0;
  std::size_t frames = 0;
  std::size_t relations = 0;
  bool operator==(const ExportCounts&) const = default;
};

struct MapLoadResult {
  MapLoadCounts counts;
  std::vector<std::string> warnings;
};

/// Builds the archive payload for an interval from a consistent view:
/// elements with frames in the interval, L1 elements they relate to, the
/// relations among them, and all streams. Element uids are store ids.
OpenLabelPayload build_export(const StoreView& view, TimeInterval interval);

class Ldm {
 public:
  explicit Ldm(LdmConfig cfg = {});

  // Configure
  void configure(const LdmConfig& cfg);
  [[nodiscard]] LdmConfig config() const;

  // Add objects
  CommitCounts add_objects(const OpenLabelPayload& payload, FrameSource source = FrameSource::LocalPerception);
  CommitCounts add_cpm(const CpmMessage& message);

  // Load map
  MapLoadCounts load_map(const RoadGraph& graph);
  MapLoadResult load_osm(std::istream& document);
  [[nodiscard]] std::shared_ptr<const RoadGraph> road_graph() const;

  // Export. Throws SinkError.
  ExportCounts export_archive(TimeInterval interval, std::ostream& sink) const;
  ExportCounts export_archive(TimeInterval interval, const std::filesystem::path& file) const;
  [[nodiscard]] OpenLabelPayload export_payload(TimeInterval interval) const;

  // Read objects
  [[nodiscard]] std::vector<FrameRecord> read_frames(ElementId id, TimeInterval interval) const;
  [[nodiscard]] Snapshot snapshot(Timestamp at) const;

  // Get info
  [[nodiscard]] std::vector<InfoField> get_info() const;

  // Geo-queries. All are pure reads against a consistent snapshot.
  [[nodiscard]] std::vector<ObjectReport> objects_within(ElementId ego, double radius_m, Timestamp at) const;
  [[nodiscard]] std::vector<ObjectReport> objects_on_same_way(ElementId ego, Timestamp at) const;
  [[nodiscard]] std::vector<ObjectReport> stationary_objects(Timestamp at, std::optional<Duration> window = {},
                                                             std::optional<double> speed_eps = {}) const;
  [[nodiscard]] std::vector<OsmId> next_road_nodes(ElementId ego, std::size_t k, Timestamp at) const;
  [[nodiscard]] std::vector<ObjectReport> objects_near_node(OsmId node, double radius_m, Timestamp at) const;
  [[nodiscard]] std::optional<MapMatch> match_element(ElementId id, Timestamp at) const;

  /// TTL eviction; writes the expiring interval to archive_dir first when set.
  std::size_t evict(Timestamp now);

  GraphStore& store() noexcept { return store_; }
  [[nodiscard]] const GraphStore& store() const noexcept { return store_; }

 private:
  GraphStore store_;
  mutable std::shared_mutex map_mutex_;
  std::shared_ptr<const RoadGraph> map_;

  [[nodiscard]] std::shared_ptr<const RoadGraph> require_map() const;
  [[nodiscard]] MatchParams match_params() const;
};

}  // namespace ldm
