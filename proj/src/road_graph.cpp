#include "ldm/road_graph.hpp"

#include <expat.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <deque>
#include <memory>
#include <set>
#include <sstream>

#include "ldm/error.hpp"
#include "ldm/graph_store.hpp"

namespace ldm {

// ---- RoadGraph --------------------------------------------------------------

RoadGraph RoadGraph::build(std::map<OsmId, RoadNode> nodes, std::map<OsmId, RoadWay> ways) {
  RoadGraph g;
  g.nodes_ = std::move(nodes);
  g.ways_ = std::move(ways);
  for (const auto& [id, node] : g.nodes_) g.adjacency_[id];

  for (const auto& [way_id, way] : g.ways_) {
    GeoBounds b{90.0, 180.0, -90.0, -180.0};
    for (auto ref : way.node_refs) {
      const auto& p = g.nodes_.at(ref).position;
      b.min_lat = std::min(b.min_lat, p.lat);
      b.max_lat = std::max(b.max_lat, p.lat);
      b.min_lon = std::min(b.min_lon, p.lon);
      b.max_lon = std::max(b.max_lon, p.lon);
    }
    g.bounds_[way_id] = b;
    for (std::size_t i = 0; i + 1 < way.node_refs.size(); ++i) {
      const OsmId a = way.node_refs[i], c = way.node_refs[i + 1];
      const double len = geo::haversine_m(g.nodes_.at(a).position, g.nodes_.at(c).position);
      g.adjacency_[a].push_back({c, way_id, len});
      if (!way.oneway) g.adjacency_[c].push_back({a, way_id, len});
    }
  }
  return g;
}

RoadGraph RoadGraph::merged_with(const RoadGraph& other) const {
  auto nodes = nodes_;
  auto ways = ways_;
  for (const auto& [id, n] : other.nodes_) nodes[id] = n;
  for (const auto& [id, w] : other.ways_) ways[id] = w;
  return build(std::move(nodes), std::move(ways));
}

const std::vector<RoadEdge>& RoadGraph::edges_from(OsmId node) const {
  static const std::vector<RoadEdge> kNone;
  auto it = adjacency_.find(node);
  return it == adjacency_.end() ? kNone : it->second;
}

const RoadNode* RoadGraph::find_node(OsmId id) const {
  auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : &it->second;
}

std::size_t RoadGraph::segment_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [id, w] : ways_) n += w.node_refs.size() - 1;
  return n;
}

// ---- OSM parsing ------------------------------------------------------------

namespace {

struct RawWay {
  OsmId id = 0;
  std::vector<OsmId> refs;
  std::map<std::string, std::string> tags;
};

struct OsmReader {
  XML_Parser parser = nullptr;
  std::map<OsmId, GeoPosition> nodes;
  std::vector<RawWay> ways;
  std::optional<RawWay> current_way;
  std::vector<std::string> warnings;
  std::optional<std::string> error;

  [[nodiscard]] std::string where() const {
    return "line " + std::to_string(XML_GetCurrentLineNumber(parser));
  }

  void fail(const std::string& message) {
    if (!error) error = where() + ": " + message;
    XML_StopParser(parser, XML_FALSE);
  }

  static const char* attr(const XML_Char** atts, const char* name) {
    for (int i = 0; atts[i] != nullptr; i += 2) {
      if (std::strcmp(atts[i], name) == 0) return atts[i + 1];
    }
    return nullptr;
  }

  template <typename T>
  std::optional<T> number_attr(const XML_Char** atts, const char* name, const char* element) {
    const char* raw = attr(atts, name);
    if (raw == nullptr) {
      fail(std::string("<") + element + "> missing attribute '" + name + "'");
      return std::nullopt;
    }
    T value{};
    const char* end = raw + std::strlen(raw);
    auto [ptr, ec] = std::from_chars(raw, end, value);
    if (ec != std::errc{} || ptr != end) {
      fail(std::string("<") + element + "> attribute '" + name + "' is not a number: " + raw);
      return std::nullopt;
    }
    return value;
  }

  void on_start(const XML_Char* name, const XML_Char** atts) {
    if (std::strcmp(name, "node") == 0) {
      auto id = number_attr<OsmId>(atts, "id", "node");
      if (!id) return;
      auto lat = number_attr<double>(atts, "lat", "node");
      if (!lat) return;
      auto lon = number_attr<double>(atts, "lon", "node");
      if (!lon) return;
      if (!(*lat >= -90.0 && *lat <= 90.0) || !(*lon >= -180.0 && *lon <= 180.0)) {
        fail("node " + std::to_string(*id) + " has coordinates out of range");
        return;
      }
      const double lon_wrapped = *lon == 180.0 ? -180.0 : *lon;
      if (!nodes.emplace(*id, GeoPosition{*lat, lon_wrapped, 0.0}).second) {
        warnings.push_back(where() + ": duplicate node " + std::to_string(*id) + " ignored");
      }
    } else if (std::strcmp(name, "way") == 0) {
      if (current_way) {
        fail("nested <way>");
        return;
      }
      auto id = number_attr<OsmId>(atts, "id", "way");
      if (!id) return;
      current_way = RawWay{*id, {}, {}};
    } else if (std::strcmp(name, "nd") == 0 && current_way) {
      if (auto ref = number_attr<OsmId>(atts, "ref", "nd")) current_way->refs.push_back(*ref);
    } else if (std::strcmp(name, "tag") == 0 && current_way) {
      const char* k = attr(atts, "k");
      const char* v = attr(atts, "v");
      if (k == nullptr || v == nullptr) {
        fail("<tag> needs 'k' and 'v'");
        return;
      }
      current_way->tags[k] = v;
    }
  }

  void on_end(const XML_Char* name) {
    if (std::strcmp(name, "way") == 0 && current_way) {
      ways.push_back(std::move(*current_way));
      current_way.reset();
    }
  }
};

void XMLCALL start_handler(void* user, const XML_Char* name, const XML_Char** atts) {
  static_cast<OsmReader*>(user)->on_start(name, atts);
}

void XMLCALL end_handler(void* user, const XML_Char* name) { static_cast<OsmReader*>(user)->on_end(name); }

struct ParserDeleter {
  void operator()(XML_Parser p) const noexcept { XML_ParserFree(p); }
};

OsmParseResult assemble(OsmReader& reader) {
  OsmParseResult result;
  result.warnings = std::move(reader.warnings);
  std::map<OsmId, RoadWay> ways;
  std::set<OsmId> used;

  for (auto& raw : reader.ways) {
    if (!raw.tags.contains("highway")) continue;
    if (ways.contains(raw.id)) {
      result.warnings.push_back("duplicate way " + std::to_string(raw.id) + " ignored");
      continue;
    }
    std::vector<OsmId> refs;
    for (auto r : raw.refs) {
      if (refs.empty() || refs.back() != r) refs.push_back(r);
    }
    auto missing = std::find_if(refs.begin(), refs.end(), [&](OsmId r) { return !reader.nodes.contains(r); });
    if (missing != refs.end()) {
      result.warnings.push_back("DanglingNodeRef: way " + std::to_string(raw.id) + " references missing node " +
                                std::to_string(*missing) + "; way dropped");
      continue;
    }
    if (refs.size() < 2) {
      result.warnings.push_back("way " + std::to_string(raw.id) + " has fewer than 2 distinct nodes; way dropped");
      continue;
    }
    RoadWay way{raw.id, std::move(refs), std::move(raw.tags), false};
    if (auto it = way.tags.find("oneway"); it != way.tags.end()) {
      if (it->second == "yes" || it->second == "true" || it->second == "1") {
        way.oneway = true;
      } else if (it->second == "-1") {
        way.oneway = true;
        std::reverse(way.node_refs.begin(), way.node_refs.end());
      }
    }
    used.insert(way.node_refs.begin(), way.node_refs.end());
    ways.emplace(way.osm_id, std::move(way));
  }

  std::map<OsmId, RoadNode> nodes;
  for (auto id : used) nodes.emplace(id, RoadNode{id, reader.nodes.at(id)});
  result.graph = RoadGraph::build(std::move(nodes), std::move(ways));
  return result;
}

}  // namespace

OsmParseResult parse_osm(std::istream& document) {
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, ParserDeleter> parser(XML_ParserCreate("UTF-8"));
  if (!parser) throw Error(ErrorCode::MalformedDocument, "cannot create XML parser");
  OsmReader reader;
  reader.parser = parser.get();
  XML_SetUserData(parser.get(), &reader);
  XML_SetElementHandler(parser.get(), start_handler, end_handler);

  std::vector<char> buf(64 * 1024);
  for (;;) {
    document.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = document.gcount();
    const bool last = got < static_cast<std::streamsize>(buf.size());
    if (XML_Parse(parser.get(), buf.data(), static_cast<int>(got), last ? XML_TRUE : XML_FALSE) ==
        XML_STATUS_ERROR) {
      if (reader.error) throw Error(ErrorCode::MalformedDocument, *reader.error);
      throw Error(ErrorCode::MalformedDocument,
                  "line " + std::to_string(XML_GetCurrentLineNumber(parser.get())) + ": " +
                      XML_ErrorString(XML_GetErrorCode(parser.get())));
    }
    if (last) break;
  }
  if (reader.error) throw Error(ErrorCode::MalformedDocument, *reader.error);
  return assemble(reader);
}

OsmParseResult parse_osm(std::string_view document) {
  std::istringstream in{std::string(document)};
  return parse_osm(in);
}

// ---- Store loading -------------------------------------------------------------

std::string road_node_name(OsmId id) { return "osm-node-" + std::to_string(id); }
std::string road_way_name(OsmId id) { return "osm-way-" + std::to_string(id); }

MapLoadCounts load_into_store(const RoadGraph& graph, GraphStore& store) {
  return store.write([&](Transaction& txn) {
    std::map<OsmId, ElementId> node_ids;
    for (const auto& [id, node] : graph.nodes()) {
      SceneElement e;
      e.kind = ElementKind::Object;
      e.name = road_node_name(id);
      e.semantic_type = "road.node";
      e.layer = LdmLayer::L1_Static;
      e.static_attributes = {{"osm_id", static_cast<double>(id)},
                             {"lat", node.position.lat},
                             {"lon", node.position.lon}};
      node_ids[id] = txn.upsert_element(e).first;
    }
    for (const auto& [id, way] : graph.ways()) {
      SceneElement e;
      e.kind = ElementKind::Object;
      e.name = road_way_name(id);
      e.semantic_type = "road.way";
      e.layer = LdmLayer::L1_Static;
      std::vector<double> refs(way.node_refs.begin(), way.node_refs.end());
      e.static_attributes = {{"osm_id", static_cast<double>(id)},
                             {"node_refs", std::move(refs)},
                             {"oneway", way.oneway}};
      for (const auto& [k, v] : way.tags) e.static_attributes["tag:" + k] = v;
      const ElementId way_id = txn.upsert_element(e).first;
      for (auto ref : way.node_refs) txn.add_relation({way_id, "hasNode", node_ids.at(ref), std::nullopt});
    }
    return MapLoadCounts{graph.nodes().size(), graph.ways().size()};
  });
}

// ---- Traversal ---------------------------------------------------------------

std::vector<OsmId> next_nodes(const RoadGraph& graph, OsmId from, double heading_deg, std::size_t k) {
  const RoadNode* start = graph.find_node(from);
  if (start == nullptr) throw Error(ErrorCode::UnknownNode, "road node " + std::to_string(from));
  std::vector<OsmId> out;
  if (k == 0) return out;

  const auto& first_edges = graph.edges_from(from);
  if (first_edges.empty()) return out;

  auto bearing_to = [&](OsmId a, OsmId b) {
    return geo::bearing_deg(graph.find_node(a)->position, graph.find_node(b)->position);
  };

  // Seed: least deviation from the requested heading, ties by node id.
  OsmId seed = 0;
  double best = 1e300;
  for (const auto& e : first_edges) {
    const double dev = geo::bearing_deviation(bearing_to(from, e.neighbor), heading_deg);
    if (dev < best - 1e-9 || (std::abs(dev - best) <= 1e-9 && e.neighbor < seed)) {
      best = dev;
      seed = e.neighbor;
    }
  }

  std::set<OsmId> visited{from, seed};
  std::deque<std::pair<OsmId, double>> queue{{seed, bearing_to(from, seed)}};
  out.push_back(seed);

  while (!queue.empty() && out.size() < k) {
    const auto [node, incoming] = queue.front();
    queue.pop_front();
    std::vector<std::pair<double, OsmId>> next;
    for (const auto& e : graph.edges_from(node)) {
      if (visited.contains(e.neighbor)) continue;
      next.emplace_back(geo::bearing_deviation(bearing_to(node, e.neighbor), incoming), e.neighbor);
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end(),
                           [](const auto& a, const auto& b) { return a.second == b.second; }),
               next.end());
    for (const auto& [dev, nb] : next) {
      if (out.size() == k) break;
      if (!visited.insert(nb).second) continue;
      out.push_back(nb);
      queue.emplace_back(nb, bearing_to(node, nb));
    }
  }
  return out;
}

// ---- Map matching --------------------------------------------------------------

std::optional<MapMatch> map_match(const RoadGraph& graph, const GeoPosition& p, MatchParams params) {
  const double dlat = geo::rad2deg(params.inflation_m / geo::kEarthRadiusM);
  const double cos_lat = std::cos(geo::deg2rad(p.lat));
  const double dlon = cos_lat > 1e-9 ? std::min(360.0, dlat / cos_lat) : 360.0;

  std::vector<MapMatch> candidates;
  for (const auto& [way_id, way] : graph.ways()) {
    const auto& b = graph.way_bounds(way_id);
    if (p.lat < b.min_lat - dlat || p.lat > b.max_lat + dlat || p.lon < b.min_lon - dlon ||
        p.lon > b.max_lon + dlon) {
      continue;
    }
    const geo::EnuPoint origin{};
    for (std::size_t i = 0; i + 1 < way.node_refs.size(); ++i) {
      const auto a = geo::wgs84_to_enu_unbounded(p, graph.find_node(way.node_refs[i])->position);
      const auto c = geo::wgs84_to_enu_unbounded(p, graph.find_node(way.node_refs[i + 1])->position);
      const auto proj = geo::project_to_segment(origin, a, c);
      candidates.push_back({way_id, i, proj.distance, proj.t});
    }
  }
  if (candidates.empty()) return std::nullopt;

  double best = candidates.front().distance_m;
  for (const auto& c : candidates) best = std::min(best, c.distance_m);
  if (best > params.threshold_m) return std::nullopt;
  // Candidates are already in (way, segment) order.
  for (const auto& c : candidates) {
    if (c.distance_m <= best + kMatchTieEpsilon) return c;
  }
  return std::nullopt;
}

}  // namespace ldm
