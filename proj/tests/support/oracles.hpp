#pragma once

// Independent reference computations and fixed-seed scene generators shared
// by the unit, property and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "ldm/cpm.hpp"
#include "ldm/geo.hpp"
#include "ldm/graph_store.hpp"
#include "ldm/ldm.hpp"
#include "ldm/openlabel.hpp"
#include "ldm/road_graph.hpp"

namespace ldm::testing {

// ---- High-precision spherical geodesy ----------------------------------------

using hp = boost::multiprecision::cpp_bin_float_50;

inline hp hp_pi() { return boost::math::constants::pi<hp>(); }
inline hp hp_rad(double deg) { return hp(deg) * hp_pi() / 180; }
inline double hp_deg(const hp& rad) { return static_cast<double>(rad * 180 / hp_pi()); }

/// Great-circle distance from unit vectors (atan2 of |cross| and dot), so it
/// shares no formula with the haversine under test.
inline hp hp_distance_m(const GeoPosition& a, const GeoPosition& b) {
  using boost::multiprecision::atan2;
  using boost::multiprecision::cos;
  using boost::multiprecision::sin;
  using boost::multiprecision::sqrt;
  const hp la = hp_rad(a.lat), oa = hp_rad(a.lon), lb = hp_rad(b.lat), ob = hp_rad(b.lon);
  const hp ax = cos(la) * cos(oa), ay = cos(la) * sin(oa), az = sin(la);
  const hp bx = cos(lb) * cos(ob), by = cos(lb) * sin(ob), bz = sin(lb);
  const hp cx = ay * bz - az * by, cy = az * bx - ax * bz, cz = ax * by - ay * bx;
  return hp(6371000) * atan2(sqrt(cx * cx + cy * cy + cz * cz), ax * bx + ay * by + az * bz);
}

/// Direct geodesic on the sphere: travel hypot(east, north) metres from the
/// origin along the initial azimuth atan2(east, north).
inline GeoPosition hp_destination(const GeoPosition& o, double east_m, double north_m) {
  using boost::multiprecision::asin;
  using boost::multiprecision::atan2;
  using boost::multiprecision::cos;
  using boost::multiprecision::sin;
  using boost::multiprecision::sqrt;
  const hp e(east_m), n(north_m);
  const hp delta = sqrt(e * e + n * n) / hp(6371000);
  const hp theta = atan2(e, n);
  const hp p1 = hp_rad(o.lat), l1 = hp_rad(o.lon);
  const hp p2 = asin(sin(p1) * cos(delta) + cos(p1) * sin(delta) * cos(theta));
  hp l2 = l1 + atan2(sin(theta) * sin(delta) * cos(p1), cos(delta) - sin(p1) * sin(p2));
  double lon = hp_deg(l2);
  lon = std::fmod(lon + 180.0, 360.0);
  if (lon < 0) lon += 360.0;
  return {hp_deg(p2), lon - 180.0, o.alt};
}

// ---- Random generators -------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
  }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(integer(0, static_cast<std::int64_t>(v.size()) - 1))];
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

inline AttributeValue random_attribute(Rng& rng) {
  switch (rng.integer(0, 3)) {
    case 0: return rng.chance(0.5);
    case 1: return rng.uniform(-1e6, 1e6);
    case 2: return "t" + std::to_string(rng.integer(0, 1'000'000));
    default: {
      std::vector<double> v(static_cast<std::size_t>(rng.integer(0, 4)));
      for (auto& x : v) x = rng.uniform(-100, 100);
      return v;
    }
  }
}

struct SceneParams {
  int max_objects = 50;
  int max_frames = 200;
  GeoPosition center{48.1, 11.5, 0.0};
  double spread_m = 2000.0;
};

/// Random OpenLABEL payload: every object has at least one frame, static and
/// dynamic attribute names are disjoint, per-element timestamps strictly
/// increase with frame index, and some entries override timestamp/source.
inline OpenLabelPayload random_scene(Rng& rng, const SceneParams& sp = {}) {
  static const std::vector<std::string> types{"vehicle.car", "person.pedestrian", "vehicle.cyclist", "sign.stop",
                                              "object.unknown"};
  static const std::vector<FrameSource> sources{FrameSource::LocalPerception, FrameSource::V2X, FrameSource::Synthetic};
  OpenLabelPayload p;
  const int n_objects = static_cast<int>(rng.integer(1, sp.max_objects));
  const int n_frames = static_cast<int>(rng.integer(1, sp.max_frames));
  std::vector<ElementRef> refs;
  for (int i = 0; i < n_objects; ++i) {
    const auto kind = rng.chance(0.85) ? ElementKind::Object : ElementKind::Context;
    ElementRef ref{kind, std::to_string(i)};
    PayloadElement e;
    e.kind = kind;
    e.uid = ref.uid;
    e.name = "obj-" + std::to_string(i);
    e.type = rng.pick(types);
    e.layer = static_cast<LdmLayer>(rng.integer(2, 4));
    const int n_static = static_cast<int>(rng.integer(0, 3));
    for (int a = 0; a < n_static; ++a) e.static_attributes["s" + std::to_string(a)] = random_attribute(rng);
    p.elements.emplace(ref, e);
    refs.push_back(ref);
  }

  // Frame timestamps: base grows with index; per-entry overrides stay below
  // the next base so per-element order holds.
  const std::int64_t t0 = 1'700'000'000'000'000 + rng.integer(0, 1'000'000'000);
  std::map<ElementRef, bool> has_frame;
  for (int f = 0; f < n_frames; ++f) {
    PayloadFrame frame;
    frame.timestamp = from_us(t0 + f * 100'000);
    if (rng.chance(0.7)) frame.source = rng.pick(sources);
    for (const auto& ref : refs) {
      const bool last = f == n_frames - 1 && !has_frame[ref];
      if (!last && !rng.chance(std::min(1.0, 8.0 / n_frames + 0.05))) continue;
      has_frame[ref] = true;
      PayloadFrameEntry entry;
      if (rng.chance(0.9)) {
        const double e_m = rng.uniform(-sp.spread_m, sp.spread_m), n_m = rng.uniform(-sp.spread_m, sp.spread_m);
        const auto pos = geo::enu_to_wgs84(sp.center, {e_m, n_m, 0.0});
        entry.pose = make_pose(pos.lat, pos.lon, rng.uniform(-10, 500), rng.uniform(0, 360),
                               rng.chance(0.7) ? std::optional<double>(rng.uniform(0, 40)) : std::nullopt);
      }
      const int n_dyn = static_cast<int>(rng.integer(0, 2));
      for (int a = 0; a < n_dyn; ++a) entry.dynamic_attributes["d" + std::to_string(a)] = random_attribute(rng);
      if (rng.chance(0.2)) entry.timestamp = from_us(t0 + f * 100'000 + rng.integer(1, 50'000));
      if (rng.chance(0.1)) entry.source = rng.pick(sources);
      frame.entries.emplace(ref, std::move(entry));
    }
    if (!frame.entries.empty()) p.frames.emplace(static_cast<FrameIndex>(f), std::move(frame));
  }

  const int n_rel = static_cast<int>(rng.integer(0, std::min(10, n_objects)));
  static const std::vector<std::string> predicates{"follows", "near", "perceivedBy"};
  for (int r = 0; r < n_rel; ++r) {
    PayloadRelation rel;
    rel.predicate = rng.pick(predicates);
    rel.subjects.push_back(rng.pick(refs));
    rel.objects.push_back(rng.pick(refs));
    if (rng.chance(0.5)) {
      const auto b = static_cast<FrameIndex>(rng.integer(0, n_frames));
      rel.frame_span = FrameSpan{b, b + static_cast<FrameIndex>(rng.integer(1, 20))};
    }
    p.relations.emplace(std::to_string(r), std::move(rel));
  }
  return p;
}

inline CpmMessage random_cpm(Rng& rng, double max_offset_m = 10'000.0, int max_objects = 20) {
  static const std::vector<ObjectClass> classes{ObjectClass::Unknown, ObjectClass::Pedestrian, ObjectClass::Cyclist,
                                                ObjectClass::Vehicle};
  CpmMessage m;
  m.station_id = static_cast<std::uint32_t>(rng.integer(0, 4'000'000'000));
  m.generation_time = from_us(rng.integer(0, 2'000'000'000'000'000));
  m.reference_position = make_pose(rng.uniform(-80, 80), rng.uniform(-180, 179.999), rng.uniform(0, 100),
                                   rng.uniform(0, 360), rng.uniform(0, 30));
  const int n = static_cast<int>(rng.integer(0, max_objects));
  for (int i = 0; i < n; ++i) {
    PerceivedObject o;
    o.object_id = static_cast<std::uint32_t>(i * 3 + 1);
    const double r = max_offset_m * std::sqrt(rng.uniform(0, 1)), a = rng.uniform(0, 2 * M_PI);
    o.x_distance = static_cast<std::int64_t>(std::llround(r * std::sin(a) * 100));
    o.y_distance = static_cast<std::int64_t>(std::llround(r * std::cos(a) * 100));
    o.x_speed = rng.integer(-5000, 5000);
    o.y_speed = rng.integer(-5000, 5000);
    o.object_class = rng.pick(classes);
    o.confidence = static_cast<int>(rng.integer(0, 100));
    m.perceived_objects.push_back(o);
  }
  return m;
}

/// Perturbed grid road network around `center`: one way per row and per
/// column (some oneway), plus a few diagonals. Segment count ~ 2·rows·cols.
inline RoadGraph random_road_graph(Rng& rng, const GeoPosition& center, int rows, int cols, double spacing_m) {
  std::map<OsmId, RoadNode> nodes;
  auto id_of = [&](int r, int c) { return static_cast<OsmId>(1000 + r * cols + c); };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double e = (c - cols / 2.0) * spacing_m + rng.uniform(-0.2, 0.2) * spacing_m;
      const double n = (r - rows / 2.0) * spacing_m + rng.uniform(-0.2, 0.2) * spacing_m;
      nodes[id_of(r, c)] = RoadNode{id_of(r, c), geo::enu_to_wgs84(center, {e, n, 0})};
    }
  }
  std::map<OsmId, RoadWay> ways;
  OsmId way_id = 1;
  for (int r = 0; r < rows; ++r) {
    RoadWay w{way_id++, {}, {{"highway", "residential"}}, rng.chance(0.2)};
    for (int c = 0; c < cols; ++c) w.node_refs.push_back(id_of(r, c));
    ways[w.osm_id] = w;
  }
  for (int c = 0; c < cols; ++c) {
    RoadWay w{way_id++, {}, {{"highway", "primary"}}, rng.chance(0.2)};
    for (int r = 0; r < rows; ++r) w.node_refs.push_back(id_of(r, c));
    ways[w.osm_id] = w;
  }
  const int diagonals = static_cast<int>(rng.integer(0, 3));
  for (int d = 0; d < diagonals; ++d) {
    RoadWay w{way_id++, {}, {{"highway", "service"}}, false};
    const int r0 = static_cast<int>(rng.integer(0, rows - 2)), c0 = static_cast<int>(rng.integer(0, cols - 2));
    for (int s = 0; r0 + s < rows && c0 + s < cols; ++s) w.node_refs.push_back(id_of(r0 + s, c0 + s));
    ways[w.osm_id] = w;
  }
  return RoadGraph::build(std::move(nodes), std::move(ways));
}

// ---- Brute-force query oracles -----------------------------------------------

struct Hit {
  std::uint64_t id = 0;
  double distance = 0.0;
  bool operator==(const Hit&) const = default;
};

inline std::vector<Hit> sorted_hits(std::vector<Hit> hits) {
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  });
  return hits;
}

inline const SnapshotEntry* snapshot_entry(const Snapshot& s, ElementId id) {
  for (const auto& e : s.elements) {
    if (e.element.id == id) return &e;
  }
  return nullptr;
}

inline std::vector<Hit> oracle_within(const Snapshot& s, const GeoPosition& anchor, double radius,
                                      std::optional<ElementId> exclude) {
  std::vector<Hit> out;
  for (const auto& e : s.elements) {
    if (exclude && e.element.id == *exclude) continue;
    if (!e.frame || !e.frame->pose) continue;
    const double d = geo::haversine_m(anchor, e.frame->pose->position());
    if (d <= radius) out.push_back({e.element.id.value, d});
  }
  return sorted_hits(out);
}

/// Exhaustive nearest segment: every segment of every way, no prefilter.
inline std::optional<MapMatch> oracle_map_match(const RoadGraph& g, const GeoPosition& p, double threshold) {
  std::optional<MapMatch> best;
  for (const auto& [wid, way] : g.ways()) {
    for (std::size_t i = 0; i + 1 < way.node_refs.size(); ++i) {
      const auto a = geo::wgs84_to_enu_unbounded(p, g.nodes().at(way.node_refs[i]).position);
      const auto b = geo::wgs84_to_enu_unbounded(p, g.nodes().at(way.node_refs[i + 1]).position);
      const auto proj = geo::project_to_segment({0, 0, 0}, a, b);
      // Strictly better by more than the tie epsilon replaces; ways and
      // segments are visited in ascending order so ties keep the first.
      if (!best || proj.distance < best->distance_m - kMatchTieEpsilon) {
        best = MapMatch{wid, i, proj.distance, proj.t};
      }
    }
  }
  if (best && best->distance_m > threshold) return std::nullopt;
  return best;
}

/// Directed neighbour sets rebuilt from the way list.
inline std::map<OsmId, std::set<OsmId>> oracle_neighbours(const RoadGraph& g) {
  std::map<OsmId, std::set<OsmId>> nb;
  for (const auto& [id, n] : g.nodes()) nb[id];
  for (const auto& [wid, w] : g.ways()) {
    for (std::size_t i = 0; i + 1 < w.node_refs.size(); ++i) {
      nb[w.node_refs[i]].insert(w.node_refs[i + 1]);
      if (!w.oneway) nb[w.node_refs[i + 1]].insert(w.node_refs[i]);
    }
  }
  return nb;
}

inline std::vector<OsmId> oracle_next_nodes(const RoadGraph& g, OsmId from, double heading, std::size_t k) {
  const auto nb = oracle_neighbours(g);
  auto bearing = [&](OsmId a, OsmId b) { return geo::bearing_deg(g.nodes().at(a).position, g.nodes().at(b).position); };
  auto deviation = [](double a, double b) {
    double d = std::fmod(std::abs(a - b), 360.0);
    return d > 180.0 ? 360.0 - d : d;
  };
  std::vector<OsmId> out;
  if (k == 0 || nb.at(from).empty()) return out;
  std::optional<std::pair<double, OsmId>> seed;
  for (auto n : nb.at(from)) {
    const double d = deviation(bearing(from, n), heading);
    if (!seed || d < seed->first - 1e-9) seed = {d, n};
  }
  std::set<OsmId> seen{from, seed->second};
  std::vector<std::pair<OsmId, double>> frontier{{seed->second, bearing(from, seed->second)}};
  out.push_back(seed->second);
  for (std::size_t head = 0; head < frontier.size() && out.size() < k; ++head) {
    const auto [node, incoming] = frontier[head];
    std::vector<std::pair<double, OsmId>> cand;
    for (auto n : nb.at(node)) {
      if (!seen.contains(n)) cand.emplace_back(deviation(bearing(node, n), incoming), n);
    }
    std::sort(cand.begin(), cand.end());
    for (const auto& [d, n] : cand) {
      if (out.size() == k) break;
      seen.insert(n);
      out.push_back(n);
      frontier.emplace_back(n, bearing(node, n));
    }
  }
  return out;
}

/// Every posed frame in (at - window, at] at or below eps, with at least two
/// such frames; a frame without speed uses displacement to its predecessor
/// (successor for the first).
inline std::vector<std::uint64_t> oracle_stationary(const Snapshot& all_static, const GraphStore& store, Timestamp at,
                                                    Duration window, double eps) {
  std::vector<std::uint64_t> out;
  for (const auto& e : all_static.elements) {
    const auto frames = store.query_frames(e.element.id, {at - window + Duration{1}, at + Duration{1}});
    std::vector<FrameRecord> posed;
    for (const auto& f : frames) {
      if (f.pose) posed.push_back(f);
    }
    if (posed.size() < 2) continue;
    bool still = true;
    for (std::size_t i = 0; i < posed.size() && still; ++i) {
      double v;
      if (posed[i].pose->speed) {
        v = *posed[i].pose->speed;
      } else {
        const auto& a = i == 0 ? posed[0] : posed[i - 1];
        const auto& b = i == 0 ? posed[1] : posed[i];
        const double dt = static_cast<double>((b.timestamp - a.timestamp).count()) / 1e6;
        v = geo::haversine_m(a.pose->position(), b.pose->position()) / dt;
      }
      still = v <= eps;
    }
    if (still) out.push_back(e.element.id.value);
  }
  return out;
}

// ---- Store invariants ----------------------------------------------------------

/// Empty when every store invariant holds; otherwise a description.
inline std::string store_invariant_violation(const GraphStore& store) {
  return store.read([](const StoreView& v) -> std::string {
    std::size_t frames = 0;
    std::optional<FrameIndex> lo, hi;
    std::string bad;
    v.for_each([&](const ElementTrack& t) {
      if (!bad.empty()) return;
      const auto violations = validate_element(t.element, t.frames);
      if (!violations.empty()) {
        bad = t.element.name + ": " + violations.front().field + " " + violations.front().message;
        return;
      }
      frames += t.frames.size();
      for (const auto& f : t.frames) {
        lo = lo ? std::min(*lo, f.frame_index) : f.frame_index;
        hi = hi ? std::max(*hi, f.frame_index) : f.frame_index;
      }
    });
    if (!bad.empty()) return bad;
    for (const auto& r : v.relations()) {
      if (v.find(r.subject) == nullptr || v.find(r.object) == nullptr) return "dangling relation " + r.predicate;
    }
    const auto s = v.stats();
    if (s.frame_count != frames) return "frame_count mismatch";
    if (s.frame_range.has_value() != (frames > 0)) return "frame_range presence mismatch";
    if (s.frame_range && (s.frame_range->first != *lo || s.frame_range->second != *hi)) return "frame_range mismatch";
    if (s.element_count() != v.element_count()) return "element count mismatch";
    return {};
  });
}

}  // namespace ldm::testing
