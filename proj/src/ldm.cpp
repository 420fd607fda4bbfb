#include "ldm/ldm.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "ldm/error.hpp"
#include "ldm/geo.hpp"

namespace ldm {

namespace {

std::string uid_of(ElementId id) { return std::to_string(id.value); }

nlohmann::ordered_json pose_json(const GeoPose& p) {
  nlohmann::ordered_json j;
  j["lat"] = p.lat;
  j["lon"] = p.lon;
  j["alt"] = p.alt;
  j["heading"] = p.heading;
  if (p.speed) j["speed"] = *p.speed;
  return j;
}

ObjectReport report_of(const ElementTrack& t, const FrameRecord& f) {
  ObjectReport r;
  r.element_id = t.element.id;
  r.name = t.element.name;
  r.semantic_type = t.element.semantic_type;
  r.layer = t.element.layer;
  r.pose = f.pose;
  r.timestamp = f.timestamp;
  return r;
}

void sort_by_distance(std::vector<ObjectReport>& out, std::optional<double> ObjectReport::*field) {
  std::sort(out.begin(), out.end(), [field](const ObjectReport& a, const ObjectReport& b) {
    const double da = *(a.*field), db = *(b.*field);
    if (da != db) return da < db;
    return a.element_id < b.element_id;
  });
}

const GeoPose& ego_pose(const StoreView& view, ElementId ego, Timestamp at) {
  const auto& track = view.at(ego);
  const FrameRecord* f = latest_frame_at(track, at);
  if (f == nullptr || !f->pose) {
    throw Error(ErrorCode::NoPose, "element " + uid_of(ego) + " has no pose at " + std::to_string(to_us(at)));
  }
  return *f->pose;
}

void check_radius(double radius_m) {
  if (!(radius_m > 0.0) || !std::isfinite(radius_m)) {
    throw Error(ErrorCode::InvalidArgument, "radius must be positive");
  }
}

// Elements positioned at `at` whose distance to `anchor` is within the radius.
std::vector<ObjectReport> within(const StoreView& view, const GeoPosition& anchor, double radius_m, Timestamp at,
                                 std::optional<ElementId> exclude, std::optional<double> ObjectReport::*field) {
  std::vector<ObjectReport> out;
  view.for_each([&](const ElementTrack& t) {
    if (exclude && t.element.id == *exclude) return;
    const FrameRecord* f = latest_frame_at(t, at);
    if (f == nullptr || !f->pose) return;
    const double d = geo::haversine_m(anchor, f->pose->position());
    if (d > radius_m) return;
    auto r = report_of(t, *f);
    r.*field = d;
    out.push_back(std::move(r));
  });
  sort_by_distance(out, field);
  return out;
}

}  // namespace

nlohmann::ordered_json to_json(const ObjectReport& r) {
  nlohmann::ordered_json j;
  j["element_id"] = r.element_id.value;
  j["name"] = r.name;
  j["semantic_type"] = r.semantic_type;
  j["layer"] = std::string(to_string(r.layer));
  j["timestamp"] = to_us(r.timestamp);
  if (r.pose) j["pose"] = pose_json(*r.pose);
  if (r.distance_to_ego) j["distance_to_ego"] = *r.distance_to_ego;
  if (r.distance_to_node) j["distance_to_node"] = *r.distance_to_node;
  if (r.matched_way) j["matched_way"] = *r.matched_way;
  return j;
}

nlohmann::ordered_json to_json(const std::vector<InfoField>& fields) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& f : fields) j[f.name] = f.value;
  return j;
}

OpenLabelPayload build_export(const StoreView& view, TimeInterval interval) {
  OpenLabelPayload p;
  p.streams = view.streams();

  std::set<ElementId> exported;
  view.for_each([&](const ElementTrack& t) {
    for (const auto& f : t.frames) {
      if (interval.contains(f.timestamp)) {
        exported.insert(t.element.id);
        return;
      }
    }
  });

  // Static map elements referenced by exported elements come along.
  std::set<ElementId> extra;
  for (const auto& r : view.relations()) {
    if (exported.contains(r.subject)) {
      if (const auto* o = view.find(r.object); o != nullptr && o->element.layer == LdmLayer::L1_Static) {
        extra.insert(r.object);
      }
    }
    if (exported.contains(r.object)) {
      if (const auto* s = view.find(r.subject); s != nullptr && s->element.layer == LdmLayer::L1_Static) {
        extra.insert(r.subject);
      }
    }
  }
  exported.insert(extra.begin(), extra.end());

  for (const auto id : exported) {
    const auto& t = view.at(id);
    const ElementRef ref{t.element.kind, uid_of(id)};
    p.elements.emplace(ref, PayloadElement{t.element.kind, ref.uid, t.element.name, t.element.semantic_type,
                                           t.element.layer, t.element.static_attributes});
    for (const auto& f : t.frames) {
      if (!interval.contains(f.timestamp)) continue;
      auto [it, fresh] = p.frames.try_emplace(f.frame_index);
      PayloadFrame& frame = it->second;
      if (fresh) {
        // Elements are visited in ascending id order, so the lowest id sets
        // the frame-level timestamp and source.
        frame.timestamp = f.timestamp;
        frame.source = f.source;
      }
      PayloadFrameEntry entry;
      entry.pose = f.pose;
      entry.dynamic_attributes = f.dynamic_attributes;
      if (f.timestamp != frame.timestamp) entry.timestamp = f.timestamp;
      if (f.source != frame.source) entry.source = f.source;
      frame.entries.emplace(ref, std::move(entry));
    }
  }

  for (const auto& r : view.relations()) {
    if (!exported.contains(r.subject) || !exported.contains(r.object)) continue;
    const auto& s = view.at(r.subject).element;
    const auto& o = view.at(r.object).element;
    p.relations.emplace(std::to_string(p.relations.size()),
                        PayloadRelation{r.predicate,
                                        {ElementRef{s.kind, uid_of(r.subject)}},
                                        {ElementRef{o.kind, uid_of(r.object)}},
                                        r.frame_span});
  }
  return p;
}

Ldm::Ldm(LdmConfig cfg) : store_(std::move(cfg)) {}

void Ldm::configure(const LdmConfig& cfg) { store_.configure(cfg); }

LdmConfig Ldm::config() const { return store_.config(); }

CommitCounts Ldm::add_objects(const OpenLabelPayload& payload, FrameSource source) {
  return commit_payload(payload, store_, source);
}

CommitCounts Ldm::add_cpm(const CpmMessage& message) {
  return commit_payload(cpm_to_openlabel(message), store_, FrameSource::V2X);
}

MapLoadCounts Ldm::load_map(const RoadGraph& graph) {
  std::unique_lock lock(map_mutex_);
  const auto counts = load_into_store(graph, store_);
  map_ = std::make_shared<const RoadGraph>(map_ ? map_->merged_with(graph) : graph);
  return counts;
}

MapLoadResult Ldm::load_osm(std::istream& document) {
  auto parsed = parse_osm(document);
  MapLoadResult out;
  out.counts = load_map(parsed.graph);
  out.warnings = std::move(parsed.warnings);
  return out;
}

std::shared_ptr<const RoadGraph> Ldm::road_graph() const {
  std::shared_lock lock(map_mutex_);
  return map_;
}

std::shared_ptr<const RoadGraph> Ldm::require_map() const {
  auto g = road_graph();
  if (!g || g->ways().empty()) throw Error(ErrorCode::NoMap, "no road graph loaded");
  return g;
}

MatchParams Ldm::match_params() const {
  const auto cfg = config();
  return {cfg.match_threshold_m, cfg.match_inflation_m};
}

OpenLabelPayload Ldm::export_payload(TimeInterval interval) const {
  if (interval.empty()) throw Error(ErrorCode::InvalidArgument, "export interval is empty");
  return store_.read([&](const StoreView& v) { return build_export(v, interval); });
}

namespace {

ExportCounts counts_of(const OpenLabelPayload& p) {
  ExportCounts c;
  c.elements = p.elements.size();
  for (const auto& [idx, f] : p.frames) c.frames += f.entries.size();
  c.relations = p.relations.size();
  return c;
}

}  // namespace

ExportCounts Ldm::export_archive(TimeInterval interval, std::ostream& sink) const {
  const auto payload = export_payload(interval);
  sink << serialize_openlabel(payload) << '\n';
  sink.flush();
  if (!sink) throw Error(ErrorCode::SinkError, "write failed");
  return counts_of(payload);
}

ExportCounts Ldm::export_archive(TimeInterval interval, const std::filesystem::path& file) const {
  const auto payload = export_payload(interval);
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::SinkError, file.string() + ": " + std::strerror(errno));
  out << serialize_openlabel(payload) << '\n';
  out.close();
  if (!out) throw Error(ErrorCode::SinkError, file.string() + ": write failed");
  return counts_of(payload);
}

std::vector<FrameRecord> Ldm::read_frames(ElementId id, TimeInterval interval) const {
  return store_.read([&](const StoreView& v) {
    (void)v.at(id);
    return v.frames_in(id, interval);
  });
}

Snapshot Ldm::snapshot(Timestamp at) const { return store_.snapshot(at); }

std::vector<InfoField> Ldm::get_info() const {
  auto g = road_graph();
  return store_.read([&](const StoreView& v) {
    const auto s = v.stats();
    std::int64_t at_latest = 0;
    if (s.frame_range) {
      const FrameIndex last = s.frame_range->second;
      v.for_each([&](const ElementTrack& t) {
        if (!t.frames.empty() && t.frames.back().frame_index == last) ++at_latest;
      });
    }
    auto n = [](auto x) { return static_cast<std::int64_t>(x); };
    std::vector<InfoField> out;
    for (auto layer : kAllLayers) {
      out.push_back({"elements_" + std::string(to_string(layer)), n(s.element_count_per_layer.at(layer))});
    }
    out.push_back({"elements_total", n(s.element_count())});
    out.push_back({"objects_at_latest_frame", at_latest});
    out.push_back({"frame_min", s.frame_range ? n(s.frame_range->first) : 0});
    out.push_back({"frame_max", s.frame_range ? n(s.frame_range->second) : 0});
    out.push_back({"frames_total", n(s.frame_count)});
    out.push_back({"relations", n(s.relation_count)});
    out.push_back({"streams", n(s.stream_count)});
    out.push_back({"last_update_us", to_us(s.last_update)});
    out.push_back({"evicted_total", n(s.evicted_total)});
    out.push_back({"evicted_elements_total", n(s.evicted_elements_total)});
    out.push_back({"map_nodes", g ? n(g->nodes().size()) : 0});
    out.push_back({"map_ways", g ? n(g->ways().size()) : 0});
    return out;
  });
}

std::vector<ObjectReport> Ldm::objects_within(ElementId ego, double radius_m, Timestamp at) const {
  check_radius(radius_m);
  return store_.read([&](const StoreView& v) {
    const auto anchor = ego_pose(v, ego, at).position();
    return within(v, anchor, radius_m, at, ego, &ObjectReport::distance_to_ego);
  });
}

std::vector<ObjectReport> Ldm::objects_on_same_way(ElementId ego, Timestamp at) const {
  const auto params = match_params();
  return store_.read([&](const StoreView& v) {
    const auto pose = ego_pose(v, ego, at);
    const auto graph = require_map();
    std::vector<ObjectReport> out;
    const auto ego_match = map_match(*graph, pose.position(), params);
    if (!ego_match) return out;
    v.for_each([&](const ElementTrack& t) {
      if (t.element.id == ego) return;
      const FrameRecord* f = latest_frame_at(t, at);
      if (f == nullptr || !f->pose) return;
      const auto m = map_match(*graph, f->pose->position(), params);
      if (!m || m->way != ego_match->way) return;
      auto r = report_of(t, *f);
      r.distance_to_ego = geo::haversine_m(pose.position(), f->pose->position());
      r.matched_way = m->way;
      out.push_back(std::move(r));
    });
    sort_by_distance(out, &ObjectReport::distance_to_ego);
    return out;
  });
}

std::vector<ObjectReport> Ldm::stationary_objects(Timestamp at, std::optional<Duration> window,
                                                  std::optional<double> speed_eps) const {
  const auto cfg = config();
  const Duration w = window.value_or(cfg.stationary_window);
  const double eps = speed_eps.value_or(cfg.stationary_speed_eps);
  if (w <= Duration::zero()) throw Error(ErrorCode::InvalidArgument, "window must be positive");
  if (!(eps >= 0.0)) throw Error(ErrorCode::InvalidArgument, "speed_eps must be >= 0");

  return store_.read([&](const StoreView& v) {
    std::vector<ObjectReport> out;
    v.for_each([&](const ElementTrack& t) {
      std::vector<const FrameRecord*> posed;
      for (const auto& f : t.frames) {
        if (f.timestamp > at - w && f.timestamp <= at && f.pose) posed.push_back(&f);
      }
      if (posed.size() < 2) return;
      for (std::size_t i = 0; i < posed.size(); ++i) {
        const auto& pose = *posed[i]->pose;
        double speed;
        if (pose.speed) {
          speed = *pose.speed;
        } else {
          const auto* a = posed[i == 0 ? 0 : i - 1];
          const auto* b = posed[i == 0 ? 1 : i];
          const double dt = std::chrono::duration<double>(b->timestamp - a->timestamp).count();
          speed = geo::haversine_m(a->pose->position(), b->pose->position()) / dt;
        }
        if (speed > eps) return;
      }
      out.push_back(report_of(t, *posed.back()));
    });
    return out;
  });
}

std::vector<OsmId> Ldm::next_road_nodes(ElementId ego, std::size_t k, Timestamp at) const {
  const auto graph = require_map();
  const auto params = match_params();
  const auto pose = store_.read([&](const StoreView& v) { return ego_pose(v, ego, at); });
  const auto m = map_match(*graph, pose.position(), params);
  if (!m) throw Error(ErrorCode::Unmatched, "element " + uid_of(ego) + " is not on any road");
  std::vector<OsmId> out;
  if (k == 0) return out;

  const auto& refs = graph->ways().at(m->way).node_refs;
  const OsmId a = refs[m->segment], b = refs[m->segment + 1];
  const double along = geo::bearing_deg(graph->find_node(a)->position, graph->find_node(b)->position);
  const OsmId forward = geo::bearing_deviation(along, pose.heading) <= 90.0 ? b : a;
  out.push_back(forward);
  for (auto id : next_nodes(*graph, forward, pose.heading, k - 1)) out.push_back(id);
  return out;
}

std::vector<ObjectReport> Ldm::objects_near_node(OsmId node, double radius_m, Timestamp at) const {
  const auto graph = road_graph();
  const RoadNode* n = graph ? graph->find_node(node) : nullptr;
  if (n == nullptr) throw Error(ErrorCode::UnknownNode, "road node " + std::to_string(node));
  check_radius(radius_m);
  return store_.read([&](const StoreView& v) {
    return within(v, n->position, radius_m, at, std::nullopt, &ObjectReport::distance_to_node);
  });
}

std::optional<MapMatch> Ldm::match_element(ElementId id, Timestamp at) const {
  const auto graph = require_map();
  const auto params = match_params();
  const auto pose = store_.read([&](const StoreView& v) { return ego_pose(v, id, at); });
  return map_match(*graph, pose.position(), params);
}

std::size_t Ldm::evict(Timestamp now) {
  const auto cfg = config();
  std::function<void(const StoreView&)> archive;
  if (cfg.archive_dir) {
    archive = [&](const StoreView& v) {
      std::optional<Timestamp> begin;
      Timestamp end{};
      v.for_each([&](const ElementTrack& t) {
        const auto ttl = cfg.ttl(t.element.layer);
        if (!ttl || t.frames.empty()) return;
        const Timestamp cutoff = now - *ttl;
        if (t.frames.front().timestamp >= cutoff) return;
        begin = begin ? std::min(*begin, t.frames.front().timestamp) : t.frames.front().timestamp;
        end = std::max(end, cutoff);
      });
      if (!begin) return;
      const TimeInterval interval{*begin, end};
      std::filesystem::create_directories(*cfg.archive_dir);
      const auto file = *cfg.archive_dir / ("ldm-archive-" + std::to_string(to_us(interval.begin)) + "-" +
                                            std::to_string(to_us(interval.end)) + ".json");
      std::ofstream out(file, std::ios::binary | std::ios::trunc);
      out << serialize_openlabel(build_export(v, interval)) << '\n';
      out.close();
      if (!out) throw Error(ErrorCode::SinkError, file.string() + ": write failed");
    };
  }
  return store_.evict_expired(now, archive);
}

}  // namespace ldm
