#include "ldm/graph_store.hpp"

#include <algorithm>

namespace ldm {
namespace {

template <typename Frames>
auto frame_lower_bound(Frames& frames, FrameIndex index) {
  return std::lower_bound(frames.begin(), frames.end(), index,
                          [](const FrameRecord& f, FrameIndex i) { return f.frame_index < i; });
}

// Frames are ordered by index and, by invariant, by timestamp as well.
auto first_after(const std::vector<FrameRecord>& frames, Timestamp t) {
  return std::upper_bound(frames.begin(), frames.end(), t,
                          [](Timestamp x, const FrameRecord& f) { return x < f.timestamp; });
}

auto first_at_or_after(const std::vector<FrameRecord>& frames, Timestamp t) {
  return std::lower_bound(frames.begin(), frames.end(), t,
                          [](const FrameRecord& f, Timestamp x) { return f.timestamp < x; });
}

std::string describe(const std::vector<Violation>& violations) {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.message;
  }
  return out;
}

[[noreturn]] void unknown(ElementId id) {
  throw Error(ErrorCode::UnknownElement, "element " + std::to_string(id.value));
}

}  // namespace

const FrameRecord* latest_frame_at(const ElementTrack& track, Timestamp at) {
  auto it = first_after(track.frames, at);
  return it == track.frames.begin() ? nullptr : &*std::prev(it);
}

// ---- StoreView ------------------------------------------------------------

const ElementTrack* StoreView::find(ElementId id) const {
  auto it = state_->elements.find(id);
  return it == state_->elements.end() ? nullptr : &it->second.track;
}

const ElementTrack& StoreView::at(ElementId id) const {
  const auto* t = find(id);
  if (t == nullptr) unknown(id);
  return *t;
}

std::optional<ElementId> StoreView::find_by_key(ElementKind kind, const std::string& name,
                                                const std::string& semantic_type) const {
  auto it = state_->by_key.find({kind, name, semantic_type});
  if (it == state_->by_key.end()) return std::nullopt;
  return it->second;
}

const FrameRecord* StoreView::latest_frame_at(ElementId id, Timestamp at) const {
  return ldm::latest_frame_at(this->at(id), at);
}

std::vector<FrameRecord> StoreView::frames_in(ElementId id, TimeInterval interval) const {
  const auto& frames = at(id).frames;
  if (interval.empty()) return {};
  return {first_at_or_after(frames, interval.begin), first_at_or_after(frames, interval.end)};
}

Snapshot StoreView::snapshot(Timestamp at) const {
  Snapshot snap;
  snap.at = at;
  snap.elements.reserve(state_->elements.size());
  for (const auto& [id, stored] : state_->elements) {
    SnapshotEntry entry{stored.track.element, std::nullopt};
    if (const auto* f = latest_frame_at(id, at)) entry.frame = *f;
    snap.elements.push_back(std::move(entry));
  }
  snap.relations.assign(state_->relations.begin(), state_->relations.end());
  return snap;
}

StoreStats StoreView::stats() const {
  StoreStats s;
  for (auto layer : kAllLayers) s.element_count_per_layer[layer] = 0;
  for (const auto& [id, stored] : state_->elements) {
    ++s.element_count_per_layer[stored.track.element.layer];
    const auto& frames = stored.track.frames;
    if (frames.empty()) continue;
    s.frame_count += frames.size();
    const FrameIndex lo = frames.front().frame_index, hi = frames.back().frame_index;
    if (!s.frame_range) {
      s.frame_range = {lo, hi};
    } else {
      s.frame_range->first = std::min(s.frame_range->first, lo);
      s.frame_range->second = std::max(s.frame_range->second, hi);
    }
  }
  s.relation_count = state_->relations.size();
  s.stream_count = state_->streams.size();
  s.last_update = state_->last_update;
  s.evicted_total = state_->evicted_total;
  s.evicted_elements_total = state_->evicted_elements_total;
  return s;
}

// ---- Transaction ----------------------------------------------------------

void Transaction::save_counters() {
  if (counters_saved_) return;
  counters_saved_ = true;
  saved_next_id_ = state_->next_id;
  saved_last_update_ = state_->last_update;
  saved_evicted_total_ = state_->evicted_total;
}

std::pair<ElementId, bool> Transaction::upsert_element(const SceneElement& e, std::optional<Timestamp> seen_at) {
  if (auto violations = validate_element(e); !violations.empty()) {
    throw Error(ErrorCode::InvalidElement, e.name + ": " + describe(violations));
  }
  save_counters();
  const Timestamp seen = seen_at.value_or(state_->last_update);
  const detail::ElementKey key{e.kind, e.name, e.semantic_type};

  if (auto it = state_->by_key.find(key); it != state_->by_key.end()) {
    auto& stored = state_->elements.at(it->second);
    auto& element = stored.track.element;
    if (element.layer != e.layer) {
      throw Error(ErrorCode::InvalidElement, e.name + ": layer cannot change after creation");
    }
    for (const auto& f : stored.track.frames) {
      for (const auto& [name, value] : f.dynamic_attributes) {
        if (e.static_attributes.contains(name)) {
          throw Error(ErrorCode::InvalidElement, e.name + ": attribute overlap: " + name);
        }
      }
    }
    undo_.emplace_back(StaticChanged{element.id, element.static_attributes, stored.last_seen});
    for (const auto& [name, value] : e.static_attributes) element.static_attributes[name] = value;
    stored.last_seen = std::max(stored.last_seen, seen);
    return {element.id, false};
  }

  const ElementId id{state_->next_id++};
  detail::StoredElement stored;
  stored.track.element = e;
  stored.track.element.id = id;
  stored.track.element.frame_span = {};
  stored.last_seen = seen;
  state_->elements.emplace(id, std::move(stored));
  state_->by_key.emplace(key, id);
  undo_.emplace_back(Created{id});
  return {id, true};
}

FrameOutcome Transaction::insert_frame(const FrameRecord& rec) {
  auto it = state_->elements.find(rec.element_id);
  if (it == state_->elements.end()) unknown(rec.element_id);
  auto& track = it->second.track;

  if (rec.pose) {
    if (auto violations = validate_pose(*rec.pose); !violations.empty()) {
      throw Error(ErrorCode::InvalidElement,
                  track.element.name + " frame " + std::to_string(rec.frame_index) + ": " + describe(violations));
    }
    const auto& filter = state_->config.spatial_filter;
    if (filter && !filter->contains(rec.pose->lat, rec.pose->lon)) return FrameOutcome::Filtered;
  }

  save_counters();
  std::optional<FrameRecord> previous;
  if (auto f = frame_lower_bound(track.frames, rec.frame_index);
      f != track.frames.end() && f->frame_index == rec.frame_index) {
    previous = *f;
  }
  const bool added = merge_dynamic_into(track, rec);
  if (added) {
    undo_.emplace_back(FrameAdded{rec.element_id, rec.frame_index});
  } else {
    undo_.emplace_back(FrameChanged{rec.element_id, std::move(*previous)});
  }
  state_->last_update = std::max(state_->last_update, rec.timestamp);

  if (const auto cap = state_->config.max_frames_per_element; cap && track.frames.size() > *cap) {
    const auto excess = track.frames.size() - *cap;
    for (std::size_t i = 0; i < excess; ++i) undo_.emplace_back(FrameDropped{rec.element_id, track.frames[i]});
    track.frames.erase(track.frames.begin(), track.frames.begin() + static_cast<std::ptrdiff_t>(excess));
    track.element.frame_span = span_of(track.frames);
    state_->evicted_total += excess;
  }
  return added ? FrameOutcome::Inserted : FrameOutcome::Replaced;
}

bool Transaction::add_relation(const Relation& r) {
  if (!state_->elements.contains(r.subject)) unknown(r.subject);
  if (!state_->elements.contains(r.object)) unknown(r.object);
  if (!state_->relations.insert(r).second) return false;
  undo_.emplace_back(RelationAdded{r});
  return true;
}

bool Transaction::upsert_stream(const StreamDescriptor& s) {
  auto it = state_->streams.find(s.name);
  if (it != state_->streams.end() && it->second == s) return false;
  undo_.emplace_back(StreamChanged{
      s.name, it == state_->streams.end() ? std::nullopt : std::optional<StreamDescriptor>(it->second)});
  state_->streams[s.name] = s;
  return true;
}

void Transaction::rollback() noexcept {
  for (auto it = undo_.rbegin(); it != undo_.rend(); ++it) {
    std::visit(
        [this](auto& u) {
          using T = std::decay_t<decltype(u)>;
          if constexpr (std::is_same_v<T, Created>) {
            auto& e = state_->elements.at(u.id).track.element;
            state_->by_key.erase({e.kind, e.name, e.semantic_type});
            state_->elements.erase(u.id);
          } else if constexpr (std::is_same_v<T, StaticChanged>) {
            auto& stored = state_->elements.at(u.id);
            stored.track.element.static_attributes = std::move(u.old_attrs);
            stored.last_seen = u.old_seen;
          } else if constexpr (std::is_same_v<T, FrameAdded>) {
            auto& track = state_->elements.at(u.id).track;
            auto f = frame_lower_bound(track.frames, u.index);
            if (f != track.frames.end() && f->frame_index == u.index) track.frames.erase(f);
            track.element.frame_span = span_of(track.frames);
          } else if constexpr (std::is_same_v<T, FrameChanged>) {
            auto& track = state_->elements.at(u.id).track;
            auto f = frame_lower_bound(track.frames, u.old.frame_index);
            *f = std::move(u.old);
          } else if constexpr (std::is_same_v<T, FrameDropped>) {
            auto& track = state_->elements.at(u.id).track;
            auto f = frame_lower_bound(track.frames, u.old.frame_index);
            track.frames.insert(f, std::move(u.old));
            track.element.frame_span = span_of(track.frames);
          } else if constexpr (std::is_same_v<T, RelationAdded>) {
            state_->relations.erase(u.rel);
          } else if constexpr (std::is_same_v<T, StreamChanged>) {
            if (u.old) {
              state_->streams[u.name] = std::move(*u.old);
            } else {
              state_->streams.erase(u.name);
            }
          }
        },
        *it);
  }
  undo_.clear();
  if (counters_saved_) {
    state_->next_id = saved_next_id_;
    state_->last_update = saved_last_update_;
    state_->evicted_total = saved_evicted_total_;
  }
}

// ---- GraphStore -----------------------------------------------------------

GraphStore::GraphStore(LdmConfig cfg) {
  validate_config(cfg);
  state_.config = std::move(cfg);
}

void GraphStore::configure(const LdmConfig& cfg) {
  validate_config(cfg);
  std::unique_lock lock(mutex_);
  state_.config = cfg;
}

LdmConfig GraphStore::config() const {
  std::shared_lock lock(mutex_);
  return state_.config;
}

ElementId GraphStore::upsert_element(const SceneElement& e) {
  return write([&](Transaction& txn) { return txn.upsert_element(e).first; });
}

bool GraphStore::insert_frame(const FrameRecord& rec) {
  return write([&](Transaction& txn) { return txn.insert_frame(rec) != FrameOutcome::Filtered; });
}

void GraphStore::add_relation(const Relation& r) {
  write([&](Transaction& txn) { txn.add_relation(r); });
}

void GraphStore::upsert_stream(const StreamDescriptor& s) {
  write([&](Transaction& txn) { txn.upsert_stream(s); });
}

std::size_t GraphStore::evict_expired(Timestamp now, const std::function<void(const StoreView&)>& before) {
  std::unique_lock lock(mutex_);
  if (before) before(StoreView(state_));
  std::size_t removed_frames = 0;
  std::vector<ElementId> doomed;

  for (auto& [id, stored] : state_.elements) {
    auto& track = stored.track;
    const auto ttl = state_.config.ttl(track.element.layer);
    if (!ttl) continue;
    const bool had_frames = !track.frames.empty();
    // Keep frames with now - timestamp <= ttl.
    auto keep = first_at_or_after(track.frames, now - *ttl);
    const auto n = static_cast<std::size_t>(keep - track.frames.begin());
    if (n > 0) {
      track.frames.erase(track.frames.begin(), keep);
      track.element.frame_span = span_of(track.frames);
      removed_frames += n;
    }
    if (track.frames.empty() && (had_frames || now - stored.last_seen > *ttl)) doomed.push_back(id);
  }

  if (!doomed.empty()) {
    std::set<ElementId> gone(doomed.begin(), doomed.end());
    std::erase_if(state_.relations,
                  [&](const Relation& r) { return gone.contains(r.subject) || gone.contains(r.object); });
    for (auto id : doomed) {
      const auto& e = state_.elements.at(id).track.element;
      state_.by_key.erase({e.kind, e.name, e.semantic_type});
      state_.elements.erase(id);
    }
  }
  state_.evicted_total += removed_frames;
  state_.evicted_elements_total += doomed.size();
  return removed_frames;
}

std::vector<FrameRecord> GraphStore::query_frames(ElementId id, TimeInterval interval) const {
  return read([&](const StoreView& v) { return v.frames_in(id, interval); });
}

Snapshot GraphStore::snapshot(Timestamp at) const {
  return read([&](const StoreView& v) { return v.snapshot(at); });
}

StoreStats GraphStore::stats() const {
  return read([](const StoreView& v) { return v.stats(); });
}

}  // namespace ldm
