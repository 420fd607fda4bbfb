#pragma once

// Embedded temporal property-graph store.
//
// Elements are graph nodes carrying a static descriptor and a frame history;
// relations are directed labelled edges between elements. All public methods
// are thread-safe: reads share a lock, writes are exclusive. `read` and
// `write` expose the unlocked view/transaction for multi-step operations
// that must observe (or commit) a consistent state.

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "ldm/config.hpp"
#include "ldm/core_model.hpp"
#include "ldm/error.hpp"

namespace ldm {

struct StoreStats {
  std::map<LdmLayer, std::size_t> element_count_per_layer;
  /// Inclusive (min, max) stored frame index; empty iff no frames stored.
  std::optional<std::pair<FrameIndex, FrameIndex>> frame_range;
  std::size_t frame_count = 0;
  std::size_t relation_count = 0;
  std::size_t stream_count = 0;
  Timestamp last_update{};
  std::uint64_t evicted_total = 0;
  std::uint64_t evicted_elements_total = 0;

  [[nodiscard]] std::size_t element_count() const noexcept {
    std::size_t n = 0;
    for (const auto& [layer, c] : element_count_per_layer) n += c;
    return n;
  }
  bool operator==(const StoreStats&) const = default;
};

struct SnapshotEntry {
  SceneElement element;
  /// Latest frame with timestamp <= the snapshot instant, if any.
  std::optional<FrameRecord> frame;
  bool operator==(const SnapshotEntry&) const = default;
};

struct Snapshot {
  Timestamp at{};
  std::vector<SnapshotEntry> elements;  // ascending element id
  std::vector<Relation> relations;      // ascending relation order
  bool operator==(const Snapshot&) const = default;
};

/// Half-open time interval [begin, end).
struct TimeInterval {
  Timestamp begin{};
  Timestamp end{};
  [[nodiscard]] bool contains(Timestamp t) const noexcept { return t >= begin && t < end; }
  [[nodiscard]] bool empty() const noexcept { return end <= begin; }
};

enum class FrameOutcome { Filtered, Inserted, Replaced };

/// Latest frame with timestamp <= at, or nullptr.
const FrameRecord* latest_frame_at(const ElementTrack& track, Timestamp at);

namespace detail {

using ElementKey = std::tuple<ElementKind, std::string, std::string>;

struct StoredElement {
  ElementTrack track;
  /// Creation or latest upsert time, used to expire frame-less elements.
  Timestamp last_seen{};
};

struct StoreState {
  LdmConfig config;
  std::map<ElementId, StoredElement> elements;
  std::map<ElementKey, ElementId> by_key;
  std::set<Relation> relations;
  std::map<std::string, StreamDescriptor> streams;
  std::uint64_t next_id = 0;
  Timestamp last_update{};
  std::uint64_t evicted_total = 0;
  std::uint64_t evicted_elements_total = 0;
};

}  // namespace detail

/// Unlocked read access. Only valid inside GraphStore::read / write.
class StoreView {
 public:
  explicit StoreView(const detail::StoreState& state) : state_(&state) {}

  [[nodiscard]] const LdmConfig& config() const noexcept { return state_->config; }
  [[nodiscard]] const ElementTrack* find(ElementId id) const;
  /// Throws UnknownElement.
  [[nodiscard]] const ElementTrack& at(ElementId id) const;
  [[nodiscard]] std::optional<ElementId> find_by_key(ElementKind kind, const std::string& name,
                                                     const std::string& semantic_type) const;

  /// Visits elements in ascending id order.
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& [id, stored] : state_->elements) f(stored.track);
  }
  [[nodiscard]] std::size_t element_count() const noexcept { return state_->elements.size(); }

  /// Latest frame with timestamp <= at, or nullptr.
  [[nodiscard]] const FrameRecord* latest_frame_at(ElementId id, Timestamp at) const;
  [[nodiscard]] std::vector<FrameRecord> frames_in(ElementId id, TimeInterval interval) const;

  [[nodiscard]] const std::set<Relation>& relations() const noexcept { return state_->relations; }
  [[nodiscard]] const std::map<std::string, StreamDescriptor>& streams() const noexcept {
    return state_->streams;
  }
  [[nodiscard]] Snapshot snapshot(Timestamp at) const;
  [[nodiscard]] StoreStats stats() const;

 private:
  const detail::StoreState* state_;
};

/// Unlocked write access with an undo log; rolled back if the enclosing
/// GraphStore::write callback throws.
class Transaction {
 public:
  explicit Transaction(detail::StoreState& state) : state_(&state) {}

  [[nodiscard]] StoreView view() const { return StoreView(*state_); }

  /// Returns the element id and whether the element was newly created.
  std::pair<ElementId, bool> upsert_element(const SceneElement& e, std::optional<Timestamp> seen_at = {});
  FrameOutcome insert_frame(const FrameRecord& rec);
  /// Returns false if the relation already existed.
  bool add_relation(const Relation& r);
  /// Returns false if an identical stream was already registered.
  bool upsert_stream(const StreamDescriptor& s);

  void rollback() noexcept;

 private:
  struct Created { ElementId id; };
  struct StaticChanged { ElementId id; AttributeMap old_attrs; Timestamp old_seen; };
  struct FrameAdded { ElementId id; FrameIndex index; };
  struct FrameChanged { ElementId id; FrameRecord old; };
  struct FrameDropped { ElementId id; FrameRecord old; };
  struct RelationAdded { Relation rel; };
  struct StreamChanged { std::string name; std::optional<StreamDescriptor> old; };
  using Undo = std::variant<Created, StaticChanged, FrameAdded, FrameChanged, FrameDropped, RelationAdded,
                            StreamChanged>;

  detail::StoreState* state_;
  std::vector<Undo> undo_;
  bool counters_saved_ = false;
  std::uint64_t saved_next_id_ = 0;
  Timestamp saved_last_update_{};
  std::uint64_t saved_evicted_total_ = 0;

  void save_counters();
};

class GraphStore {
 public:
  explicit GraphStore(LdmConfig cfg = {});

  GraphStore(const GraphStore&) = delete;
  GraphStore& operator=(const GraphStore&) = delete;

  /// Throws InvalidConfig. TTL changes apply from the next eviction on.
  void configure(const LdmConfig& cfg);
  [[nodiscard]] LdmConfig config() const;

  /// Throws InvalidElement.
  ElementId upsert_element(const SceneElement& e);
  /// False when the spatial filter rejected the record. Throws UnknownElement,
  /// AttributeOverlap, TimestampRegression.
  bool insert_frame(const FrameRecord& rec);
  /// Duplicates are a no-op. Throws UnknownElement.
  void add_relation(const Relation& r);
  void upsert_stream(const StreamDescriptor& s);

  /// Removes frames older than their layer TTL and the finite-TTL elements
  /// left without frames. Returns the number of frames removed.
  /// `before` runs under the write lock just before anything is removed.
  std::size_t evict_expired(Timestamp now, const std::function<void(const StoreView&)>& before = {});

  /// Frames with timestamp in [interval.begin, interval.end), ascending index.
  [[nodiscard]] std::vector<FrameRecord> query_frames(ElementId id, TimeInterval interval) const;
  [[nodiscard]] Snapshot snapshot(Timestamp at) const;
  [[nodiscard]] StoreStats stats() const;

  template <typename F>
  decltype(auto) read(F&& f) const {
    std::shared_lock lock(mutex_);
    return std::forward<F>(f)(StoreView(state_));
  }

  template <typename F>
  decltype(auto) write(F&& f) {
    std::unique_lock lock(mutex_);
    Transaction txn(state_);
    try {
      return std::forward<F>(f)(txn);
    } catch (...) {
      txn.rollback();
      throw;
    }
  }

 private:
  mutable std::shared_mutex mutex_;
  detail::StoreState state_;
};

}  // namespace ldm
