#include "ldm/ingest.hpp"

#include <algorithm>

#include "ldm/error.hpp"

namespace ldm {

CommitCounts commit_payload(const OpenLabelPayload& payload, Transaction& txn, FrameSource source) {
  CommitCounts counts;
  std::optional<Timestamp> latest;
  for (const auto& [idx, frame] : payload.frames) {
    for (const auto& [ref, entry] : frame.entries) {
      const Timestamp t = entry.timestamp.value_or(frame.timestamp);
      latest = latest ? std::max(*latest, t) : t;
    }
    if (frame.entries.empty()) latest = latest ? std::max(*latest, frame.timestamp) : frame.timestamp;
  }

  std::string context;
  try {
    for (const auto& [name, stream] : payload.streams) {
      context = "stream " + name;
      txn.upsert_stream(stream);
    }

    std::map<ElementRef, ElementId> ids;
    for (const auto& [ref, pe] : payload.elements) {
      context = std::string(to_string(ref.kind)) + " " + ref.uid;
      SceneElement e;
      e.kind = pe.kind;
      e.name = pe.name;
      e.semantic_type = pe.type;
      e.layer = pe.layer;
      e.static_attributes = pe.static_attributes;
      auto [id, created] = txn.upsert_element(e, latest);
      ids.emplace(ref, id);
      if (created) ++counts.elements;
    }

    for (const auto& [idx, frame] : payload.frames) {
      for (const auto& [ref, entry] : frame.entries) {
        context = "frame " + std::to_string(idx) + " " + std::string(to_string(ref.kind)) + " " + ref.uid;
        FrameRecord rec;
        rec.frame_index = idx;
        rec.timestamp = entry.timestamp.value_or(frame.timestamp);
        rec.element_id = ids.at(ref);
        rec.pose = entry.pose;
        rec.dynamic_attributes = entry.dynamic_attributes;
        rec.source = entry.source.value_or(frame.source.value_or(source));
        if (txn.insert_frame(rec) == FrameOutcome::Inserted) ++counts.frames;
      }
    }

    for (const auto& [uid, r] : payload.relations) {
      context = "relation " + uid;
      for (const auto& s : r.subjects) {
        for (const auto& o : r.objects) {
          if (txn.add_relation({ids.at(s), r.predicate, ids.at(o), r.frame_span})) ++counts.relations;
        }
      }
    }
  } catch (const Error& e) {
    throw Error(e.code(), "payload " + context + ": " + e.message());
  } catch (const std::out_of_range&) {
    throw Error(ErrorCode::SchemaError, "payload " + context + ": unresolved element reference");
  }
  return counts;
}

CommitCounts commit_payload(const OpenLabelPayload& payload, GraphStore& store, FrameSource source) {
  return store.write([&](Transaction& txn) { return commit_payload(payload, txn, source); });
}

}  // namespace ldm
