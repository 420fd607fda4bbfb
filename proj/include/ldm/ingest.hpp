#pragma once

#include "ldm/core_model.hpp"
#include "ldm/graph_store.hpp"
#include "ldm/openlabel.hpp"

namespace ldm {

/// Newly created entities; updates of existing ones are not counted.
struct CommitCounts {
  std::size_t elements = 0;
  std::size_t frames = 0;
  std::size_t relations = 0;
  bool operator==(const CommitCounts&) const = default;
};

/// Upserts elements (matched by kind, name and type), inserts frames through
/// the spatial filter, and adds relations. `source` applies to frames that name
/// none themselves. All-or-nothing: any error rolls the
/// whole payload back and is rethrown with payload-local context.
CommitCounts commit_payload(const OpenLabelPayload& payload, GraphStore& store, FrameSource source);

/// Same, inside an already open transaction.
CommitCounts commit_payload(const OpenLabelPayload& payload, Transaction& txn, FrameSource source);

}  // namespace ldm
