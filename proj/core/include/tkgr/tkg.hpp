#pragma once

// Temporal knowledge graph storage.
//
// Facts are quadruples (subject, relation, object, timestamp). The stored
// edge set is closed under inversion: every original fact (s, r, o, t) with
// r < |R| also appears as (o, r + |R|, s, t). Relation id 2|R| is reserved
// for the self-loop/stop action and never appears as a stored edge.
//
// Two views are maintained:
//  * snapshots: per-timestamp CSR adjacency (for snapshot-level attention)
//  * prior index: per-entity edges across all timestamps, sorted most
//    recent first, then by relation id, then by neighbor id (action space
//    and demonstration sampling read slices of this order directly)

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "tkgr/rng.hpp"
#include "tkgr/vocab.hpp"

namespace tkgr {

struct Quadruple {
  std::uint32_t s = 0, r = 0, o = 0;
  std::int64_t t = 0;
  friend bool operator==(const Quadruple&, const Quadruple&) = default;
  friend auto operator<=>(const Quadruple&, const Quadruple&) = default;
};

struct QuadrupleHash {
  std::size_t operator()(const Quadruple& q) const {
    return static_cast<std::size_t>(Rng::mix(
        {q.s, q.r, q.o, static_cast<std::uint64_t>(q.t)}));
  }
};

struct Edge {
  std::uint32_t r = 0, o = 0;
  std::int64_t t = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

// Relation-id inversion over the doubled id space; the stop id maps to itself.
std::uint32_t invert_relation(std::uint32_t r, std::size_t num_base_relations);

// Tab-separated quadruple stream: subject, relation, object, timestamp
// (integer or ISO date YYYY-MM-DD); extra fields ignored; blank lines and
// lines starting with '#' skipped. Vocab mode (building vs frozen) decides
// whether unseen names are interned or rejected.
std::vector<Quadruple> parse_quadruples(std::istream& in, const std::string& source,
                                        Vocab& entities, Vocab& relations);
void write_quadruples(std::ostream& out, const std::vector<Quadruple>& quads,
                      const Vocab& entities, const Vocab& relations);

std::int64_t parse_timestamp_field(const std::string& field);  // int or ISO date

class TemporalKG {
 public:
  static TemporalKG build(const std::vector<Quadruple>& train_quads,
                          std::size_t num_entities, std::size_t num_base_relations);

  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_base_relations() const { return num_base_relations_; }
  std::size_t num_relations() const { return 2 * num_base_relations_; }
  std::uint32_t stop_relation_id() const {
    return static_cast<std::uint32_t>(2 * num_base_relations_);
  }
  std::size_t duplicates_removed() const { return duplicates_removed_; }
  std::size_t num_edges() const { return all_edges_used_; }

  // sorted distinct timestamps with at least one edge
  const std::vector<std::int64_t>& timestamps() const { return timestamps_; }
  std::int64_t last_timestamp() const;
  // index of the latest snapshot with timestamp <= t, if any
  std::optional<std::size_t> snapshot_at_or_before(std::int64_t t) const;

  std::span<const Edge> snapshot_out_edges(std::size_t snapshot, std::uint32_t entity) const;

  // Edges of one entity with timestamp <= t (inclusive) or < t (exclusive),
  // most recent first, ties by relation id then neighbor id.
  std::span<const Edge> neighbors_before(std::uint32_t entity, std::int64_t t,
                                         bool inclusive) const;

  // Entities at snapshot-BFS distance exactly 1..max_hops from src;
  // layers[k-1] lists the hop-k entities in ascending id order.
  std::vector<std::vector<std::uint32_t>> bfs_layers(std::size_t snapshot,
                                                     std::uint32_t src,
                                                     std::size_t max_hops) const;

  // Relation ids along one uniformly-sampled shortest path src -> dst within
  // a snapshot (at most max_hops); nullopt when unreachable in that budget.
  std::optional<std::vector<std::uint32_t>> shortest_relation_path(
      std::size_t snapshot, std::uint32_t src, std::uint32_t dst,
      std::size_t max_hops, Rng& rng) const;

  // Deduplicated original-orientation facts the graph was built from.
  const std::vector<Quadruple>& facts() const { return facts_; }

  std::uint64_t content_hash() const;  // for cache invalidation

 private:
  std::size_t num_entities_ = 0;
  std::size_t num_base_relations_ = 0;
  std::size_t duplicates_removed_ = 0;
  std::size_t all_edges_used_ = 0;
  std::vector<Quadruple> facts_;
  std::vector<std::int64_t> timestamps_;
  // snapshot CSR: per snapshot, offsets (num_entities + 1) into edge array
  std::vector<std::vector<std::uint32_t>> snap_offsets_;
  std::vector<std::vector<Edge>> snap_edges_;
  // prior index CSR across all time
  std::vector<std::size_t> prior_offsets_;
  std::vector<Edge> prior_edges_;
};

}  // namespace tkgr
