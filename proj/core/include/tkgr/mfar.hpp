#pragma once

// Multi-faceted entity representations.
//
// Stage 1 (per snapshot): relation-aware attenuated graph attention. For an
// entity e_i, triples (e_i, aux, e_j) are gathered over 1..K hop neighbors,
// where aux is the sum of relation embeddings along a sampled shortest
// relation path (the relation's own embedding at hop 1). Each triple is
// projected, scored with a LeakyReLU head, damped by a Gaussian attenuation
// exp(-k^2 / (2 b^2)) of its hop count, softmax-normalized, aggregated and
// squashed per head; heads are concatenated. Isolated entities fall back to
// a learned projection of their static embedding.
//
// Stage 2 (across snapshots): causal multi-head self-attention over the
// entity's per-snapshot vectors inside a trailing window; the final
// position's output is the multi-faceted representation Z.
//
// Representations are memoized per (entity, latest-covered-snapshot,
// parameter version); neighbor sampling uses a dedicated RNG derived only
// from (sample seed, entity, snapshot) so it is stable across parameter
// updates.

#include <cstdint>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "tkgr/autodiff.hpp"
#include "tkgr/params.hpp"
#include "tkgr/tkg.hpp"

namespace tkgr {

struct MfarConfig {
  std::size_t dim = 200;          // shared width of embeddings and both stages
  std::size_t raga_heads = 8;     // graph-attention heads
  std::size_t tsan_heads = 8;     // temporal-attention heads
  std::size_t max_hop = 2;        // K: deepest gathered neighbors
  std::size_t neighbor_cap = 10;  // sampled neighbors per hop per snapshot
  std::size_t window = 60;        // trailing snapshot window for stage 2
  double bandwidth = 1.0;         // b in the hop attenuation
  double leaky_slope = 0.2;
  bool use_mfar = true;  // off: static entity embeddings everywhere
  bool use_raga = true;  // off: static embeddings feed stage 2
  bool use_tsan = true;  // off: stage-1 output of the latest snapshot
  std::uint64_t sample_seed = 1;

  void validate() const;
};

class Representer {
 public:
  Representer(const TemporalKG& kg, ParameterStore& store, const MfarConfig& cfg,
              Rng& init_rng);

  const MfarConfig& config() const { return cfg_; }

  ad::Var entity_embedding(std::uint32_t e) const;
  ad::Var relation_embedding(std::uint32_t r) const;  // includes the stop id row

  // Eq.-style auxiliary relation: elementwise sum of relation embeddings
  // along a path; a single relation returns its own embedding.
  ad::Var auxiliary_relation(const std::vector<std::uint32_t>& path) const;

  static double attenuation(std::size_t hop, double bandwidth);

  struct GatheredTriple {
    std::uint32_t neighbor = 0;
    std::size_t hop = 1;
    std::vector<std::uint32_t> path;  // relation ids, length == hop
  };
  // Deterministic for fixed (sample seed, entity, snapshot); empty for
  // isolated entities.
  std::vector<GatheredTriple> gather_neighbors(std::size_t snapshot,
                                               std::uint32_t entity) const;

  // Stage-1 semantic embedding of one entity at one snapshot (memoized).
  ad::Var raga_update(std::size_t snapshot, std::uint32_t entity);

  // Stage-2 encoding; returns the final position's vector.
  ad::Var tsan_encode(const std::vector<ad::Var>& history) const;
  // All positions under the causal mask (test/oracle support; position p
  // matches tsan_encode of the length-(p+1) prefix bitwise).
  std::vector<ad::Var> tsan_all_positions(const std::vector<ad::Var>& history) const;

  // Multi-faceted representation of an entity at time t (memoized). Times
  // beyond the last observed snapshot reuse the last observed one; entities
  // with no observed history use the isolated-entity projection alone.
  ad::Var represent(std::uint32_t entity, std::int64_t t);

  // Instrumentation for memoization tests: counts of actual (non-cached)
  // evaluations.
  std::size_t raga_evaluations() const { return raga_evals_; }
  std::size_t represent_evaluations() const { return represent_evals_; }

  // Drops memoized graphs (used by finite-difference harnesses that mutate
  // parameter values in place without an optimizer step).
  void invalidate();

 private:
  ad::Var isolated_embedding(std::uint32_t entity) const;
  ad::Var raga_compute(std::size_t snapshot, std::uint32_t entity) const;
  ad::Var tsan_last_position(const std::vector<ad::Var>& history) const;
  void refresh_version_locked();

  const TemporalKG& kg_;
  ParameterStore& store_;
  MfarConfig cfg_;

  ad::Var entity_table_;    // |E| x D
  ad::Var relation_table_;  // (2|R| + 1) x D, last row = stop relation
  ad::Var w1_;              // D x 3D, row blocks per head
  ad::Var w2_;              // M x (D / M), one scoring row per head
  ad::Var w_iso_;           // D x D isolated-entity projection
  ad::Var wq_, wk_, wv_;    // D x D, column blocks per head

  mutable std::mutex mu_;
  std::uint64_t seen_version_ = 0;
  std::unordered_map<std::uint64_t, ad::Var> raga_memo_;
  std::unordered_map<std::uint64_t, ad::Var> z_memo_;
  std::size_t raga_evals_ = 0;
  std::size_t represent_evals_ = 0;
};

}  // namespace tkgr
