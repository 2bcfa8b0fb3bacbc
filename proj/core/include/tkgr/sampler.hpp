#pragma once

// Expert demonstrations via bi-directional breadth-first search.
//
// A demonstration for a query (e_s, r_q, ?, t_q) with known answer e_d is an
// ordered edge list from e_s to e_d whose timestamps are admissible under the
// environment's time constraint (non-increasing along the path, bounded by
// the query time), so the agent can imitate it action for action.
//
// The forward frontier grows from e_s and the backward frontier from e_d.
// Each expansion draws children with the exponential recency weighting
// P(edge at t') = exp(t' - t) / Σ exp(t'' - t) over the admissible edges;
// the backward frontier applies the same weighting from the answer side
// (its first level draws prior neighbors of e_d relative to t_q; deeper
// levels mirror the exponent to favor edges near the already-fixed tail
// time, which forward joins can still dominate). Frontier levels are capped
// at 64 nodes. Joins happen on shared entities, shortest assembled length
// first; every returned path is re-validated by stepwise replay against the
// environment's action sets.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "tkgr/env.hpp"
#include "tkgr/rng.hpp"
#include "tkgr/tkg.hpp"

namespace tkgr {

struct Demonstration {
  QueryTask query;
  std::vector<Quadruple> edges;  // ordered from the query subject to the answer

  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

// Exponential recency probabilities aligned with
// neighbors_before(entity, t, /*inclusive=*/false); empty when the entity
// has no strictly earlier edges.
std::vector<double> prior_sampling_weights(const TemporalKG& graph,
                                           std::uint32_t entity, std::int64_t t);

// Up to `count` deduplicated shortest demonstrations of at most `max_hops`
// edges; empty when the answer is unreachable under the time constraint.
// The query must carry its gold answer.
std::vector<Demonstration> sample_demonstrations(const Env& env,
                                                 const QueryTask& query,
                                                 std::size_t max_hops,
                                                 std::size_t count, Rng& rng);

// True when every edge is a member of the corresponding valid-action set
// while stepping the environment along the demonstration.
bool demonstration_replays(const Env& env, const Demonstration& demo);

// Cache format: a header line carrying the graph and config hashes, then one
// demonstration per line (query tuple, tab, space-separated `s,r,o,t` edges).
void save_demonstrations(const std::filesystem::path& path,
                         std::uint64_t graph_hash, std::uint64_t config_hash,
                         const std::vector<Demonstration>& demos);

// nullopt when the file is missing or either hash differs (the caller
// resamples); malformed content raises an integrity error.
std::optional<std::vector<Demonstration>> load_demonstrations(
    const std::filesystem::path& path, std::uint64_t graph_hash,
    std::uint64_t config_hash);

}  // namespace tkgr
