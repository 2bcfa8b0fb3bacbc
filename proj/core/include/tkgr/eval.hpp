#pragma once

// Link-prediction evaluation under the time-aware filtered protocol.
//
// For a query (s, r, ?, t) every entity e' != gold with a known fact
// (s, r, e', t) at exactly the query timestamp is removed from the candidate
// pool before ranking. Beam scores order the surviving candidates score-
// descending; equal scores and entities no surviving path reached fall back
// to ascending entity id, unreached after all scored. Both prediction
// directions are evaluated (subject queries through inverse relations) and
// pooled into one rank list.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tkgr/dataset.hpp"
#include "tkgr/policy.hpp"

namespace tkgr {

struct RankedResult {
  QueryTask query;
  std::uint32_t gold = 0;
  std::size_t rank = 1;  // 1-based filtered rank
  std::vector<Policy::RankedEntity> scores;  // beam scores the rank used
};

struct MetricsReport {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t query_count = 0;
};

// Entities excluded for the query: every e' != gold whose fact
// (query.subject, query.relation, e', query.time) appears in the dataset
// filter (which holds all splits in both orientations). Ascending ids.
std::vector<std::uint32_t> time_aware_filter(const QueryTask& query,
                                             const Dataset& data);

// Filtered 1-based rank of the gold entity given beam scores. `exclusions`
// must not contain the gold entity (the filter never excludes it).
std::size_t rank_of_gold(const std::vector<Policy::RankedEntity>& scores,
                         std::uint32_t gold,
                         const std::vector<std::uint32_t>& exclusions,
                         std::size_t num_entities);

MetricsReport metrics_from_ranks(const std::vector<std::size_t>& ranks);

// Ranks every fact of `split` in both directions with a breadth-`beam_width`
// beam; per-query details are appended to `details` when given.
MetricsReport evaluate(Policy& policy, const std::vector<Quadruple>& split,
                       const Dataset& data, std::size_t beam_width,
                       std::vector<RankedResult>* details = nullptr);

// One-decimal percentage rendering: 0.58333 -> "58.3".
std::string render_pct(double fraction);

void write_report_text(std::ostream& out, const MetricsReport& report);
void write_report_csv(std::ostream& out, const MetricsReport& report);

}  // namespace tkgr
