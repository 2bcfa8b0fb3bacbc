#include "tkgr/eval.hpp"

#include <algorithm>
#include <ostream>

#include "tkgr/common.hpp"

namespace tkgr {

std::vector<std::uint32_t> time_aware_filter(const QueryTask& query,
                                             const Dataset& data) {
  if (!query.gold)
    fail(ErrorKind::contract, "time-aware filter requires a gold entity");
  std::vector<std::uint32_t> out;
  const auto n = static_cast<std::uint32_t>(data.entities.size());
  for (std::uint32_t e = 0; e < n; ++e) {
    if (e == *query.gold) continue;
    if (data.filter.contains({query.subject, query.relation, e, query.time}))
      out.push_back(e);
  }
  return out;
}

std::size_t rank_of_gold(const std::vector<Policy::RankedEntity>& scores,
                         std::uint32_t gold,
                         const std::vector<std::uint32_t>& exclusions,
                         std::size_t num_entities) {
  if (gold >= num_entities)
    fail(ErrorKind::argument, strf("gold entity id %u out of range", gold));
  std::vector<char> excluded(num_entities, 0);
  for (std::uint32_t e : exclusions) {
    if (e == gold)
      fail(ErrorKind::contract,
           strf("the filter excluded the gold entity %u itself", gold));
    if (e < num_entities) excluded[e] = 1;
  }

  // Scored candidates first (score descending, entity id ascending), then
  // every unscored survivor in id order; the rank is gold's position.
  std::vector<Policy::RankedEntity> pool;
  std::vector<char> seen(num_entities, 0);
  for (const auto& s : scores) {
    if (s.entity >= num_entities)
      fail(ErrorKind::argument,
           strf("scored entity id %u out of range", s.entity));
    if (seen[s.entity])
      fail(ErrorKind::argument, strf("entity %u scored twice", s.entity));
    seen[s.entity] = 1;
    if (!excluded[s.entity]) pool.push_back(s);
  }
  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entity < b.entity;
  });
  std::size_t position = 0;
  for (const auto& s : pool) {
    ++position;
    if (s.entity == gold) return position;
  }
  for (std::uint32_t e = 0; e < num_entities; ++e) {
    if (seen[e] || excluded[e]) continue;
    ++position;
    if (e == gold) return position;
  }
  fail(ErrorKind::contract,
       strf("gold entity %u missing from the candidate pool", gold));
}

MetricsReport metrics_from_ranks(const std::vector<std::size_t>& ranks) {
  MetricsReport report;
  report.query_count = ranks.size();
  if (ranks.empty()) return report;
  double inv = 0.0;
  std::size_t h1 = 0, h3 = 0, h10 = 0;
  for (std::size_t r : ranks) {
    inv += 1.0 / static_cast<double>(r);
    h1 += r <= 1;
    h3 += r <= 3;
    h10 += r <= 10;
  }
  const auto n = static_cast<double>(ranks.size());
  report.mrr = inv / n;
  report.hits1 = static_cast<double>(h1) / n;
  report.hits3 = static_cast<double>(h3) / n;
  report.hits10 = static_cast<double>(h10) / n;
  return report;
}

MetricsReport evaluate(Policy& policy, const std::vector<Quadruple>& split,
                       const Dataset& data, std::size_t beam_width,
                       std::vector<RankedResult>* details) {
  if (split.empty())
    fail(ErrorKind::argument, "cannot evaluate an empty split");
  const std::size_t num_entities = data.entities.size();
  std::vector<std::size_t> ranks;
  ranks.reserve(2 * split.size());
  for (const Quadruple& fact : split) {
    for (const QueryTask& query :
         {object_query(fact), subject_query(fact, data.num_base_relations())}) {
      const auto beam = policy.beam_inference(query, beam_width);
      const auto excluded = time_aware_filter(query, data);
      const std::size_t rank =
          rank_of_gold(beam.ranking, *query.gold, excluded, num_entities);
      ranks.push_back(rank);
      if (details)
        details->push_back({query, *query.gold, rank, beam.ranking});
    }
  }
  return metrics_from_ranks(ranks);
}

std::string render_pct(double fraction) {
  return strf("%.1f", fraction * 100.0);
}

void write_report_text(std::ostream& out, const MetricsReport& report) {
  out << "metric    value\n";
  out << "MRR       " << render_pct(report.mrr) << "\n";
  out << "Hits@1    " << render_pct(report.hits1) << "\n";
  out << "Hits@3    " << render_pct(report.hits3) << "\n";
  out << "Hits@10   " << render_pct(report.hits10) << "\n";
  out << "queries   " << report.query_count << "\n";
}

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  out << "metric,value\n";
  out << "mrr," << strf("%.17g", report.mrr) << "\n";
  out << "hits1," << strf("%.17g", report.hits1) << "\n";
  out << "hits3," << strf("%.17g", report.hits3) << "\n";
  out << "hits10," << strf("%.17g", report.hits10) << "\n";
  out << "queries," << report.query_count << "\n";
}

}  // namespace tkgr
