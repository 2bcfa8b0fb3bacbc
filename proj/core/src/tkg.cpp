#include "tkgr/tkg.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <deque>
#include <limits>

#include "tkgr/common.hpp"

namespace tkgr {
namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isdigit(c) != 0;
  });
}

// Howard Hinnant's civil-days algorithm: days since 1970-01-01.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);             // [0, 399]
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;   // [0, 365]
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;            // [0, 146096]
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

}  // namespace

std::uint32_t invert_relation(std::uint32_t r, std::size_t num_base_relations) {
  const auto n = static_cast<std::uint32_t>(num_base_relations);
  if (r == 2 * n) return r;  // self-loop/stop id is its own inverse
  if (r >= 2 * n) fail(ErrorKind::contract, strf("relation id %u out of range", r));
  return r < n ? r + n : r - n;
}

std::int64_t parse_timestamp_field(const std::string& field) {
  // ISO date YYYY-MM-DD
  if (field.size() == 10 && field[4] == '-' && field[7] == '-' &&
      all_digits(field.substr(0, 4)) && all_digits(field.substr(5, 2)) &&
      all_digits(field.substr(8, 2))) {
    const long y = std::stol(field.substr(0, 4));
    const unsigned m = static_cast<unsigned>(std::stoul(field.substr(5, 2)));
    const unsigned d = static_cast<unsigned>(std::stoul(field.substr(8, 2)));
    if (m < 1 || m > 12 || d < 1 || d > 31)
      fail(ErrorKind::parse, strf("invalid calendar date '%s'", field.c_str()));
    return days_from_civil(y, m, d);
  }
  std::int64_t value = 0;
  const char* first = field.data();
  const char* last = first + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    fail(ErrorKind::parse,
         strf("timestamp '%s' is neither an integer nor an ISO date", field.c_str()));
  return value;
}

std::vector<Quadruple> parse_quadruples(std::istream& in, const std::string& source,
                                        Vocab& entities, Vocab& relations) {
  std::vector<Quadruple> quads;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 4)
      fail(ErrorKind::parse, strf("%s:%zu: expected at least 4 tab-separated fields, got %zu",
                                  source.c_str(), lineno, fields.size()));
    try {
      Quadruple q;
      q.s = entities.intern(fields[0]);
      q.r = relations.intern(fields[1]);
      q.o = entities.intern(fields[2]);
      q.t = parse_timestamp_field(fields[3]);
      quads.push_back(q);
    } catch (const Error& e) {
      fail(e.kind(), strf("%s:%zu: %s", source.c_str(), lineno, e.what()));
    }
  }
  return quads;
}

void write_quadruples(std::ostream& out, const std::vector<Quadruple>& quads,
                      const Vocab& entities, const Vocab& relations) {
  for (const auto& q : quads) {
    out << entities.name(q.s) << '\t' << relations.name(q.r) << '\t'
        << entities.name(q.o) << '\t' << q.t << '\n';
  }
}

TemporalKG TemporalKG::build(const std::vector<Quadruple>& train_quads,
                             std::size_t num_entities, std::size_t num_base_relations) {
  TemporalKG kg;
  kg.num_entities_ = num_entities;
  kg.num_base_relations_ = num_base_relations;

  kg.facts_ = train_quads;
  std::sort(kg.facts_.begin(), kg.facts_.end());
  const auto last = std::unique(kg.facts_.begin(), kg.facts_.end());
  kg.duplicates_removed_ = static_cast<std::size_t>(kg.facts_.end() - last);
  kg.facts_.erase(last, kg.facts_.end());

  for (const auto& q : kg.facts_) {
    if (q.s >= num_entities || q.o >= num_entities)
      fail(ErrorKind::contract, strf("entity id out of range in fact (%u,%u,%u)", q.s, q.r, q.o));
    if (q.r >= num_base_relations)
      fail(ErrorKind::contract, strf("relation id %u not a base relation", q.r));
  }

  // Edge set closed under inversion: original ids live in [0,|R|),
  // inverses in [|R|, 2|R|), so the two halves never collide.
  std::vector<Quadruple> edges;
  edges.reserve(kg.facts_.size() * 2);
  const auto nrel = static_cast<std::uint32_t>(num_base_relations);
  for (const auto& q : kg.facts_) {
    edges.push_back(q);
    edges.push_back({q.o, q.r + nrel, q.s, q.t});
  }
  kg.all_edges_used_ = edges.size();

  // ---- snapshots: group by timestamp, CSR per snapshot ----
  std::vector<std::int64_t> ts;
  ts.reserve(edges.size());
  for (const auto& e : edges) ts.push_back(e.t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  kg.timestamps_ = std::move(ts);

  auto snap_index = [&kg](std::int64_t t) {
    return static_cast<std::size_t>(
        std::lower_bound(kg.timestamps_.begin(), kg.timestamps_.end(), t) -
        kg.timestamps_.begin());
  };

  kg.snap_offsets_.assign(kg.timestamps_.size(), {});
  kg.snap_edges_.assign(kg.timestamps_.size(), {});
  {
    std::vector<std::vector<Quadruple>> per_snap(kg.timestamps_.size());
    for (const auto& e : edges) per_snap[snap_index(e.t)].push_back(e);
    for (std::size_t si = 0; si < per_snap.size(); ++si) {
      auto& group = per_snap[si];
      std::sort(group.begin(), group.end());
      auto& offsets = kg.snap_offsets_[si];
      auto& out = kg.snap_edges_[si];
      offsets.assign(num_entities + 1, 0);
      out.reserve(group.size());
      for (const auto& e : group) offsets[e.s + 1] += 1;
      for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
      for (const auto& e : group) out.push_back({e.r, e.o, e.t});
    }
  }

  // ---- prior index: per entity, newest first, then relation, then object ----
  {
    std::vector<Quadruple> by_entity = edges;
    std::sort(by_entity.begin(), by_entity.end(),
              [](const Quadruple& a, const Quadruple& b) {
                if (a.s != b.s) return a.s < b.s;
                if (a.t != b.t) return a.t > b.t;  // newest first
                if (a.r != b.r) return a.r < b.r;
                return a.o < b.o;
              });
    kg.prior_offsets_.assign(num_entities + 1, 0);
    kg.prior_edges_.reserve(by_entity.size());
    for (const auto& e : by_entity) kg.prior_offsets_[e.s + 1] += 1;
    for (std::size_t i = 1; i < kg.prior_offsets_.size(); ++i)
      kg.prior_offsets_[i] += kg.prior_offsets_[i - 1];
    for (const auto& e : by_entity) kg.prior_edges_.push_back({e.r, e.o, e.t});
  }
  return kg;
}

std::int64_t TemporalKG::last_timestamp() const {
  if (timestamps_.empty()) fail(ErrorKind::contract, "graph has no edges");
  return timestamps_.back();
}

std::optional<std::size_t> TemporalKG::snapshot_at_or_before(std::int64_t t) const {
  auto it = std::upper_bound(timestamps_.begin(), timestamps_.end(), t);
  if (it == timestamps_.begin()) return std::nullopt;
  return static_cast<std::size_t>(it - timestamps_.begin()) - 1;
}

std::span<const Edge> TemporalKG::snapshot_out_edges(std::size_t snapshot,
                                                     std::uint32_t entity) const {
  if (snapshot >= snap_edges_.size())
    fail(ErrorKind::contract, strf("snapshot index %zu out of range", snapshot));
  if (entity >= num_entities_)
    fail(ErrorKind::contract, strf("entity id %u out of range", entity));
  const auto& offsets = snap_offsets_[snapshot];
  const auto& arr = snap_edges_[snapshot];
  return {arr.data() + offsets[entity], offsets[entity + 1] - offsets[entity]};
}

std::span<const Edge> TemporalKG::neighbors_before(std::uint32_t entity, std::int64_t t,
                                                   bool inclusive) const {
  if (entity >= num_entities_)
    fail(ErrorKind::contract, strf("entity id %u out of range", entity));
  const Edge* first = prior_edges_.data() + prior_offsets_[entity];
  const Edge* last = prior_edges_.data() + prior_offsets_[entity + 1];
  // Slice is sorted by timestamp descending; admissible edges form a suffix.
  const Edge* cut =
      inclusive ? std::lower_bound(first, last, t,
                                   [](const Edge& e, std::int64_t bound) { return e.t > bound; })
                : std::lower_bound(first, last, t,
                                   [](const Edge& e, std::int64_t bound) { return e.t >= bound; });
  return {cut, static_cast<std::size_t>(last - cut)};
}

std::vector<std::vector<std::uint32_t>> TemporalKG::bfs_layers(std::size_t snapshot,
                                                               std::uint32_t src,
                                                               std::size_t max_hops) const {
  std::vector<std::vector<std::uint32_t>> layers;
  std::vector<bool> seen(num_entities_, false);
  seen[src] = true;
  std::vector<std::uint32_t> frontier{src};
  for (std::size_t hop = 0; hop < max_hops && !frontier.empty(); ++hop) {
    std::vector<std::uint32_t> next;
    for (std::uint32_t u : frontier) {
      for (const Edge& e : snapshot_out_edges(snapshot, u)) {
        if (!seen[e.o]) {
          seen[e.o] = true;
          next.push_back(e.o);
        }
      }
    }
    std::sort(next.begin(), next.end());
    frontier = next;
    layers.push_back(std::move(next));
  }
  while (layers.size() < max_hops) layers.emplace_back();
  return layers;
}

std::optional<std::vector<std::uint32_t>> TemporalKG::shortest_relation_path(
    std::size_t snapshot, std::uint32_t src, std::uint32_t dst, std::size_t max_hops,
    Rng& rng) const {
  if (src == dst) return std::vector<std::uint32_t>{};
  constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(num_entities_, kUnreached);
  // Number of distinct shortest relation-paths reaching each node (parallel
  // edges counted separately); doubles keep large counts from overflowing.
  std::vector<double> npaths(num_entities_, 0.0);
  dist[src] = 0;
  npaths[src] = 1.0;
  std::deque<std::uint32_t> queue{src};
  while (!queue.empty()) {
    const std::uint32_t u = queue.front();
    queue.pop_front();
    if (dist[u] >= max_hops || (dist[dst] != kUnreached && dist[u] >= dist[dst])) continue;
    for (const Edge& e : snapshot_out_edges(snapshot, u)) {
      if (dist[e.o] == kUnreached) {
        dist[e.o] = dist[u] + 1;
        queue.push_back(e.o);
      }
      if (dist[e.o] == dist[u] + 1) npaths[e.o] += npaths[u];
    }
  }
  if (dist[dst] == kUnreached) return std::nullopt;

  // Walk backwards from dst, picking each predecessor edge with probability
  // proportional to how many shortest paths flow through it; this samples
  // uniformly over all shortest relation-paths.
  std::vector<std::uint32_t> reversed;
  std::uint32_t cur = dst;
  while (cur != src) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> choices;  // (pred, relation)
    std::vector<double> weights;
    for (std::uint32_t u = 0; u < num_entities_; ++u) {
      if (dist[u] + 1 != dist[cur] || npaths[u] <= 0.0) continue;
      for (const Edge& e : snapshot_out_edges(snapshot, u)) {
        if (e.o == cur) {
          choices.emplace_back(u, e.r);
          weights.push_back(npaths[u]);
        }
      }
    }
    if (choices.empty())
      fail(ErrorKind::contract, "shortest-path back-walk found no predecessor");
    const std::size_t pick = rng.weighted(weights);
    reversed.push_back(choices[pick].second);
    cur = choices[pick].first;
  }
  std::reverse(reversed.begin(), reversed.end());
  return reversed;
}

std::uint64_t TemporalKG::content_hash() const {
  // FNV-1a over the sorted deduplicated fact list
  std::uint64_t h = 1469598103934665603ull;
  auto feed = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  feed(num_entities_);
  feed(num_base_relations_);
  for (const auto& q : facts_) {
    feed(q.s);
    feed(q.r);
    feed(q.o);
    feed(static_cast<std::uint64_t>(q.t));
  }
  return h;
}

}  // namespace tkgr
