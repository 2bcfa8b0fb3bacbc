#include "tkgr/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "tkgr/common.hpp"

namespace tkgr {

namespace {

// exp(t_i - t_ref) / Σ exp(t_j - t_ref); the reference cancels, so the list
// is max-shifted instead, which keeps arbitrarily old timestamps from
// underflowing the normalizer.
std::vector<double> recency_weights(const std::vector<std::int64_t>& times) {
  std::vector<double> w(times.size());
  if (times.empty()) return w;
  const std::int64_t mx = *std::max_element(times.begin(), times.end());
  double total = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    w[i] = std::exp(static_cast<double>(times[i] - mx));
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

constexpr std::size_t kFrontierCap = 64;

struct ForwardNode {
  std::uint32_t entity = 0;
  std::int64_t time = 0;  // last edge timestamp; query time at level 0
  std::vector<Quadruple> path;
};

struct BackwardNode {
  std::uint32_t entity = 0;
  std::int64_t floor = 0;  // time of the tail edge adjacent to `entity`
  bool has_floor = false;
  std::vector<Quadruple> tail;  // forward-oriented, ends at the answer
};

template <typename Node>
void cap_level(std::vector<Node>& nodes, std::vector<double>& probs, Rng& rng) {
  if (nodes.size() <= kFrontierCap) return;
  const auto picked = rng.weighted_without_replacement(probs, kFrontierCap);
  std::vector<Node> kept;
  kept.reserve(picked.size());
  for (std::size_t i : picked) kept.push_back(std::move(nodes[i]));
  nodes = std::move(kept);
}

bool replays_internal(const Env& env, const QueryTask& query,
                      const std::vector<Quadruple>& edges) {
  if (edges.empty() || edges.size() > env.config().max_steps) return false;
  if (edges.front().s != query.subject) return false;
  if (!query.gold || edges.back().o != *query.gold) return false;
  EnvState state = env.initial_state(query);
  for (const Quadruple& edge : edges) {
    if (edge.s != state.entity) return false;
    const ActionCandidate want{edge.r, edge.o, edge.t};
    const auto actions = env.valid_actions(state);
    if (std::find(actions.begin(), actions.end(), want) == actions.end())
      return false;
    state = env.step(state, want);
  }
  return true;
}

}  // namespace

std::vector<double> prior_sampling_weights(const TemporalKG& graph,
                                           std::uint32_t entity,
                                           std::int64_t t) {
  const auto edges = graph.neighbors_before(entity, t, /*inclusive=*/false);
  std::vector<std::int64_t> times;
  times.reserve(edges.size());
  for (const Edge& e : edges) times.push_back(e.t);
  return recency_weights(times);
}

std::vector<Demonstration> sample_demonstrations(const Env& env,
                                                 const QueryTask& query,
                                                 std::size_t max_hops,
                                                 std::size_t count, Rng& rng) {
  if (!query.gold)
    fail(ErrorKind::contract, "demonstration sampling requires the gold answer");
  if (max_hops == 0 || max_hops > env.config().max_steps)
    fail(ErrorKind::argument,
         strf("demonstration hop bound must lie in [1, %zu]",
              env.config().max_steps));
  if (count == 0) return {};

  const TemporalKG& kg = env.graph();
  const std::uint32_t stop_id = kg.stop_relation_id();
  const bool include_query_time =
      env.config().time_constraint == TimeConstraint::paper;
  const std::size_t fwd_depth = (max_hops + 1) / 2;
  const std::size_t bwd_depth = max_hops / 2;

  std::vector<std::vector<ForwardNode>> fwd(fwd_depth + 1);
  fwd[0].push_back({query.subject, query.time, {}});
  for (std::size_t level = 1; level <= fwd_depth; ++level) {
    std::vector<ForwardNode> children;
    std::vector<double> probs;
    for (const ForwardNode& node : fwd[level - 1]) {
      const EnvState state{node.entity, node.time, query, 0};
      const auto actions = env.valid_actions(state);
      std::vector<std::int64_t> times;
      for (const ActionCandidate& a : actions)
        if (a.relation != stop_id) times.push_back(a.time);
      const auto weights = recency_weights(times);
      std::size_t wi = 0;
      for (const ActionCandidate& a : actions) {
        if (a.relation == stop_id) continue;
        ForwardNode child{a.entity, a.time, node.path};
        child.path.push_back({node.entity, a.relation, a.entity, a.time});
        children.push_back(std::move(child));
        probs.push_back(weights[wi++]);
      }
    }
    cap_level(children, probs, rng);
    fwd[level] = std::move(children);
  }

  std::vector<std::vector<BackwardNode>> bwd(bwd_depth + 1);
  bwd[0].push_back({*query.gold, 0, false, {}});
  for (std::size_t level = 1; level <= bwd_depth; ++level) {
    std::vector<BackwardNode> children;
    std::vector<double> probs;
    for (const BackwardNode& node : bwd[level - 1]) {
      const auto edges =
          kg.neighbors_before(node.entity, query.time, include_query_time);
      std::vector<std::int64_t> times;
      std::vector<const Edge*> admissible;
      for (const Edge& e : edges) {
        if (node.has_floor && e.t < node.floor) continue;
        admissible.push_back(&e);
        // First level: recency relative to the query time. Deeper levels:
        // mirrored exponent, favoring times close to the fixed tail time.
        times.push_back(node.has_floor ? 2 * node.floor - e.t : e.t);
      }
      const auto weights = recency_weights(times);
      for (std::size_t i = 0; i < admissible.size(); ++i) {
        const Edge& e = *admissible[i];
        BackwardNode child;
        child.entity = e.o;
        child.floor = e.t;
        child.has_floor = true;
        child.tail.reserve(node.tail.size() + 1);
        child.tail.push_back({e.o, invert_relation(e.r, kg.num_base_relations()),
                              node.entity, e.t});
        child.tail.insert(child.tail.end(), node.tail.begin(), node.tail.end());
        children.push_back(std::move(child));
        probs.push_back(weights[i]);
      }
    }
    cap_level(children, probs, rng);
    bwd[level] = std::move(children);
  }

  std::set<std::vector<Quadruple>> unique_paths;
  for (std::size_t len = 1; len <= max_hops; ++len) {
    for (std::size_t a = 0; a <= std::min(len, fwd_depth); ++a) {
      const std::size_t b = len - a;
      if (b > bwd_depth) continue;
      for (const ForwardNode& f : fwd[a]) {
        for (const BackwardNode& w : bwd[b]) {
          if (f.entity != w.entity) continue;
          if (w.has_floor && f.time < w.floor) continue;
          std::vector<Quadruple> edges = f.path;
          edges.insert(edges.end(), w.tail.begin(), w.tail.end());
          if (edges.empty()) continue;
          if (!replays_internal(env, query, edges)) continue;
          unique_paths.insert(std::move(edges));
        }
      }
    }
    if (!unique_paths.empty()) break;  // keep only the shortest length found
  }

  std::vector<Demonstration> demos;
  for (const auto& edges : unique_paths) {
    if (demos.size() >= count) break;
    demos.push_back({query, edges});
  }
  return demos;
}

bool demonstration_replays(const Env& env, const Demonstration& demo) {
  return replays_internal(env, demo.query, demo.edges);
}

void save_demonstrations(const std::filesystem::path& path,
                         std::uint64_t graph_hash, std::uint64_t config_hash,
                         const std::vector<Demonstration>& demos) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << strf("# demos graph=%016llx config=%016llx\n",
              static_cast<unsigned long long>(graph_hash),
              static_cast<unsigned long long>(config_hash));
  for (const Demonstration& d : demos) {
    if (!d.query.gold)
      fail(ErrorKind::contract, "cached demonstration lacks a gold answer");
    out << d.query.subject << ',' << d.query.relation << ',' << *d.query.gold
        << ',' << d.query.time << '\t';
    for (std::size_t i = 0; i < d.edges.size(); ++i) {
      const Quadruple& e = d.edges[i];
      if (i) out << ' ';
      out << e.s << ',' << e.r << ',' << e.o << ',' << e.t;
    }
    out << '\n';
  }
  if (!out.flush()) fail(ErrorKind::io, "cannot write " + path.string());
}

namespace {

std::vector<std::int64_t> parse_tuple(const std::string& text,
                                      const std::filesystem::path& path) {
  std::vector<std::int64_t> vals;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stoll(field, &used));
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      fail(ErrorKind::integrity,
           "corrupt demonstration cache " + path.string() + ": bad tuple '" +
               text + "'");
    }
  }
  if (vals.size() != 4)
    fail(ErrorKind::integrity, "corrupt demonstration cache " + path.string() +
                                   ": bad tuple '" + text + "'");
  return vals;
}

}  // namespace

std::optional<std::vector<Demonstration>> load_demonstrations(
    const std::filesystem::path& path, std::uint64_t graph_hash,
    std::uint64_t config_hash) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string header;
  if (!std::getline(in, header)) return std::nullopt;
  const std::string expected =
      strf("# demos graph=%016llx config=%016llx",
           static_cast<unsigned long long>(graph_hash),
           static_cast<unsigned long long>(config_hash));
  if (header != expected) return std::nullopt;

  std::vector<Demonstration> demos;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      fail(ErrorKind::integrity,
           "corrupt demonstration cache " + path.string() + ": missing query");
    const auto q = parse_tuple(line.substr(0, tab), path);
    Demonstration d;
    d.query.subject = static_cast<std::uint32_t>(q[0]);
    d.query.relation = static_cast<std::uint32_t>(q[1]);
    d.query.gold = static_cast<std::uint32_t>(q[2]);
    d.query.time = q[3];
    std::stringstream edges(line.substr(tab + 1));
    std::string tuple;
    while (edges >> tuple) {
      const auto e = parse_tuple(tuple, path);
      d.edges.push_back({static_cast<std::uint32_t>(e[0]),
                         static_cast<std::uint32_t>(e[1]),
                         static_cast<std::uint32_t>(e[2]), e[3]});
    }
    if (d.edges.empty())
      fail(ErrorKind::integrity,
           "corrupt demonstration cache " + path.string() + ": empty path");
    demos.push_back(std::move(d));
  }
  return demos;
}

}  // namespace tkgr
