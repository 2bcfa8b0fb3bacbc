#include "tkgr/mfar.hpp"

#include <algorithm>
#include <cmath>

#include "tkgr/common.hpp"

namespace tkgr {

void MfarConfig::validate() const {
  if (dim == 0) fail(ErrorKind::config, "representation dim must be positive");
  if (raga_heads == 0 || dim % raga_heads != 0)
    fail(ErrorKind::config,
         strf("graph-attention heads (%zu) must divide dim (%zu)", raga_heads, dim));
  if (tsan_heads == 0 || dim % tsan_heads != 0)
    fail(ErrorKind::config,
         strf("temporal-attention heads (%zu) must divide dim (%zu)", tsan_heads, dim));
  if (bandwidth <= 0.0) fail(ErrorKind::config, "attenuation bandwidth must be positive");
  if (max_hop < 1 || max_hop > 3)
    fail(ErrorKind::config, strf("max hop count must be in [1,3], got %zu", max_hop));
  if (window == 0) fail(ErrorKind::config, "history window must be positive");
  if (neighbor_cap == 0) fail(ErrorKind::config, "neighbor cap must be positive");
}

Representer::Representer(const TemporalKG& kg, ParameterStore& store, const MfarConfig& cfg,
                         Rng& init_rng)
    : kg_(kg), store_(store), cfg_(cfg) {
  cfg_.validate();
  const std::size_t d = cfg_.dim;
  entity_table_ = store_.create("emb/entity", {kg.num_entities(), d}, init_rng);
  relation_table_ = store_.create("emb/relation", {kg.num_relations() + 1, d}, init_rng);
  w1_ = store_.create("raga/w1", {d, 3 * d}, init_rng);
  w2_ = store_.create("raga/w2", {cfg_.raga_heads, d / cfg_.raga_heads}, init_rng);
  w_iso_ = store_.create("raga/w_iso", {d, d}, init_rng);
  wq_ = store_.create("tsan/wq", {d, d}, init_rng);
  wk_ = store_.create("tsan/wk", {d, d}, init_rng);
  wv_ = store_.create("tsan/wv", {d, d}, init_rng);
  seen_version_ = store_.version();
}

ad::Var Representer::entity_embedding(std::uint32_t e) const {
  if (e >= kg_.num_entities())
    fail(ErrorKind::contract, strf("entity id %u out of range", e));
  return ad::row(entity_table_, e);
}

ad::Var Representer::relation_embedding(std::uint32_t r) const {
  if (r > kg_.num_relations())  // ids 0..2|R| inclusive; last row = stop
    fail(ErrorKind::contract, strf("relation id %u out of range", r));
  return ad::row(relation_table_, r);
}

ad::Var Representer::auxiliary_relation(const std::vector<std::uint32_t>& path) const {
  if (path.empty()) fail(ErrorKind::argument, "auxiliary relation needs a non-empty path");
  ad::Var sum = relation_embedding(path[0]);
  for (std::size_t i = 1; i < path.size(); ++i)
    sum = ad::add(sum, relation_embedding(path[i]));
  return sum;
}

double Representer::attenuation(std::size_t hop, double bandwidth) {
  if (hop < 1) fail(ErrorKind::argument, "hop count must be at least 1");
  if (bandwidth <= 0.0) fail(ErrorKind::argument, "bandwidth must be positive");
  const double k = static_cast<double>(hop);
  return std::exp(-(k * k) / (2.0 * bandwidth * bandwidth));
}

std::vector<Representer::GatheredTriple> Representer::gather_neighbors(
    std::size_t snapshot, std::uint32_t entity) const {
  const auto layers = kg_.bfs_layers(snapshot, entity, cfg_.max_hop);
  Rng rng(Rng::mix({cfg_.sample_seed, 0x6761746865726e67ull, entity,
                    static_cast<std::uint64_t>(snapshot)}));
  std::vector<GatheredTriple> triples;
  for (std::size_t hop = 1; hop <= layers.size(); ++hop) {
    std::vector<std::uint32_t> chosen = layers[hop - 1];
    if (chosen.size() > cfg_.neighbor_cap) {
      // partial Fisher-Yates, then ascending ids for deterministic order
      for (std::size_t i = 0; i < cfg_.neighbor_cap; ++i) {
        const std::size_t j = i + rng.below(chosen.size() - i);
        std::swap(chosen[i], chosen[j]);
      }
      chosen.resize(cfg_.neighbor_cap);
      std::sort(chosen.begin(), chosen.end());
    }
    for (std::uint32_t nb : chosen) {
      auto path = kg_.shortest_relation_path(snapshot, entity, nb, hop, rng);
      if (!path || path->size() != hop)
        fail(ErrorKind::contract, "hop-layer entity lost its shortest path");
      triples.push_back({nb, hop, std::move(*path)});
    }
  }
  return triples;
}

ad::Var Representer::isolated_embedding(std::uint32_t entity) const {
  return ad::matvec(w_iso_, entity_embedding(entity));
}

ad::Var Representer::raga_compute(std::size_t snapshot, std::uint32_t entity) const {
  const auto triples = gather_neighbors(snapshot, entity);
  if (triples.empty()) return isolated_embedding(entity);

  const std::size_t heads = cfg_.raga_heads;
  const std::size_t hd = cfg_.dim / heads;
  const ad::Var e_i = entity_embedding(entity);

  // One projected vector per triple; heads read disjoint slices of it.
  std::vector<ad::Var> projected;
  std::vector<double> damp;
  projected.reserve(triples.size());
  damp.reserve(triples.size());
  for (const auto& tr : triples) {
    const ad::Var cat =
        ad::concat({e_i, auxiliary_relation(tr.path), entity_embedding(tr.neighbor)});
    projected.push_back(ad::matvec(w1_, cat));
    damp.push_back(attenuation(tr.hop, cfg_.bandwidth));
  }

  std::vector<ad::Var> head_outputs;
  head_outputs.reserve(heads);
  for (std::size_t m = 0; m < heads; ++m) {
    const ad::Var w2_m = ad::row(w2_, m);
    std::vector<ad::Var> slices, logits;
    slices.reserve(projected.size());
    logits.reserve(projected.size());
    for (std::size_t j = 0; j < projected.size(); ++j) {
      ad::Var t_mj = ad::slice(projected[j], m * hd, hd);
      ad::Var beta = ad::leaky_relu(ad::dot(w2_m, t_mj), cfg_.leaky_slope);
      logits.push_back(ad::scale(beta, damp[j]));
      slices.push_back(std::move(t_mj));
    }
    const ad::Var alpha = ad::softmax(ad::concat(logits));
    ad::Var agg = ad::smul(ad::slice(alpha, 0, 1), slices[0]);
    for (std::size_t j = 1; j < slices.size(); ++j)
      agg = ad::add(agg, ad::smul(ad::slice(alpha, j, 1), slices[j]));
    head_outputs.push_back(ad::sigmoid(agg));
  }
  return ad::concat(head_outputs);
}

ad::Var Representer::tsan_last_position(const std::vector<ad::Var>& history) const {
  const std::size_t n = history.size();
  const std::size_t heads = cfg_.tsan_heads;
  const std::size_t hw = cfg_.dim / heads;
  const ad::Var x = ad::stack_rows(history);
  const ad::Var q = ad::matvec(ad::transpose(wq_), history.back());
  const ad::Var keys = ad::matmul(x, wk_);
  const ad::Var values = ad::matmul(x, wv_);
  std::vector<ad::Var> head_outputs;
  head_outputs.reserve(heads);
  for (std::size_t m = 0; m < heads; ++m) {
    const ad::Var q_m = ad::slice(q, m * hw, hw);
    const ad::Var k_m = ad::submatrix(keys, 0, m * hw, n, hw);
    const ad::Var v_m = ad::submatrix(values, 0, m * hw, n, hw);
    const ad::Var attn = ad::softmax(ad::matvec(k_m, q_m));  // no scale factor
    head_outputs.push_back(ad::matvec(ad::transpose(v_m), attn));
  }
  return ad::concat(head_outputs);
}

ad::Var Representer::tsan_encode(const std::vector<ad::Var>& history) const {
  if (history.empty()) fail(ErrorKind::argument, "temporal encoder needs a non-empty history");
  return tsan_last_position(history);
}

std::vector<ad::Var> Representer::tsan_all_positions(const std::vector<ad::Var>& history) const {
  if (history.empty()) fail(ErrorKind::argument, "temporal encoder needs a non-empty history");
  std::vector<ad::Var> out;
  out.reserve(history.size());
  for (std::size_t p = 0; p < history.size(); ++p) {
    // causal mask: position p sees exactly the prefix through itself
    std::vector<ad::Var> prefix(history.begin(), history.begin() + static_cast<long>(p) + 1);
    out.push_back(tsan_last_position(prefix));
  }
  return out;
}

void Representer::refresh_version_locked() {
  if (store_.version() != seen_version_) {
    raga_memo_.clear();
    z_memo_.clear();
    seen_version_ = store_.version();
  }
}

ad::Var Representer::raga_update(std::size_t snapshot, std::uint32_t entity) {
  std::lock_guard<std::mutex> lock(mu_);
  refresh_version_locked();
  const std::uint64_t key =
      (static_cast<std::uint64_t>(entity) << 32) | static_cast<std::uint64_t>(snapshot + 1);
  if (auto it = raga_memo_.find(key); it != raga_memo_.end()) return it->second;
  ++raga_evals_;
  ad::Var value = raga_compute(snapshot, entity);
  raga_memo_.emplace(key, value);
  return value;
}

ad::Var Representer::represent(std::uint32_t entity, std::int64_t t) {
  if (!cfg_.use_mfar) return entity_embedding(entity);
  // Memoized graphs are shared with gradient-tracked consumers, so they must
  // always be recorded even when the caller runs inference without gradients.
  ad::GradModeGuard record(true);
  std::lock_guard<std::mutex> lock(mu_);
  refresh_version_locked();

  const auto last_snap = kg_.snapshot_at_or_before(t);
  const std::uint64_t key = (static_cast<std::uint64_t>(entity) << 32) |
                            (last_snap ? static_cast<std::uint64_t>(*last_snap) + 1 : 0);
  if (auto it = z_memo_.find(key); it != z_memo_.end()) return it->second;
  ++represent_evals_;

  std::vector<ad::Var> history;
  if (!cfg_.use_raga) {
    // Identical rows collapse under attention averaging, so one suffices.
    history.push_back(entity_embedding(entity));
  } else if (!last_snap) {
    history.push_back(isolated_embedding(entity));  // no observed past at all
  } else {
    const std::size_t end = *last_snap;
    const std::size_t start = end + 1 >= cfg_.window ? end + 1 - cfg_.window : 0;
    history.reserve(end - start + 1);
    for (std::size_t s = start; s <= end; ++s) {
      const std::uint64_t rkey =
          (static_cast<std::uint64_t>(entity) << 32) | static_cast<std::uint64_t>(s + 1);
      if (auto it = raga_memo_.find(rkey); it != raga_memo_.end()) {
        history.push_back(it->second);
      } else {
        ++raga_evals_;
        ad::Var value = raga_compute(s, entity);
        raga_memo_.emplace(rkey, value);
        history.push_back(std::move(value));
      }
    }
  }
  ad::Var z = cfg_.use_tsan ? tsan_encode(history) : history.back();
  z_memo_.emplace(key, z);
  return z;
}

void Representer::invalidate() {
  std::lock_guard<std::mutex> lock(mu_);
  raga_memo_.clear();
  z_memo_.clear();
}

}  // namespace tkgr
