#pragma once

// Brute-force reference implementations used only by tests. Straight-line
// loops over plain std::vector<double>; shares no code with the library
// implementations it cross-checks.

#include <cstdint>
#include <utility>
#include <vector>

namespace tkgr::oracle {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;

double attenuation(int k, double b);
Vec aux_relation(const std::vector<Vec>& rels_on_path);

// One entity update of the relation-aware snapshot attention.
// Neighbor i: static embedding ej[i], auxiliary relation aux[i], hop count
// hops[i]. Per head m: W1[m] is (Dh x (2D + F')), W2[m] is (Dh).
Vec raga(const Vec& ei, const std::vector<Vec>& ej, const std::vector<Vec>& aux,
         const std::vector<int>& hops, const std::vector<Mat>& W1,
         const std::vector<Vec>& W2, double bandwidth, double slope);

// Isolated-entity path: plain projection of the static embedding.
Vec project(const Mat& W, const Vec& e);

// Causal self-attention over history rows X (S x D'); returns the final row
// of the concatenated heads. Per head: Wq/Wk/Wv are (D' x dh).
Vec tsan_last(const Mat& X, const std::vector<Mat>& Wq, const std::vector<Mat>& Wk,
              const std::vector<Mat>& Wv);

struct CellOut {
  Vec h, c;
};
CellOut gated_cell(const Vec& h_prev, const Vec& c_prev, const Vec& p_prev,
                   const Mat& Wi, const Vec& bi, const Mat& Wf, const Vec& bf,
                   const Mat& Wo, const Vec& bo, const Mat& Wg, const Vec& bg);

Vec action_probs(const Vec& z, const Vec& h, const Vec& rq, const Mat& W1p,
                 const Mat& W2p, const std::vector<Vec>& action_embs);

double semantic_score(const Mat& P, const Mat& kernel, double bias, const Vec& Ws);
double quad_truth(const Vec& z_s, const Vec& r, const Vec& z_o, const Vec& Wr);
double rule_score(const Vec& body_truths, double head_truth);

Vec prior_weights(const std::vector<long long>& ts, long long t_ref);
double adaptive_reward(double rt, double rs, double rr, double alpha);

// Filtered ranking: scored candidates carry beam scores; excluded ids are
// removed; unscored survivors follow all scored ones in entity-id order.
std::size_t rank_of_gold(const std::vector<std::pair<std::uint32_t, double>>& scored,
                         const std::vector<char>& excluded, std::uint32_t gold,
                         std::size_t num_entities);
double mrr(const std::vector<std::size_t>& ranks);
double hits_at(const std::vector<std::size_t>& ranks, std::size_t k);

}  // namespace tkgr::oracle
