#include "oracle.hpp"

#include <algorithm>
#include <cmath>

namespace tkgr::oracle {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec matvec(const Mat& W, const Vec& x) {
  Vec out(W.size(), 0.0);
  for (std::size_t i = 0; i < W.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) out[i] += W[i][j] * x[j];
  return out;
}

Vec concat3(const Vec& a, const Vec& b, const Vec& c) {
  Vec out;
  out.reserve(a.size() + b.size() + c.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  out.insert(out.end(), c.begin(), c.end());
  return out;
}

}  // namespace

double attenuation(int k, double b) {
  return std::exp(-static_cast<double>(k) * k / (2.0 * b * b));
}

Vec aux_relation(const std::vector<Vec>& rels_on_path) {
  Vec out(rels_on_path.front().size(), 0.0);
  for (const Vec& r : rels_on_path)
    for (std::size_t i = 0; i < r.size(); ++i) out[i] += r[i];
  return out;
}

Vec raga(const Vec& ei, const std::vector<Vec>& ej, const std::vector<Vec>& aux,
         const std::vector<int>& hops, const std::vector<Mat>& W1,
         const std::vector<Vec>& W2, double bandwidth, double slope) {
  std::size_t n = ej.size();
  Vec out;
  for (std::size_t m = 0; m < W1.size(); ++m) {
    // per-neighbor triple vectors and logits
    std::vector<Vec> t(n);
    Vec logits(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = matvec(W1[m], concat3(ei, aux[i], ej[i]));
      double beta = 0.0;
      for (std::size_t d = 0; d < t[i].size(); ++d) beta += W2[m][d] * t[i][d];
      beta = beta > 0.0 ? beta : slope * beta;
      logits[i] = attenuation(hops[i], bandwidth) * beta;
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    Vec agg(t[0].size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double alpha = std::exp(logits[i] - mx) / z;
      for (std::size_t d = 0; d < agg.size(); ++d) agg[d] += alpha * t[i][d];
    }
    for (double& x : agg) x = sigmoid(x);
    out.insert(out.end(), agg.begin(), agg.end());
  }
  return out;
}

Vec project(const Mat& W, const Vec& e) { return matvec(W, e); }

Vec tsan_last(const Mat& X, const std::vector<Mat>& Wq, const std::vector<Mat>& Wk,
              const std::vector<Mat>& Wv) {
  std::size_t S = X.size();
  Vec out;
  for (std::size_t m = 0; m < Wq.size(); ++m) {
    std::size_t dh = Wq[m][0].size();
    auto proj = [&](const Mat& W, std::size_t s) {
      Vec v(dh, 0.0);
      for (std::size_t j = 0; j < dh; ++j)
        for (std::size_t d = 0; d < X[s].size(); ++d) v[j] += X[s][d] * W[d][j];
      return v;
    };
    // last row attends over all rows (causal mask is vacuous for the last row)
    Vec q = proj(Wq[m], S - 1);
    Vec scores(S);
    for (std::size_t s = 0; s < S; ++s) {
      Vec k = proj(Wk[m], s);
      double acc = 0.0;
      for (std::size_t j = 0; j < dh; ++j) acc += q[j] * k[j];
      scores[s] = acc;
    }
    double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double s : scores) z += std::exp(s - mx);
    Vec head(dh, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      double a = std::exp(scores[s] - mx) / z;
      Vec v = proj(Wv[m], s);
      for (std::size_t j = 0; j < dh; ++j) head[j] += a * v[j];
    }
    out.insert(out.end(), head.begin(), head.end());
  }
  return out;
}

CellOut gated_cell(const Vec& h_prev, const Vec& c_prev, const Vec& p_prev,
                   const Mat& Wi, const Vec& bi, const Mat& Wf, const Vec& bf,
                   const Mat& Wo, const Vec& bo, const Mat& Wg, const Vec& bg) {
  Vec x;
  x.insert(x.end(), h_prev.begin(), h_prev.end());
  x.insert(x.end(), p_prev.begin(), p_prev.end());
  std::size_t H = h_prev.size();
  CellOut out;
  out.h.resize(H);
  out.c.resize(H);
  Vec iv = matvec(Wi, x), fv = matvec(Wf, x), ov = matvec(Wo, x), gv = matvec(Wg, x);
  for (std::size_t d = 0; d < H; ++d) {
    double ig = sigmoid(iv[d] + bi[d]);
    double fg = sigmoid(fv[d] + bf[d]);
    double og = sigmoid(ov[d] + bo[d]);
    double gg = std::tanh(gv[d] + bg[d]);
    out.c[d] = fg * c_prev[d] + ig * gg;
    out.h[d] = og * std::tanh(out.c[d]);
  }
  return out;
}

Vec action_probs(const Vec& z, const Vec& h, const Vec& rq, const Mat& W1p,
                 const Mat& W2p, const std::vector<Vec>& action_embs) {
  Vec ctx = matvec(W1p, concat3(z, h, rq));
  for (double& x : ctx) x = x > 0.0 ? x : 0.0;
  Vec u = matvec(W2p, ctx);
  Vec scores(action_embs.size(), 0.0);
  for (std::size_t a = 0; a < action_embs.size(); ++a)
    for (std::size_t d = 0; d < u.size(); ++d) scores[a] += action_embs[a][d] * u[d];
  double mx = *std::max_element(scores.begin(), scores.end());
  double zsum = 0.0;
  for (double s : scores) zsum += std::exp(s - mx);
  Vec probs(scores.size());
  for (std::size_t a = 0; a < scores.size(); ++a)
    probs[a] = std::exp(scores[a] - mx) / zsum;
  return probs;
}

double semantic_score(const Mat& P, const Mat& kernel, double bias, const Vec& Ws) {
  std::size_t kr = kernel.size(), kc = kernel[0].size();
  std::size_t orows = P.size() - kr + 1, ocols = P[0].size() - kc + 1;
  Vec flat;
  flat.reserve(orows * ocols);
  for (std::size_t i = 0; i < orows; ++i)
    for (std::size_t j = 0; j < ocols; ++j) {
      double acc = bias;
      for (std::size_t a = 0; a < kr; ++a)
        for (std::size_t b = 0; b < kc; ++b) acc += P[i + a][j + b] * kernel[a][b];
      flat.push_back(acc > 0.0 ? acc : 0.0);
    }
  double s = 0.0;
  for (std::size_t i = 0; i < flat.size(); ++i) s += Ws[i] * flat[i];
  return sigmoid(s);
}

double quad_truth(const Vec& z_s, const Vec& r, const Vec& z_o, const Vec& Wr) {
  Vec x = concat3(z_s, r, z_o);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += Wr[i] * std::tanh(x[i]);
  return sigmoid(s);
}

double rule_score(const Vec& body_truths, double head_truth) {
  double prod = 1.0;
  for (double t : body_truths) prod *= t;
  return prod * head_truth - prod + 1.0;
}

Vec prior_weights(const std::vector<long long>& ts, long long t_ref) {
  Vec w(ts.size());
  double z = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    w[i] = std::exp(static_cast<double>(ts[i] - t_ref));
    z += w[i];
  }
  for (double& x : w) x /= z;
  return w;
}

double adaptive_reward(double rt, double rs, double rr, double alpha) {
  return rt + alpha * rs + (1.0 - alpha) * rr;
}

std::size_t rank_of_gold(const std::vector<std::pair<std::uint32_t, double>>& scored,
                         const std::vector<char>& excluded, std::uint32_t gold,
                         std::size_t num_entities) {
  bool gold_scored = false;
  double gold_score = 0.0;
  for (const auto& [e, s] : scored)
    if (e == gold) {
      gold_scored = true;
      gold_score = s;
    }
  std::vector<char> has_score(num_entities, 0);
  for (const auto& [e, s] : scored) has_score[e] = 1;

  std::size_t before = 0;
  if (gold_scored) {
    for (const auto& [e, s] : scored) {
      if (e == gold || excluded[e]) continue;
      if (s > gold_score || (s == gold_score && e < gold)) ++before;
    }
  } else {
    for (const auto& [e, s] : scored)
      if (e != gold && !excluded[e]) ++before;
    for (std::uint32_t e = 0; e < gold; ++e)
      if (!has_score[e] && !excluded[e] && e != gold) ++before;
  }
  return before + 1;
}

double mrr(const std::vector<std::size_t>& ranks) {
  double acc = 0.0;
  for (std::size_t r : ranks) acc += 1.0 / static_cast<double>(r);
  return acc / static_cast<double>(ranks.size());
}

double hits_at(const std::vector<std::size_t>& ranks, std::size_t k) {
  double acc = 0.0;
  for (std::size_t r : ranks)
    if (r <= k) acc += 1.0;
  return acc / static_cast<double>(ranks.size());
}

}  // namespace tkgr::oracle
