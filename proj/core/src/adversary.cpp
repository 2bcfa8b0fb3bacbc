#include "tkgr/adversary.hpp"

#include <algorithm>
#include <cmath>

#include "tkgr/common.hpp"

namespace tkgr {

namespace {
constexpr std::size_t kKernelRows = 3;
constexpr std::size_t kKernelCols = 5;
}  // namespace

Adversary::Adversary(const TemporalKG& kg, Representer& rep,
                     ParameterStore& store, std::size_t max_steps,
                     Rng& init_rng)
    : kg_(kg), rep_(rep), max_steps_(max_steps) {
  const std::size_t width = 2 * rep_.config().dim;
  if (max_steps_ < kKernelRows)
    fail(ErrorKind::config,
         strf("path length %zu is below the %zux%zu convolution kernel",
              max_steps_, kKernelRows, kKernelCols));
  if (width < kKernelCols)
    fail(ErrorKind::config,
         strf("step embedding width %zu is below the %zux%zu convolution kernel",
              width, kKernelRows, kKernelCols));
  const std::size_t flat =
      (max_steps_ - kKernelRows + 1) * (width - kKernelCols + 1);
  conv_w_ = store.create("disc/conv_w", {kKernelRows, kKernelCols}, init_rng);
  conv_b_ = store.zeros("disc/conv_b", {1});
  w_s_ = store.create("disc/w_s", {flat}, init_rng);
  w_r_ = store.create("disc/w_r", {3 * rep_.config().dim}, init_rng);
}

ad::Var Adversary::path_matrix(const std::vector<ActionCandidate>& steps,
                               std::int64_t query_time) {
  if (steps.empty()) fail(ErrorKind::argument, "path matrix requires steps");
  if (steps.size() > max_steps_)
    fail(ErrorKind::argument,
         strf("path of %zu steps exceeds the maximum of %zu", steps.size(),
              max_steps_));
  const std::size_t width = 2 * rep_.config().dim;
  std::vector<ad::Var> rows;
  rows.reserve(max_steps_);
  for (const ActionCandidate& s : steps)
    rows.push_back(ad::concat(
        {rep_.relation_embedding(s.relation),
         rep_.represent(s.entity, std::min(s.time, query_time - 1))}));
  for (std::size_t i = steps.size(); i < max_steps_; ++i)
    rows.push_back(ad::constant(Tensor::zeros({width})));
  return ad::stack_rows(rows);
}

ad::Var Adversary::semantic_score(const ad::Var& path_matrix) {
  const std::size_t rows = path_matrix->value.rows();
  const std::size_t cols = path_matrix->value.cols();
  if (rows < kKernelRows || cols < kKernelCols)
    fail(ErrorKind::argument, "path matrix is smaller than the kernel");
  std::vector<ad::Var> flat;
  flat.reserve((rows - kKernelRows + 1) * (cols - kKernelCols + 1));
  for (std::size_t i = 0; i + kKernelRows <= rows; ++i)
    for (std::size_t j = 0; j + kKernelCols <= cols; ++j) {
      const ad::Var patch =
          ad::submatrix(path_matrix, i, j, kKernelRows, kKernelCols);
      flat.push_back(ad::add(ad::sum(ad::mul(patch, conv_w_)), conv_b_));
    }
  return ad::sigmoid(ad::dot(w_s_, ad::relu(ad::concat(flat))));
}

ad::Var Adversary::quad_truth(const Quadruple& quad, std::int64_t query_time,
                              bool detach) {
  const std::int64_t at = std::min(quad.t, query_time - 1);
  ad::Var zs = rep_.represent(quad.s, at);
  ad::Var r = rep_.relation_embedding(quad.r);
  ad::Var zo = rep_.represent(quad.o, at);
  if (detach) {
    zs = ad::constant(zs->value);
    r = ad::constant(r->value);
    zo = ad::constant(zo->value);
  }
  return ad::sigmoid(ad::dot(w_r_, ad::tanh_(ad::concat({zs, r, zo}))));
}

ad::Var Adversary::rule_score(const std::vector<ad::Var>& body_truths,
                              const ad::Var& head_truth) {
  if (body_truths.empty())
    fail(ErrorKind::contract, "rule score requires a non-empty body");
  ad::Var product = body_truths.front();
  for (std::size_t i = 1; i < body_truths.size(); ++i)
    product = ad::mul(product, body_truths[i]);
  return ad::add(ad::sub(ad::mul(product, head_truth), product),
                 ad::scalar(1.0));
}

TemporalRuleInstance Adversary::path_to_rule(
    const std::vector<ActionCandidate>& steps, const QueryTask& query) const {
  const std::uint32_t stop_id = kg_.stop_relation_id();
  TemporalRuleInstance rule;
  std::uint32_t at = query.subject;
  for (const ActionCandidate& s : steps) {
    if (s.relation == stop_id) continue;
    rule.body.push_back({at, s.relation, s.entity, s.time});
    at = s.entity;
  }
  if (rule.body.empty()) {
    rule.degenerate = true;
    rule.body.push_back({query.subject, stop_id, query.subject, query.time});
    rule.head = {query.subject, query.relation, query.subject, query.time};
    return rule;
  }
  if (rule.body.front().t > rule.body.back().t) {
    std::vector<Quadruple> reversed;
    reversed.reserve(rule.body.size());
    for (auto it = rule.body.rbegin(); it != rule.body.rend(); ++it)
      reversed.push_back(
          {it->o, invert_relation(it->r, kg_.num_base_relations()), it->s,
           it->t});
    rule.body = std::move(reversed);
  }
  rule.head = {query.subject, query.relation, at, query.time};
  return rule;
}

ad::Var Adversary::rule_truth(const TemporalRuleInstance& rule, bool detach) {
  std::vector<ad::Var> body;
  body.reserve(rule.body.size());
  for (const Quadruple& q : rule.body)
    body.push_back(quad_truth(q, rule.head.t, detach));
  return rule_score(body, quad_truth(rule.head, rule.head.t, detach));
}

std::pair<double, double> Adversary::noise_scores(Rng& rng) {
  auto positive_uniform = [&rng] {
    double u = rng.uniform();
    while (u == 0.0) u = rng.uniform();
    return u;
  };
  const double semantic = positive_uniform();
  const double logic = positive_uniform();
  return {semantic, logic};
}

std::pair<double, double> Adversary::gated_rewards(double semantic_gen,
                                                   double logic_gen,
                                                   double semantic_noise,
                                                   double logic_noise) {
  return {std::max(semantic_gen - semantic_noise, 0.0),
          std::max(logic_gen - logic_noise, 0.0)};
}

double Adversary::adaptive_reward(double terminal, double semantic,
                                  double logic, double alpha) {
  if (alpha < 0.0 || alpha > 1.0)
    fail(ErrorKind::config, strf("balance factor %g outside [0, 1]", alpha));
  return terminal + alpha * semantic + (1.0 - alpha) * logic;
}

ad::Var Adversary::semantic_disc_loss(const std::vector<ad::Var>& generated,
                                      const std::vector<ad::Var>& demonstrations,
                                      double lambda,
                                      const std::vector<double>& epsilons) {
  if (generated.empty() || demonstrations.empty())
    fail(ErrorKind::contract,
         "semantic discriminator loss requires paths of both kinds");
  const std::size_t pairs = std::min(generated.size(), demonstrations.size());
  if (epsilons.size() != pairs)
    fail(ErrorKind::contract,
         strf("expected %zu interpolation draws, got %zu", pairs,
              epsilons.size()));

  std::vector<ad::Var> gen_scores, demo_scores, penalties;
  for (const ad::Var& p : generated) gen_scores.push_back(semantic_score(p));
  for (const ad::Var& p : demonstrations)
    demo_scores.push_back(semantic_score(p));

  for (std::size_t i = 0; i < pairs; ++i) {
    const double eps = epsilons[i];
    if (eps < 0.0 || eps > 1.0)
      fail(ErrorKind::contract, strf("interpolation draw %g outside [0, 1]", eps));
    const Tensor& g = generated[i]->value;
    const Tensor& d = demonstrations[i]->value;
    if (g.shape() != d.shape())
      fail(ErrorKind::contract, "path matrices disagree on shape");
    Tensor mixed = Tensor::zeros(g.shape());
    for (std::size_t k = 0; k < mixed.size(); ++k)
      mixed.data()[k] = eps * g[k] + (1.0 - eps) * d[k];
    const ad::Var p_hat = ad::leaf(std::move(mixed));
    const ad::Var score = semantic_score(p_hat);
    const auto grads = ad::backward(score, /*create_graph=*/true);
    const auto it = grads.find(p_hat.get());
    const ad::Var norm = it != grads.end()
                             ? ad::norm2(it->second)
                             : ad::scalar(0.0);  // dead ReLU region
    penalties.push_back(ad::square(ad::sub(norm, ad::scalar(1.0))));
  }

  const ad::Var critic = ad::sub(ad::mean(ad::concat(gen_scores)),
                                 ad::mean(ad::concat(demo_scores)));
  return ad::add(critic, ad::scale(ad::mean(ad::concat(penalties)), lambda));
}

ad::Var Adversary::semantic_disc_loss(const std::vector<ad::Var>& generated,
                                      const std::vector<ad::Var>& demonstrations,
                                      double lambda, Rng& rng) {
  std::vector<double> epsilons(
      std::min(generated.size(), demonstrations.size()));
  for (double& e : epsilons) e = rng.uniform();
  return semantic_disc_loss(generated, demonstrations, lambda, epsilons);
}

ad::Var Adversary::logic_disc_loss(
    const std::vector<ad::Var>& generated_scores,
    const std::vector<ad::Var>& demonstration_scores) {
  if (generated_scores.empty() || demonstration_scores.empty())
    fail(ErrorKind::contract,
         "logic discriminator loss requires scores of both kinds");
  std::vector<ad::Var> demo_terms, gen_terms;
  for (const ad::Var& d : demonstration_scores)
    demo_terms.push_back(ad::log_(d));
  for (const ad::Var& g : generated_scores)
    gen_terms.push_back(ad::log_(ad::sub(ad::scalar(1.0), g)));
  return ad::neg(ad::add(ad::mean(ad::concat(demo_terms)),
                         ad::mean(ad::concat(gen_terms))));
}

}  // namespace tkgr
