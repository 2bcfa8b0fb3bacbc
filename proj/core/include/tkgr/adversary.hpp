#pragma once

// Rule-aware adversarial scoring of reasoning paths.
//
// Semantic level: a path becomes a matrix whose rows are step embeddings
// [R ⊕ Z]; a single 3×5 convolution kernel slides over it (valid positions,
// stride 1), followed by ReLU, a linear projection and a sigmoid:
// D(s) = σ(W_s ReLU(Conv(P, w) + b_s)).
//
// Logic level: a path is canonicalized into a temporal rule instance whose
// body quadruples carry non-decreasing timestamps; each quadruple gets a
// truth measure I(Q) = σ(W_r tanh([Z ⊕ R ⊕ Z])) and the rule score follows
// product t-norm fuzzy logic: D(r) = ΠI(Q_i)·I(Q_h) − ΠI(Q_i) + 1.
//
// Rewards gate the generator scores against uniform noise,
// R = max(D^G − D^N, 0), blended as R(s_l) = R_t + αR_s + (1−α)R_r.
// Discriminator losses: a critic-style semantic loss with a gradient
// penalty λ(‖∇_p̂ D(p̂)‖₂ − 1)² at interpolates p̂ between generated and
// demonstration matrices (differentiated with a second backward pass), and
// the logistic logic loss −(log D^D(r) + log(1 − D^G(r))).

#include <cstdint>
#include <utility>
#include <vector>

#include "tkgr/autodiff.hpp"
#include "tkgr/env.hpp"
#include "tkgr/mfar.hpp"
#include "tkgr/params.hpp"
#include "tkgr/rng.hpp"
#include "tkgr/tkg.hpp"

namespace tkgr {

struct TemporalRuleInstance {
  std::vector<Quadruple> body;  // timestamps non-decreasing after canonicalization
  Quadruple head;               // (e_s, r_q, final entity, t_q)
  bool degenerate = false;      // the path held nothing but self-loops
};

class Adversary {
 public:
  Adversary(const TemporalKG& kg, Representer& rep, ParameterStore& store,
            std::size_t max_steps, Rng& init_rng);

  std::size_t max_steps() const { return max_steps_; }

  // Rows are step embeddings in traversal order, zero-padded to L rows.
  // Steps must number in [1, L].
  ad::Var path_matrix(const std::vector<ActionCandidate>& steps,
                      std::int64_t query_time);

  // D(s) ∈ (0,1) for an L × 2F' path matrix.
  ad::Var semantic_score(const ad::Var& path_matrix);

  // I(Q) ∈ (0,1); `detach` scores the quadruple on frozen representation
  // values so discriminator updates cannot reach the representation stack.
  ad::Var quad_truth(const Quadruple& quad, std::int64_t query_time,
                     bool detach = false);

  // Product t-norm implication score; body must be non-empty.
  static ad::Var rule_score(const std::vector<ad::Var>& body_truths,
                            const ad::Var& head_truth);

  // Strips self-loops, orients timestamps non-decreasing (reversing the walk
  // through inverse relations when it ran backward in time), and attaches
  // the query as the rule head. An all-self-loop path degenerates to a body
  // holding the single self-loop quadruple.
  TemporalRuleInstance path_to_rule(const std::vector<ActionCandidate>& steps,
                                    const QueryTask& query) const;

  // quad_truth over body and head, combined by rule_score.
  ad::Var rule_truth(const TemporalRuleInstance& rule, bool detach = false);

  // One uniform (0,1) draw per discrimination level: (noise D^N(s), D^N(r)).
  static std::pair<double, double> noise_scores(Rng& rng);

  // (R_s, R_r) = clamped differences against the noise scores.
  static std::pair<double, double> gated_rewards(double semantic_gen,
                                                 double logic_gen,
                                                 double semantic_noise,
                                                 double logic_noise);

  // R(s_l) = R_t + αR_s + (1−α)R_r with α ∈ [0,1].
  static double adaptive_reward(double terminal, double semantic, double logic,
                                double alpha);

  // Critic loss mean D(generated) − mean D(demonstration) plus the gradient
  // penalty, averaged over pairs; `epsilons` supplies one interpolation draw
  // per pair (index i pairs generated[i] with demonstrations[i], shorter
  // batch truncates).
  ad::Var semantic_disc_loss(const std::vector<ad::Var>& generated,
                             const std::vector<ad::Var>& demonstrations,
                             double lambda, const std::vector<double>& epsilons);
  ad::Var semantic_disc_loss(const std::vector<ad::Var>& generated,
                             const std::vector<ad::Var>& demonstrations,
                             double lambda, Rng& rng);

  // −(mean log D^D(r) + mean log(1 − D^G(r))).
  static ad::Var logic_disc_loss(const std::vector<ad::Var>& generated_scores,
                                 const std::vector<ad::Var>& demonstration_scores);

 private:
  const TemporalKG& kg_;
  Representer& rep_;
  std::size_t max_steps_;

  ad::Var conv_w_;  // 3 x 5 kernel
  ad::Var conv_b_;  // scalar bias inside the ReLU
  ad::Var w_s_;     // projection over the flattened convolution output
  ad::Var w_r_;     // truth-measure projection over [Z ⊕ R ⊕ Z]
};

}  // namespace tkgr
