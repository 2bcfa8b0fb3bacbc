#pragma once

// History-conditioned policy over the reasoning MDP.
//
// The path so far is encoded by a gated recurrent cell whose inputs are
// step embeddings P_l = [R_l ⊕ Z_{t_l}^{e_l}] (a learned start-of-path token
// stands in for R_0). Candidate actions are embedded the same way, stacked
// into a matrix A_l, and scored against a projection of [Z ⊕ H ⊕ R_q]:
//
//   π(a | s) = softmax(A_l · (W'' ReLU(W' [Z_{t_l}^{e_l} ⊕ H_l ⊕ R_q])))
//
// Rollouts take exactly L steps; once the agent picks the stop self-loop the
// remaining steps are forced self-loops with probability 1 that carry no
// gradient node. Ranked inference runs a breadth-B beam and scores each
// candidate entity by the sum of the probabilities of surviving paths that
// terminate there, which makes the beam checkable against exhaustive path
// enumeration.
//
// Entity representations are always requested at min(t, t_q - 1): the query
// timestamp itself is unobservable at prediction time, so the latest prior
// snapshot approximates it.

#include <cstdint>
#include <optional>
#include <vector>

#include "tkgr/autodiff.hpp"
#include "tkgr/env.hpp"
#include "tkgr/mfar.hpp"
#include "tkgr/params.hpp"
#include "tkgr/rng.hpp"

namespace tkgr {

struct PolicyConfig {
  std::size_t hidden_dim = 200;  // recurrent state width, also the score head
  std::size_t beam_width = 40;   // default ranking beam

  void validate() const;
};

class Policy {
 public:
  Policy(const Env& env, Representer& rep, ParameterStore& store,
         const PolicyConfig& cfg, Rng& init_rng);

  const PolicyConfig& config() const { return cfg_; }
  const Env& env() const { return env_; }

  struct CellState {
    ad::Var h;  // H_l
    ad::Var c;  // gated-cell memory
  };

  // Learned H_0 with a zero memory cell.
  CellState initial_history() const;

  // One gated-memory step over [H_{l-1} ⊕ P_{l-1}].
  CellState encode_history(const CellState& prev, const ad::Var& p_prev) const;

  // [R_l ⊕ Z_{t_l}^{e_l}]; a nullopt relation selects the learned
  // start-of-path token used before any action has been taken.
  ad::Var path_step_embedding(std::optional<std::uint32_t> relation,
                              std::uint32_t entity, std::int64_t time,
                              std::int64_t query_time);

  // Probability per candidate, aligned with the candidate list.
  ad::Var action_distribution(const EnvState& state, const ad::Var& history,
                              const std::vector<ActionCandidate>& candidates);

  enum class RolloutMode { sample, greedy };

  // The sampling stream for query index q under a master seed; rollouts in a
  // batch each get their own stream so they can run in any order.
  static Rng rollout_rng(std::uint64_t master_seed, std::uint64_t query_index);

  // Exactly L steps; `rng` is consumed only in sample mode.
  Trajectory rollout(const QueryTask& query, RolloutMode mode, Rng& rng);

  struct BeamPath {
    std::vector<ActionCandidate> actions;  // chosen steps, padding omitted
    std::vector<double> step_probs;        // aligned with `actions`
    double probability = 1.0;              // product of step probabilities
    std::uint32_t final_entity = 0;
  };
  struct RankedEntity {
    std::uint32_t entity = 0;
    double score = 0.0;
  };
  struct BeamResult {
    std::vector<RankedEntity> ranking;  // score desc, ties by entity id
    std::vector<BeamPath> paths;        // probability desc
  };

  // Breadth-`width` beam over L steps. Entities never reached by a surviving
  // path are absent from the ranking.
  BeamResult beam_inference(const QueryTask& query, std::size_t width);

 private:
  ad::Var represent_at(std::uint32_t entity, std::int64_t time,
                       std::int64_t query_time);
  ad::Var candidate_embedding(const ActionCandidate& cand,
                              std::int64_t query_time);

  const Env& env_;
  Representer& rep_;
  PolicyConfig cfg_;

  ad::Var h0_;         // learned initial hidden state, H
  ad::Var start_rel_;  // learned start-of-path relation token, F'
  ad::Var wi_, wf_, wo_, wg_;  // gate weights, H x (H + 2F')
  ad::Var bi_, bf_, bo_, bg_;  // gate biases, H
  ad::Var w_feat_;             // first score projection, H x (2F' + H)
  ad::Var w_act_;              // second score projection, 2F' x H
};

}  // namespace tkgr
