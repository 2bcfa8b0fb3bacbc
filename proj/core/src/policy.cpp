#include "tkgr/policy.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <utility>

#include "tkgr/common.hpp"

namespace tkgr {

void PolicyConfig::validate() const {
  if (hidden_dim == 0) fail(ErrorKind::argument, "policy hidden_dim must be positive");
  if (beam_width == 0) fail(ErrorKind::argument, "beam width must be positive");
}

Policy::Policy(const Env& env, Representer& rep, ParameterStore& store,
               const PolicyConfig& cfg, Rng& init_rng)
    : env_(env), rep_(rep), cfg_(cfg) {
  cfg_.validate();
  const std::size_t h = cfg_.hidden_dim;
  const std::size_t f = rep_.config().dim;
  const std::size_t step_dim = 2 * f;  // [relation ⊕ entity representation]

  h0_ = store.create("policy/h0", {h}, init_rng);
  start_rel_ = store.create("policy/r_start", {f}, init_rng);
  wi_ = store.create("policy/cell_wi", {h, h + step_dim}, init_rng);
  wf_ = store.create("policy/cell_wf", {h, h + step_dim}, init_rng);
  wo_ = store.create("policy/cell_wo", {h, h + step_dim}, init_rng);
  wg_ = store.create("policy/cell_wg", {h, h + step_dim}, init_rng);
  bi_ = store.zeros("policy/cell_bi", {h});
  bf_ = store.zeros("policy/cell_bf", {h});
  bo_ = store.zeros("policy/cell_bo", {h});
  bg_ = store.zeros("policy/cell_bg", {h});
  w_feat_ = store.create("policy/score_w1", {h, step_dim + h}, init_rng);
  w_act_ = store.create("policy/score_w2", {step_dim, h}, init_rng);
}

ad::Var Policy::represent_at(std::uint32_t entity, std::int64_t time,
                             std::int64_t query_time) {
  return rep_.represent(entity, std::min(time, query_time - 1));
}

Policy::CellState Policy::initial_history() const {
  return {h0_, ad::constant(Tensor::zeros({cfg_.hidden_dim}))};
}

Policy::CellState Policy::encode_history(const CellState& prev,
                                         const ad::Var& p_prev) const {
  const ad::Var x = ad::concat({prev.h, p_prev});
  const ad::Var i = ad::sigmoid(ad::add(ad::matvec(wi_, x), bi_));
  const ad::Var f = ad::sigmoid(ad::add(ad::matvec(wf_, x), bf_));
  const ad::Var o = ad::sigmoid(ad::add(ad::matvec(wo_, x), bo_));
  const ad::Var g = ad::tanh_(ad::add(ad::matvec(wg_, x), bg_));
  const ad::Var c = ad::add(ad::mul(f, prev.c), ad::mul(i, g));
  return {ad::mul(o, ad::tanh_(c)), c};
}

ad::Var Policy::path_step_embedding(std::optional<std::uint32_t> relation,
                                    std::uint32_t entity, std::int64_t time,
                                    std::int64_t query_time) {
  const ad::Var rel =
      relation ? rep_.relation_embedding(*relation) : start_rel_;
  return ad::concat({rel, represent_at(entity, time, query_time)});
}

ad::Var Policy::candidate_embedding(const ActionCandidate& cand,
                                    std::int64_t query_time) {
  return ad::concat({rep_.relation_embedding(cand.relation),
                     represent_at(cand.entity, cand.time, query_time)});
}

ad::Var Policy::action_distribution(const EnvState& state, const ad::Var& history,
                                    const std::vector<ActionCandidate>& candidates) {
  if (candidates.empty())
    fail(ErrorKind::contract, "action distribution requires candidates");
  const ad::Var z = represent_at(state.entity, state.time, state.query.time);
  const ad::Var rq = rep_.relation_embedding(state.query.relation);
  const ad::Var feat = ad::concat({z, history, rq});
  const ad::Var hidden = ad::relu(ad::matvec(w_feat_, feat));
  const ad::Var proj = ad::matvec(w_act_, hidden);
  std::vector<ad::Var> rows;
  rows.reserve(candidates.size());
  for (const auto& cand : candidates)
    rows.push_back(candidate_embedding(cand, state.query.time));
  const ad::Var scores = ad::matvec(ad::stack_rows(rows), proj);
  return ad::softmax(scores);
}

Rng Policy::rollout_rng(std::uint64_t master_seed, std::uint64_t query_index) {
  return Rng(Rng::mix({0x726f6c6c6f757421ull, master_seed, query_index}));
}

Trajectory Policy::rollout(const QueryTask& query, RolloutMode mode, Rng& rng) {
  Trajectory traj;
  traj.query = query;
  const std::uint32_t stop_id = env_.graph().stop_relation_id();

  EnvState state = env_.initial_state(query);
  CellState cell = initial_history();
  ad::Var path = path_step_embedding(std::nullopt, query.subject, query.time,
                                     query.time);

  for (std::size_t l = 0; l < env_.config().max_steps; ++l) {
    if (traj.stopped) {
      TrajectoryStep step;
      step.state = state;
      step.action = {stop_id, state.entity, state.time};
      step.prob = 1.0;
      step.forced = true;
      state = env_.step(state, step.action);
      traj.steps.push_back(std::move(step));
      continue;
    }
    cell = encode_history(cell, path);
    const auto candidates = env_.valid_actions(state);
    const ad::Var dist = action_distribution(state, cell.h, candidates);
    const auto& probs = dist->value.data();
    std::size_t pick = 0;
    if (mode == RolloutMode::sample) {
      pick = rng.weighted(probs);
    } else {
      pick = static_cast<std::size_t>(
          std::max_element(probs.begin(), probs.end()) - probs.begin());
    }
    TrajectoryStep step;
    step.state = state;
    step.action = candidates[pick];
    step.prob = probs[pick];
    step.log_prob = ad::log_(ad::slice(dist, pick, 1));
    if (step.action.relation == stop_id) traj.stopped = true;
    state = env_.step(state, step.action);
    if (!traj.stopped)
      path = path_step_embedding(step.action.relation, state.entity, state.time,
                                 query.time);
    traj.steps.push_back(std::move(step));
  }
  traj.final_state = state;
  return traj;
}

namespace {

struct BeamItem {
  EnvState state;
  Policy::CellState cell;
  ad::Var path;  // embedding of the latest step, null once finalized
  std::vector<ActionCandidate> actions;
  std::vector<double> step_probs;
  double probability = 1.0;
  bool finalized = false;
  std::uint64_t order = 0;  // creation sequence, breaks probability ties
};

}  // namespace

Policy::BeamResult Policy::beam_inference(const QueryTask& query,
                                          std::size_t width) {
  if (width == 0) fail(ErrorKind::argument, "beam width must be positive");
  // Ranking needs no gradients; entity representations stay recordable via
  // their own guard, so the memo they share with training remains valid.
  ad::NoGradGuard inference;
  const std::uint32_t stop_id = env_.graph().stop_relation_id();

  std::vector<BeamItem> beam(1);
  beam[0].state = env_.initial_state(query);
  beam[0].cell = initial_history();
  beam[0].path =
      path_step_embedding(std::nullopt, query.subject, query.time, query.time);
  std::uint64_t next_order = 1;

  for (std::size_t l = 0; l < env_.config().max_steps; ++l) {
    std::vector<BeamItem> expanded;
    for (BeamItem& item : beam) {
      if (item.finalized) {
        expanded.push_back(std::move(item));
        continue;
      }
      const CellState cell = encode_history(item.cell, item.path);
      const auto candidates = env_.valid_actions(item.state);
      const ad::Var dist = action_distribution(item.state, cell.h, candidates);
      const auto& probs = dist->value.data();
      for (std::size_t a = 0; a < candidates.size(); ++a) {
        BeamItem child;
        child.cell = cell;
        child.actions = item.actions;
        child.actions.push_back(candidates[a]);
        child.step_probs = item.step_probs;
        child.step_probs.push_back(probs[a]);
        child.probability = item.probability * probs[a];
        child.order = next_order++;
        if (candidates[a].relation == stop_id) {
          // Remaining steps would be forced self-loops with probability 1,
          // so the path's endpoint and probability are already final.
          child.state = item.state;
          child.finalized = true;
        } else {
          child.state = env_.step(item.state, candidates[a]);
          child.path = path_step_embedding(candidates[a].relation,
                                           child.state.entity,
                                           child.state.time, query.time);
        }
        expanded.push_back(std::move(child));
      }
    }
    std::sort(expanded.begin(), expanded.end(),
              [](const BeamItem& a, const BeamItem& b) {
                if (a.probability != b.probability)
                  return a.probability > b.probability;
                return a.order < b.order;
              });
    if (expanded.size() > width) expanded.resize(width);
    beam = std::move(expanded);
  }

  BeamResult result;
  std::map<std::uint32_t, double> scores;
  for (const BeamItem& item : beam)
    scores[item.state.entity] += item.probability;
  result.ranking.reserve(scores.size());
  for (const auto& [entity, score] : scores)
    result.ranking.push_back({entity, score});
  std::sort(result.ranking.begin(), result.ranking.end(),
            [](const RankedEntity& a, const RankedEntity& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.entity < b.entity;
            });
  result.paths.reserve(beam.size());
  for (BeamItem& item : beam) {
    BeamPath path;
    path.actions = std::move(item.actions);
    path.step_probs = std::move(item.step_probs);
    path.probability = item.probability;
    path.final_entity = item.state.entity;
    result.paths.push_back(std::move(path));
  }
  std::sort(result.paths.begin(), result.paths.end(),
            [](const BeamPath& a, const BeamPath& b) {
              if (a.probability != b.probability)
                return a.probability > b.probability;
              return a.final_entity < b.final_entity;
            });
  return result;
}

}  // namespace tkgr
