#pragma once

// The reasoning MDP over the temporal graph.
//
// A query (e_s, r_q, ?, t_q) starts the agent at (e_s, t_q). Each step moves
// along a stored edge whose timestamp does not exceed the current time, or
// takes the always-available self-loop (the stop action, relation id 2|R|).
// Subject-prediction queries (?, r, o, t) are converted to object form via
// the inverse relation before reaching the environment.
//
// Time constraint modes:
//  * strict (default): t' <= t_l per step, and edges dated exactly t_q are
//    excluded (so the queried fact itself is never traversable)
//  * paper: the literal reading t' <= t_l and t' <= t_q

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "tkgr/autodiff.hpp"
#include "tkgr/tkg.hpp"
#include "tkgr/vocab.hpp"

namespace tkgr {

struct QueryTask {
  std::uint32_t subject = 0;   // start entity (object for converted queries)
  std::uint32_t relation = 0;  // query relation (inverse id when converted)
  std::optional<std::uint32_t> gold;
  std::int64_t time = 0;

  friend bool operator==(const QueryTask&, const QueryTask&) = default;
};

QueryTask object_query(const Quadruple& fact);  // predict o given (s, r, ?, t)
QueryTask subject_query(const Quadruple& fact,
                        std::size_t num_base_relations);  // predict s via r^-1

struct EnvState {
  std::uint32_t entity = 0;  // e_l
  std::int64_t time = 0;     // t_l
  QueryTask query;
  std::size_t step = 0;  // l

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct ActionCandidate {
  std::uint32_t relation = 0;
  std::uint32_t entity = 0;
  std::int64_t time = 0;

  friend bool operator==(const ActionCandidate&, const ActionCandidate&) = default;
};

enum class TimeConstraint { strict, paper };

struct EnvConfig {
  std::size_t max_steps = 3;   // L
  std::size_t action_cap = 50; // N_a, self-loop included
  TimeConstraint time_constraint = TimeConstraint::strict;
};

struct TrajectoryStep {
  EnvState state;  // the state the action was chosen in
  ActionCandidate action;
  double prob = 1.0;        // policy probability of the action
  ad::Var log_prob;         // graph node for the gradient; null when forced
  bool forced = false;      // self-loop padding after an explicit stop
};

struct Trajectory {
  QueryTask query;
  std::vector<TrajectoryStep> steps;
  EnvState final_state;
  bool stopped = false;          // the agent chose the stop action
  std::vector<double> rewards;   // per-step shaped rewards (filled later)
  double terminal = 0.0;         // terminal reward component
};

class Env {
 public:
  Env(const TemporalKG& kg, const EnvConfig& cfg);

  const EnvConfig& config() const { return cfg_; }
  const TemporalKG& graph() const { return kg_; }

  EnvState initial_state(const QueryTask& query) const;

  // Self-loop first, then up to action_cap - 1 admissible edges, most recent
  // first (timestamp ties by relation id, then entity id). Never empty.
  std::vector<ActionCandidate> valid_actions(const EnvState& state) const;

  // Deterministic transition; the action must come from valid_actions.
  EnvState step(const EnvState& state, const ActionCandidate& action) const;

  bool is_terminal(const EnvState& state) const { return state.step >= cfg_.max_steps; }

  // 1 if the trajectory ended on the gold entity, else 0; the query must
  // carry a gold entity (training/evaluation only).
  double terminal_reward(const Trajectory& trajectory) const;

 private:
  const TemporalKG& kg_;
  EnvConfig cfg_;
};

// Renders any relation id: base names verbatim, inverse ids with a ^-1
// suffix, the stop id as "<stay>".
std::string relation_display(std::uint32_t r, const Vocab& relations);

// One line per step: current entity, relation, destination, timestamp,
// probability; names resolved through the vocabularies.
void write_trajectory(std::ostream& out, const Trajectory& trajectory,
                      const Vocab& entities, const Vocab& relations);

}  // namespace tkgr
