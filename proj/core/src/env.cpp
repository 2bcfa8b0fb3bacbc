#include "tkgr/env.hpp"

#include <algorithm>

#include "tkgr/common.hpp"

namespace tkgr {

QueryTask object_query(const Quadruple& fact) {
  return {fact.s, fact.r, fact.o, fact.t};
}

QueryTask subject_query(const Quadruple& fact, std::size_t num_base_relations) {
  return {fact.o, invert_relation(fact.r, num_base_relations), fact.s, fact.t};
}

Env::Env(const TemporalKG& kg, const EnvConfig& cfg) : kg_(kg), cfg_(cfg) {
  if (cfg_.max_steps == 0) fail(ErrorKind::config, "max steps must be positive");
  if (cfg_.action_cap < 2)
    fail(ErrorKind::config, "action cap must leave room for the self-loop and one edge");
}

EnvState Env::initial_state(const QueryTask& query) const {
  if (query.subject >= kg_.num_entities())
    fail(ErrorKind::contract, strf("query subject %u out of range", query.subject));
  if (query.relation >= kg_.num_relations())
    fail(ErrorKind::contract, strf("query relation %u out of range", query.relation));
  return {query.subject, query.time, query, 0};
}

std::vector<ActionCandidate> Env::valid_actions(const EnvState& state) const {
  std::vector<ActionCandidate> actions;
  actions.push_back({kg_.stop_relation_id(), state.entity, state.time});

  const std::int64_t bound = std::min(state.time, state.query.time);
  // strict mode shuts out edges dated exactly t_q (only reachable while
  // t_l == t_q, since times never increase along a trajectory)
  const bool inclusive =
      cfg_.time_constraint == TimeConstraint::paper || state.time < state.query.time;
  const auto span = kg_.neighbors_before(state.entity, bound, inclusive);
  const std::size_t take = std::min(span.size(), cfg_.action_cap - 1);
  for (std::size_t i = 0; i < take; ++i)
    actions.push_back({span[i].r, span[i].o, span[i].t});
  return actions;
}

EnvState Env::step(const EnvState& state, const ActionCandidate& action) const {
  if (state.step >= cfg_.max_steps)
    fail(ErrorKind::contract, "step called on a terminal state");
  const auto candidates = valid_actions(state);
  if (std::find(candidates.begin(), candidates.end(), action) == candidates.end())
    fail(ErrorKind::contract,
         strf("action (%u,%u,@%lld) is not admissible in state (%u,@%lld)", action.relation,
              action.entity, static_cast<long long>(action.time), state.entity,
              static_cast<long long>(state.time)));
  return {action.entity, action.time, state.query, state.step + 1};
}

double Env::terminal_reward(const Trajectory& trajectory) const {
  if (!trajectory.query.gold)
    fail(ErrorKind::contract, "terminal reward needs a gold entity");
  return trajectory.final_state.entity == *trajectory.query.gold ? 1.0 : 0.0;
}

std::string relation_display(std::uint32_t r, const Vocab& relations) {
  const auto n = static_cast<std::uint32_t>(relations.size());
  if (r < n) return relations.name(r);
  if (r < 2 * n) return relations.name(r - n) + "^-1";  // inverse block
  if (r == 2 * n) return "<stay>";                      // self-loop / stop
  fail(ErrorKind::contract, strf("relation id %u out of range", r));
}

void write_trajectory(std::ostream& out, const Trajectory& trajectory,
                      const Vocab& entities, const Vocab& relations) {
  for (const auto& s : trajectory.steps) {
    out << entities.name(s.state.entity) << '\t'
        << relation_display(s.action.relation, relations) << '\t'
        << entities.name(s.action.entity) << '\t' << s.action.time << '\t'
        << strf("%.6f", s.prob) << '\n';
  }
}

}  // namespace tkgr
