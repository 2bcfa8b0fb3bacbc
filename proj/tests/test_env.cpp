// MDP environment tests: state initialization, time-constrained action
// spaces, transitions, terminal reward, and trajectory-wide invariants.

#include "doctest.h"

#include <sstream>

#include "tkgr/common.hpp"
#include "tkgr/env.hpp"
#include "tkgr/rng.hpp"

using namespace tkgr;

namespace {

TemporalKG chain_graph() {
  // 0 -r0-> 1 (@1), 1 -r0-> 2 (@1), 2 -r1-> 3 (@2), plus inverses
  std::vector<Quadruple> facts{{0, 0, 1, 1}, {1, 0, 2, 1}, {2, 1, 3, 2}};
  return TemporalKG::build(facts, 5, 2);
}

}  // namespace

TEST_CASE("query construction for both directions") {
  const Quadruple fact{3, 1, 7, 20};
  const auto oq = object_query(fact);
  CHECK(oq.subject == 3);
  CHECK(oq.relation == 1);
  CHECK(oq.gold.value() == 7);
  CHECK(oq.time == 20);
  const auto sq = subject_query(fact, 4);
  CHECK(sq.subject == 7);
  CHECK(sq.relation == 5);  // r + |R|
  CHECK(sq.gold.value() == 3);
  CHECK(sq.time == 20);
}

TEST_CASE("initial state mirrors the query") {
  const auto kg = chain_graph();
  Env env(kg, {});
  const QueryTask q{0, 1, 3, 30};
  const auto s = env.initial_state(q);
  CHECK(s.entity == 0);
  CHECK(s.time == 30);
  CHECK(s.query == q);
  CHECK(s.step == 0);

  const QueryTask q2{2, 0, std::nullopt, 15};
  const auto s2 = env.initial_state(q2);
  CHECK(s2.entity == 2);
  CHECK(!(s2 == s));
  CHECK_THROWS_AS(env.initial_state(QueryTask{99, 0, std::nullopt, 1}), Error);
}

TEST_CASE("valid actions: self-loop first, isolated entities, small caps") {
  const auto kg = chain_graph();
  Env env(kg, {});

  // entity 4 is isolated: only the self-loop
  const auto iso = env.valid_actions(env.initial_state({4, 0, std::nullopt, 10}));
  REQUIRE(iso.size() == 1);
  CHECK(iso[0] == ActionCandidate{kg.stop_relation_id(), 4, 10});

  // entity 1 at a late query time sees self-loop + 2 edges (out, inverse)
  const auto acts = env.valid_actions(env.initial_state({1, 0, std::nullopt, 10}));
  REQUIRE(acts.size() == 3);
  CHECK(acts[0].relation == kg.stop_relation_id());
  for (std::size_t i = 1; i < acts.size(); ++i) CHECK(acts[i].time <= 10);
}

TEST_CASE("action cap keeps the most recent edges with deterministic ties") {
  // entity 0 with 8 out-edges at increasing timestamps
  std::vector<Quadruple> facts;
  for (std::uint32_t i = 0; i < 8; ++i)
    facts.push_back({0, 0, i + 1, static_cast<std::int64_t>(i + 1)});
  const auto kg = TemporalKG::build(facts, 9, 1);
  EnvConfig cfg;
  cfg.action_cap = 4;  // self-loop + 3 edges
  Env env(kg, cfg);
  const auto acts = env.valid_actions(env.initial_state({0, 0, std::nullopt, 100}));
  REQUIRE(acts.size() == 4);
  CHECK(acts[1].time == 8);
  CHECK(acts[2].time == 7);
  CHECK(acts[3].time == 6);
}

TEST_CASE("strict mode hides edges at the query timestamp; paper mode shows them") {
  // an edge dated exactly at the query time
  std::vector<Quadruple> facts{{0, 0, 1, 5}, {0, 0, 2, 3}};
  const auto kg = TemporalKG::build(facts, 3, 1);

  EnvConfig strict;
  strict.time_constraint = TimeConstraint::strict;
  EnvConfig paper;
  paper.time_constraint = TimeConstraint::paper;

  const QueryTask q{0, 0, 1, 5};  // t_q = 5 equals the edge timestamp
  const auto strict_acts = Env(kg, strict).valid_actions(Env(kg, strict).initial_state(q));
  REQUIRE(strict_acts.size() == 2);  // self-loop + the t=3 edge only
  CHECK(strict_acts[1].time == 3);

  const auto paper_acts = Env(kg, paper).valid_actions(Env(kg, paper).initial_state(q));
  CHECK(paper_acts.size() == 3);  // the t=5 edge is admissible literally
}

TEST_CASE("strict mode still allows co-temporal hops below the query time") {
  // two edges sharing timestamp 4: 0 -> 1 and 1 -> 2
  std::vector<Quadruple> facts{{0, 0, 1, 4}, {1, 0, 2, 4}};
  const auto kg = TemporalKG::build(facts, 3, 1);
  Env env(kg, {});
  const QueryTask q{0, 0, 2, 6};
  auto s = env.initial_state(q);
  auto acts = env.valid_actions(s);
  REQUIRE(acts.size() == 2);
  s = env.step(s, acts[1]);  // move to entity 1 at t=4
  CHECK(s.entity == 1);
  CHECK(s.time == 4);
  acts = env.valid_actions(s);
  // self-loop, the onward t=4 edge, and the inverse back-edge stay admissible
  bool saw_forward = false;
  for (const auto& a : acts) saw_forward |= (a.entity == 2 && a.time == 4);
  CHECK(saw_forward);
}

TEST_CASE("transitions are deterministic and reject inadmissible actions") {
  const auto kg = chain_graph();
  Env env(kg, {});
  const QueryTask q{0, 1, 3, 10};
  const auto s0 = env.initial_state(q);
  const auto acts = env.valid_actions(s0);
  REQUIRE(acts.size() >= 2);

  const auto s1 = env.step(s0, acts[1]);
  CHECK(s1.step == 1);
  CHECK(s1.entity == acts[1].entity);
  CHECK(s1.time == acts[1].time);
  CHECK(env.step(s0, acts[1]) == s1);  // pure function

  const auto loop = env.step(s0, acts[0]);
  CHECK(loop.entity == s0.entity);
  CHECK(loop.time == s0.time);
  CHECK(loop.step == 1);

  CHECK_THROWS_AS(env.step(s0, ActionCandidate{0, 3, 2}), Error);  // not an edge of entity 0
}

TEST_CASE("max-steps self-loops terminate at the start and score the gold correctly") {
  const auto kg = chain_graph();
  EnvConfig cfg;
  cfg.max_steps = 3;
  Env env(kg, cfg);
  const QueryTask q{0, 1, 0, 10};  // gold equals the start entity
  auto s = env.initial_state(q);
  Trajectory traj;
  traj.query = q;
  while (!env.is_terminal(s)) {
    const auto acts = env.valid_actions(s);
    s = env.step(s, acts[0]);  // always self-loop
  }
  traj.final_state = s;
  CHECK(s.step == 3);
  CHECK(s.entity == 0);
  CHECK(env.terminal_reward(traj) == 1.0);

  traj.query.gold = 3;
  CHECK(env.terminal_reward(traj) == 0.0);
  traj.query.gold.reset();
  CHECK_THROWS_AS(env.terminal_reward(traj), Error);
  CHECK_THROWS_AS(env.step(s, ActionCandidate{kg.stop_relation_id(), 0, 10}), Error);
}

TEST_CASE("random rollouts keep timestamps non-increasing and action lists bounded") {
  Rng mk(77);
  std::vector<Quadruple> facts;
  for (int i = 0; i < 300; ++i) {
    const auto s = static_cast<std::uint32_t>(mk.below(30));
    auto o = static_cast<std::uint32_t>(mk.below(30));
    if (o == s) o = (o + 7) % 30;
    facts.push_back({s, static_cast<std::uint32_t>(mk.below(4)), o,
                     static_cast<std::int64_t>(1 + mk.below(20))});
  }
  const auto kg = TemporalKG::build(facts, 30, 4);
  EnvConfig cfg;
  cfg.action_cap = 10;
  Env env(kg, cfg);
  Rng rng(123);
  for (int episode = 0; episode < 10000; ++episode) {
    const QueryTask q{static_cast<std::uint32_t>(rng.below(30)),
                      static_cast<std::uint32_t>(rng.below(8)), std::nullopt,
                      static_cast<std::int64_t>(1 + rng.below(25))};
    auto s = env.initial_state(q);
    while (!env.is_terminal(s)) {
      const auto acts = env.valid_actions(s);
      REQUIRE(!acts.empty());
      REQUIRE(acts.size() <= cfg.action_cap);
      REQUIRE(acts[0].relation == kg.stop_relation_id());
      const auto next = env.step(s, acts[rng.below(acts.size())]);
      REQUIRE(next.time <= s.time);
      REQUIRE(next.time <= q.time);
      s = next;
    }
  }
}

TEST_CASE("trajectory rendering resolves names, inverse marks, and the stay action") {
  Vocab ents, rels;
  ents.intern("paris");
  ents.intern("lyon");
  rels.intern("visits");
  std::istringstream dummy;

  Trajectory traj;
  traj.steps.push_back({EnvState{0, 9, {}, 0}, ActionCandidate{0, 1, 7}, 0.5, nullptr, false});
  traj.steps.push_back({EnvState{1, 7, {}, 1}, ActionCandidate{1, 0, 6}, 0.25, nullptr, false});
  traj.steps.push_back({EnvState{0, 6, {}, 2}, ActionCandidate{2, 0, 6}, 1.0, nullptr, true});
  std::ostringstream out;
  write_trajectory(out, traj, ents, rels);
  CHECK(out.str() ==
        "paris\tvisits\tlyon\t7\t0.500000\n"
        "lyon\tvisits^-1\tparis\t6\t0.250000\n"
        "paris\t<stay>\tparis\t6\t1.000000\n");
  CHECK(relation_display(0, rels) == "visits");
  CHECK(relation_display(1, rels) == "visits^-1");
  CHECK(relation_display(2, rels) == "<stay>");
  CHECK_THROWS_AS(relation_display(3, rels), Error);
}
