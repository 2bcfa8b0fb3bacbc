// Adversary tests: path-matrix assembly, the convolutional semantic score
// against a loop oracle, truth measures and product t-norm rule algebra,
// rule canonicalization, noise-gated rewards, and finite-difference gradient
// checks of both discriminator losses (the semantic one exercising the
// second-order gradient penalty).

#include "doctest.h"

#include <cmath>

#include "fd_check.hpp"
#include "oracle/oracle.hpp"
#include "tkgr/adversary.hpp"
#include "tkgr/common.hpp"

using namespace tkgr;

namespace {

MfarConfig small_mfar(std::size_t dim, std::size_t heads) {
  MfarConfig cfg;
  cfg.dim = dim;
  cfg.raga_heads = heads;
  cfg.tsan_heads = heads;
  cfg.max_hop = 2;
  cfg.neighbor_cap = 4;
  cfg.window = 3;
  return cfg;
}

std::vector<Quadruple> branch_facts() {
  return {{0, 0, 1, 1}, {1, 1, 2, 1}, {0, 0, 3, 2}, {3, 1, 2, 2}, {1, 0, 4, 3}};
}

struct Stack {
  TemporalKG kg;
  ParameterStore store;
  Rng init;
  Representer rep;
  Adversary adv;

  explicit Stack(std::size_t dim = 4, std::size_t heads = 2,
                 std::uint64_t seed = 23, std::size_t max_steps = 3)
      : kg(TemporalKG::build(branch_facts(), 6, 2)),
        init(seed),
        rep(kg, store, small_mfar(dim, heads), init),
        adv(kg, rep, store, max_steps, init) {}
};

oracle::Vec vec_of(const ad::Var& v) { return v->value.data(); }

oracle::Mat mat_of(const ad::Var& m) {
  oracle::Mat out(m->value.rows(), oracle::Vec(m->value.cols()));
  for (std::size_t r = 0; r < m->value.rows(); ++r)
    for (std::size_t c = 0; c < m->value.cols(); ++c) out[r][c] = m->value.at(r, c);
  return out;
}

void randomize(const ad::Var& v, Rng& rng, double scale = 0.8) {
  for (double& x : v->value.data()) x = rng.uniform(-scale, scale);
}

}  // namespace

TEST_CASE("path matrices stack step embeddings and zero-pad to length L") {
  Stack s;
  const std::int64_t qt = 4;
  const std::vector<ActionCandidate> steps{{0, 1, 1}, {1, 2, 1}, {3, 0, 1}};
  const auto full = s.adv.path_matrix(steps, qt);
  REQUIRE(full->value.rows() == 3);
  REQUIRE(full->value.cols() == 8);
  for (std::size_t l = 0; l < steps.size(); ++l) {
    const auto rel = vec_of(s.rep.relation_embedding(steps[l].relation));
    const auto z = vec_of(s.rep.represent(steps[l].entity, steps[l].time));
    for (std::size_t d = 0; d < 4; ++d) {
      CHECK(full->value.at(l, d) == rel[d]);
      CHECK(full->value.at(l, 4 + d) == z[d]);
    }
  }

  const auto padded = s.adv.path_matrix({{0, 1, 1}}, qt);
  REQUIRE(padded->value.rows() == 3);
  for (std::size_t d = 0; d < 8; ++d) {
    CHECK(padded->value.at(1, d) == 0.0);
    CHECK(padded->value.at(2, d) == 0.0);
  }
  const auto rel = vec_of(s.rep.relation_embedding(0));
  for (std::size_t d = 0; d < 4; ++d) CHECK(padded->value.at(0, d) == rel[d]);

  CHECK_THROWS_AS(s.adv.path_matrix({}, qt), Error);
  CHECK_THROWS_AS(
      s.adv.path_matrix({{0, 1, 1}, {0, 1, 1}, {0, 1, 1}, {0, 1, 1}}, qt),
      Error);
}

TEST_CASE("semantic score: zero case, range, and convolution oracle") {
  Stack s(5, 1);  // width 10 so the 3x5 kernel slides over 6 positions
  for (const char* name : {"disc/conv_w", "disc/conv_b", "disc/w_s"})
    for (double& x : s.store.get(name)->value.data()) x = 0.0;
  const auto zero_p = ad::constant(Tensor::zeros({3, 10}));
  CHECK(s.adv.semantic_score(zero_p)->value.item() == 0.5);

  Rng rng(41);
  for (int trial = 0; trial < 25; ++trial) {
    randomize(s.store.get("disc/conv_w"), rng);
    randomize(s.store.get("disc/conv_b"), rng);
    randomize(s.store.get("disc/w_s"), rng);
    Tensor pt = Tensor::zeros({3, 10});
    for (double& x : pt.data()) x = rng.uniform(-1.5, 1.5);
    const auto p = ad::leaf(pt);
    const auto got = s.adv.semantic_score(p)->value.item();
    CHECK(got > 0.0);
    CHECK(got < 1.0);
    const double want = oracle::semantic_score(
        mat_of(p), mat_of(s.store.get("disc/conv_w")),
        s.store.get("disc/conv_b")->value.item(),
        vec_of(s.store.get("disc/w_s")));
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("quadruple truth measure matches the explicit-loop oracle") {
  Stack s;
  for (double& x : s.store.get("disc/w_r")->value.data()) x = 0.0;
  CHECK(s.adv.quad_truth({0, 0, 1, 1}, 4)->value.item() == 0.5);

  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    randomize(s.store.get("disc/w_r"), rng);
    const Quadruple q{static_cast<std::uint32_t>(rng.below(6)),
                      static_cast<std::uint32_t>(rng.below(5)),
                      static_cast<std::uint32_t>(rng.below(6)),
                      static_cast<std::int64_t>(rng.below(5))};
    const std::int64_t qt = 4;
    const auto got = s.adv.quad_truth(q, qt)->value.item();
    CHECK(got > 0.0);
    CHECK(got < 1.0);
    const std::int64_t at = std::min(q.t, qt - 1);
    const double want = oracle::quad_truth(
        vec_of(s.rep.represent(q.s, at)), vec_of(s.rep.relation_embedding(q.r)),
        vec_of(s.rep.represent(q.o, at)), vec_of(s.store.get("disc/w_r")));
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
  }

  // Detached scoring cuts the representation stack out of the gradient.
  const auto attached = s.adv.quad_truth({0, 0, 1, 1}, 4, false);
  const auto grads_on = ad::backward(attached);
  const Tensor entity_grad = ad::grad_of(grads_on, s.store.get("emb/entity"));
  CHECK(entity_grad.size() > 0);
  bool nonzero = false;
  for (double g : entity_grad.data())
    if (g != 0.0) nonzero = true;
  CHECK(nonzero);
  const auto detached = s.adv.quad_truth({0, 0, 1, 1}, 4, true);
  const auto grads_off = ad::backward(detached);
  const Tensor detached_grad =
      ad::grad_of(grads_off, s.store.get("emb/entity"));
  for (double g : detached_grad.data()) CHECK(g == 0.0);
}

TEST_CASE("rule score follows product t-norm algebra") {
  auto v = [](double x) { return ad::scalar(x); };
  CHECK(Adversary::rule_score({v(1.0), v(1.0)}, v(0.7))->value.item() ==
        doctest::Approx(0.7).epsilon(1e-15));
  CHECK(Adversary::rule_score({v(0.0), v(0.9)}, v(0.2))->value.item() ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(Adversary::rule_score({v(0.5), v(0.5)}, v(0.8))->value.item() ==
        doctest::Approx(0.95).epsilon(1e-15));
  CHECK_THROWS_AS(Adversary::rule_score({}, v(0.5)), Error);

  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ad::Var> body;
    const std::size_t n = 1 + rng.below(3);
    for (std::size_t i = 0; i < n; ++i)
      body.push_back(v(0.05 + 0.9 * rng.uniform()));
    const double lo_head = 0.05 + 0.4 * rng.uniform();
    const double hi_head = lo_head + 0.3;
    const double lo = Adversary::rule_score(body, v(lo_head))->value.item();
    const double hi = Adversary::rule_score(body, v(hi_head))->value.item();
    CHECK(lo <= hi);  // non-decreasing in the head truth
    CHECK(lo > 0.0);
    CHECK(lo < 1.0);
  }
}

TEST_CASE("paths canonicalize into rule instances") {
  Stack s;
  const QueryTask q{0, 1, std::nullopt, 5};
  const auto stop = s.kg.stop_relation_id();

  // Times descending along the walk: reversed through inverse relations.
  const auto rule =
      s.adv.path_to_rule({{0, 1, 3}, {1, 2, 2}}, q);  // 0 -r0@3-> 1 -r1@2-> 2
  CHECK_FALSE(rule.degenerate);
  REQUIRE(rule.body.size() == 2);
  CHECK(rule.body[0] == Quadruple{2, invert_relation(1, 2), 1, 2});
  CHECK(rule.body[1] == Quadruple{1, invert_relation(0, 2), 0, 3});
  CHECK(rule.body[0].t <= rule.body[1].t);
  CHECK(rule.head == Quadruple{0, 1, 2, 5});

  // Self-loops are stripped; co-temporal bodies keep traversal order.
  const auto mixed =
      s.adv.path_to_rule({{0, 1, 2}, {stop, 1, 2}, {1, 2, 2}}, q);
  REQUIRE(mixed.body.size() == 2);
  CHECK(mixed.body[0] == Quadruple{0, 0, 1, 2});
  CHECK(mixed.body[1] == Quadruple{1, 1, 2, 2});
  CHECK(mixed.head == Quadruple{0, 1, 2, 5});
  CHECK_FALSE(mixed.degenerate);

  const auto degenerate = s.adv.path_to_rule({{stop, 0, 5}, {stop, 0, 5}}, q);
  CHECK(degenerate.degenerate);
  REQUIRE(degenerate.body.size() == 1);
  CHECK(degenerate.body[0] == Quadruple{0, stop, 0, 5});
  CHECK(degenerate.head == Quadruple{0, 1, 0, 5});

  // One-edge rule: Eq. collapses to I(Q1)I(Qh) - I(Q1) + 1.
  const auto single = s.adv.path_to_rule({{0, 1, 3}}, q);
  const double i1 = s.adv.quad_truth(single.body[0], 5)->value.item();
  const double ih = s.adv.quad_truth(single.head, 5)->value.item();
  CHECK(s.adv.rule_truth(single)->value.item() ==
        doctest::Approx(i1 * ih - i1 + 1.0).epsilon(1e-12));
}

TEST_CASE("noise, gating, and the adaptive blend") {
  Rng a(99), b(99);
  const auto n1 = Adversary::noise_scores(a);
  const auto n2 = Adversary::noise_scores(b);
  CHECK(n1 == n2);
  CHECK(n1.first > 0.0);
  CHECK(n1.first < 1.0);
  CHECK(n1.second > 0.0);
  CHECK(n1.second < 1.0);

  Rng c(5);
  double mean_s = 0.0, mean_r = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto [ns, nr] = Adversary::noise_scores(c);
    CHECK(ns > 0.0);
    CHECK(ns < 1.0);
    mean_s += ns;
    mean_r += nr;
  }
  CHECK(mean_s / draws == doctest::Approx(0.5).epsilon(0.04));
  CHECK(mean_r / draws == doctest::Approx(0.5).epsilon(0.04));

  CHECK(Adversary::gated_rewards(0.8, 0.9, 0.3, 0.95) ==
        std::pair<double, double>{0.5, 0.0});
  CHECK(Adversary::gated_rewards(0.2, 0.4, 0.6, 0.4) ==
        std::pair<double, double>{0.0, 0.0});

  CHECK(Adversary::adaptive_reward(1.0, 0.4, 0.2, 0.5) ==
        doctest::Approx(1.3).epsilon(1e-15));
  CHECK(Adversary::adaptive_reward(0.5, 0.4, 0.2, 0.0) ==
        doctest::Approx(0.7).epsilon(1e-15));
  CHECK(Adversary::adaptive_reward(0.5, 0.4, 0.2, 1.0) ==
        doctest::Approx(0.9).epsilon(1e-15));
  CHECK_THROWS_AS(Adversary::adaptive_reward(1, 0.4, 0.2, 1.5), Error);

  // Bounds: R_s, R_r in [0,1); blended reward in [0,2] for alpha in [0,1].
  Rng d(6);
  for (int i = 0; i < 200; ++i) {
    const auto [ns, nr] = Adversary::noise_scores(d);
    const auto [rs, rr] =
        Adversary::gated_rewards(d.uniform(), d.uniform(), ns, nr);
    CHECK(rs >= 0.0);
    CHECK(rs < 1.0);
    CHECK(rr >= 0.0);
    CHECK(rr < 1.0);
    const double r = Adversary::adaptive_reward(1.0, rs, rr, d.uniform());
    CHECK(r >= 0.0);
    CHECK(r <= 2.0);
  }
}

TEST_CASE("semantic discriminator loss: cancellation and penalty structure") {
  Stack s;
  Rng rng(3);
  auto random_path = [&](double scale) {
    Tensor t = Tensor::zeros({3, 8});
    for (double& x : t.data()) x = rng.uniform(-scale, scale);
    return ad::constant(t);
  };
  const auto p1 = random_path(1.0), p2 = random_path(0.5);

  // Identical batches cancel the critic term; with lambda 0 the loss is 0.
  const auto zero = s.adv.semantic_disc_loss({p1}, {p1}, 0.0, {0.4});
  CHECK(zero->value.item() == doctest::Approx(0.0).epsilon(1e-12));

  // The penalty adds exactly lambda * (|grad at p_hat| - 1)^2.
  const double eps = 0.3;
  const auto base = s.adv.semantic_disc_loss({p1}, {p2}, 0.0, {eps});
  const auto with_pen = s.adv.semantic_disc_loss({p1}, {p2}, 5.0, {eps});
  Tensor mixed = Tensor::zeros({3, 8});
  for (std::size_t k = 0; k < mixed.size(); ++k)
    mixed.data()[k] = eps * p1->value[k] + (1.0 - eps) * p2->value[k];
  const auto p_hat = ad::leaf(mixed);
  const auto grads = ad::backward(s.adv.semantic_score(p_hat));
  const Tensor hat_grad = ad::grad_of(grads, p_hat);
  double sq = 0.0;
  for (double g : hat_grad.data()) sq += g * g;
  const double want_pen = 5.0 * std::pow(std::sqrt(sq) - 1.0, 2.0);
  CHECK(with_pen->value.item() - base->value.item() ==
        doctest::Approx(want_pen).epsilon(1e-10));

  CHECK_THROWS_AS(s.adv.semantic_disc_loss({}, {p1}, 5.0, {}), Error);
  CHECK_THROWS_AS(s.adv.semantic_disc_loss({p1}, {}, 5.0, {}), Error);
  CHECK_THROWS_AS(s.adv.semantic_disc_loss({p1}, {p2}, 5.0, {}), Error);
  CHECK_THROWS_AS(s.adv.semantic_disc_loss({p1}, {p2}, 5.0, {1.5}), Error);
  const auto narrow = ad::constant(Tensor::zeros({3, 6}));
  CHECK_THROWS_AS(s.adv.semantic_disc_loss({p1}, {narrow}, 5.0, {0.5}), Error);
}

TEST_CASE("semantic discriminator gradients match finite differences") {
  Stack s;
  Rng rng(11);
  auto fixed_path = [&] {
    Tensor t = Tensor::zeros({3, 8});
    for (double& x : t.data()) x = rng.uniform(-1.0, 1.0);
    return ad::constant(t);
  };
  const std::vector<ad::Var> gen{fixed_path(), fixed_path()};
  const std::vector<ad::Var> demo{fixed_path(), fixed_path()};
  const std::vector<double> eps{0.25, 0.75};

  auto loss_var = [&] { return s.adv.semantic_disc_loss(gen, demo, 5.0, eps); };
  auto loss_val = [&] { return loss_var()->value.item(); };

  const auto grads = ad::backward(loss_var());
  for (const char* name : {"disc/conv_w", "disc/conv_b", "disc/w_s"}) {
    const auto param = s.store.get(name);
    const Tensor analytic = ad::grad_of(grads, param);
    const double err = testsupport::max_rel_error(param, loss_val, analytic, 1e-4);
    INFO("parameter ", name);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("logic discriminator loss values and gradients") {
  CHECK(Adversary::logic_disc_loss({ad::scalar(0.5)}, {ad::scalar(0.5)})
            ->value.item() == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(Adversary::logic_disc_loss({ad::scalar(1e-9)}, {ad::scalar(1.0 - 1e-9)})
            ->value.item() == doctest::Approx(0.0).epsilon(1e-6));
  CHECK_THROWS_AS(Adversary::logic_disc_loss({}, {ad::scalar(0.5)}), Error);
  CHECK_THROWS_AS(Adversary::logic_disc_loss({ad::scalar(0.5)}, {}), Error);

  // Gradients through rule instances built on the live representation stack.
  Stack s;
  const QueryTask q{0, 1, std::nullopt, 4};
  const auto gen_rule = s.adv.path_to_rule({{0, 1, 3}, {1, 2, 1}}, q);
  const auto demo_rule = s.adv.path_to_rule({{0, 3, 2}, {1, 2, 2}}, q);

  auto loss_var = [&] {
    return Adversary::logic_disc_loss({s.adv.rule_truth(gen_rule)},
                                      {s.adv.rule_truth(demo_rule)});
  };
  auto loss_val = [&] {
    s.rep.invalidate();
    return loss_var()->value.item();
  };

  s.rep.invalidate();
  const auto grads = ad::backward(loss_var());
  for (const char* name : {"disc/w_r", "emb/entity", "emb/relation", "raga/w1",
                           "tsan/wq"}) {
    const auto param = s.store.get(name);
    const Tensor analytic = ad::grad_of(grads, param);
    const double err = testsupport::max_rel_error(param, loss_val, analytic, 1e-4);
    INFO("parameter ", name);
    CHECK(err <= 1e-4);
  }
}
