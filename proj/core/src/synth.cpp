#include "tkgr/synth.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "tkgr/common.hpp"
#include "tkgr/rng.hpp"

namespace tkgr {

void SynthSpec::validate() const {
  if (entities < 3)
    fail(ErrorKind::argument, "need at least 3 entities for one triple");
  if (relations < 3)
    fail(ErrorKind::argument, "need at least 3 relations for the rule");
  if (relations < 4 && noise_facts > 0)
    fail(ErrorKind::argument,
         "noise facts need a relation outside the planted rule");
  if (timestamps < 14)
    fail(ErrorKind::argument,
         "need at least 14 timestamps: a training band plus the spaced "
         "validation and test bands");
  const std::size_t chains = entities / 3;
  // Per chain: two test instances, one validation instance, and as many
  // training-range body stamps as fit at the minimum spacing.
  const auto train_top = static_cast<std::size_t>(timestamps) - 13;
  const std::size_t capacity = chains * (3 + train_top / kMinGap + 1);
  if (patterns > capacity)
    fail(ErrorKind::argument,
         strf("%zu patterns exceed the %zu distinct instances this size "
              "supports",
              patterns, capacity));
  if (patterns == 0 && noise_facts == 0)
    fail(ErrorKind::argument, "refusing to generate an empty dataset");
}

namespace {

struct Chain {
  std::uint32_t x, y;
};

}  // namespace

Dataset gen_synthetic(const SynthSpec& spec, SynthReport* report) {
  spec.validate();
  SynthReport rep;

  Dataset ds;
  for (std::size_t e = 0; e < spec.entities; ++e)
    ds.entities.intern(strf("e%zu", e));
  for (std::size_t r = 0; r < spec.relations; ++r)
    ds.relations.intern(strf("r%zu", r));

  const std::int64_t last = spec.timestamps - 1;  // test head stamp
  const std::int64_t valid_stamp = last - 1;      // validation head stamp
  const std::int64_t train_last = last - 2;       // last training stamp

  std::vector<Chain> chains;
  for (std::uint32_t c = 0; 3u * c + 2u < spec.entities; ++c)
    chains.push_back({3 * c, 3 * c + 1});
  rep.chains = chains.size();
  const auto m = static_cast<std::uint32_t>(chains.size());

  // The answer entity rotates with the body timestamp: chain c grounded at
  // time t binds Z = 3 * ((c + t) mod m) + 2. Stale head edges therefore
  // point at outdated answers, so copying an earlier (X, r2, ·) edge is
  // unreliable and only the co-temporal 2-hop body determines the gold.
  // The shift keeps the per-timestamp groundings functional in both
  // directions: per (X, t) one Y, per (Y, t) one Z, and conversely.
  auto rotated_z = [m](std::uint32_t c, std::int64_t t) {
    return 3 * static_cast<std::uint32_t>(
                   (c + static_cast<std::uint64_t>(t)) % m) +
           2;
  };

  // Distribute rule instances round-robin over the triples. The first
  // instance of each triple lands its head on the test stamp, the second on
  // the validation stamp, and the rest draw distinct training-range body
  // stamps, so the eval splits are populated first.
  std::vector<std::vector<std::int64_t>> slots(chains.size());
  {
    Rng slot_rng(Rng::mix({spec.seed, 0x736c6f747364726fULL}));
    std::vector<std::int64_t> base;
    for (std::int64_t t = 0; t + 2 <= train_last; ++t) base.push_back(t);
    for (auto& s : slots) {
      s = base;
      for (std::size_t i = s.size(); i > 1; --i)
        std::swap(s[i - 1], s[slot_rng.below(i)]);
    }
  }
  std::vector<std::size_t> used(chains.size(), 0);
  auto add_instance = [&](std::uint32_t c, std::int64_t body_stamp,
                          std::vector<Quadruple>& head_split) {
    const std::uint32_t z = rotated_z(c, body_stamp);
    ds.train.push_back({chains[c].x, 0, chains[c].y, body_stamp});
    ds.train.push_back({chains[c].y, 1, z, body_stamp});
    head_split.push_back({chains[c].x, 2, z, body_stamp + 2});
  };
  for (std::size_t i = 0; i < spec.patterns; ++i) {
    const auto c = static_cast<std::uint32_t>(i % chains.size());
    const std::size_t k = used[c]++;
    if (k == 0) {
      add_instance(c, last - 2, ds.test);
      ++rep.test_instances;
    } else if (k == 1) {
      add_instance(c, valid_stamp - 2, ds.valid);
      ++rep.valid_instances;
    } else {
      if (k - 2 >= slots[c].size())
        fail(ErrorKind::contract, "instance capacity accounting is wrong");
      add_instance(c, slots[c][k - 2], ds.train);
      ++rep.train_instances;
    }
  }

  // Background noise: uniform edges over the noise relations, confined to
  // the training time range so the eval splits stay purely planted.
  {
    Rng noise_rng(Rng::mix({spec.seed, 0x6e6f697365666163ULL}));
    std::unordered_set<Quadruple, QuadrupleHash> seen;
    std::size_t emitted = 0, attempts = 0;
    while (emitted < spec.noise_facts) {
      if (++attempts > 100 * spec.noise_facts + 1000)
        fail(ErrorKind::argument,
             "noise volume exceeds the space of distinct background facts");
      Quadruple q;
      q.s = static_cast<std::uint32_t>(noise_rng.below(spec.entities));
      q.o = static_cast<std::uint32_t>(noise_rng.below(spec.entities));
      q.r = static_cast<std::uint32_t>(3 + noise_rng.below(spec.relations - 3));
      q.t = static_cast<std::int64_t>(
          noise_rng.below(static_cast<std::uint64_t>(train_last + 1)));
      if (q.s == q.o || !seen.insert(q).second) continue;
      ds.train.push_back(q);
      ++emitted;
    }
    rep.noise_facts = emitted;
  }

  if (ds.train.empty())
    fail(ErrorKind::argument, "generated dataset has an empty training split");
  ds.rebuild_filter();

  // Verification pass: every head outside the training range must have a
  // time-admissible 2-hop support walk within the training facts.
  for (const auto* split : {&ds.valid, &ds.test}) {
    for (const Quadruple& head : *split) {
      bool supported = false;
      for (const Quadruple& a : ds.train) {
        if (a.s != head.s || a.r != 0 || a.t >= head.t) continue;
        for (const Quadruple& b : ds.train)
          if (b.s == a.o && b.r == 1 && b.o == head.o && b.t <= a.t) {
            supported = true;
            break;
          }
        if (supported) break;
      }
      if (!supported)
        fail(ErrorKind::contract,
             strf("planted head (%u,%u,%u,@%lld) has no training support",
                  head.s, head.r, head.o, static_cast<long long>(head.t)));
      ++rep.verified_heads;
    }
  }

  if (report) *report = rep;
  return ds;
}

void write_synthetic_files(const Dataset& data,
                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::pair<const char*, const std::vector<Quadruple>*> files[] = {
      {"train.txt", &data.train},
      {"valid.txt", &data.valid},
      {"test.txt", &data.test}};
  for (const auto& [name, quads] : files) {
    const auto path = dir / name;
    std::ofstream out(path);
    if (!out)
      fail(ErrorKind::io, strf("cannot write '%s'", path.string().c_str()));
    write_quadruples(out, *quads, data.entities, data.relations);
    if (!out)
      fail(ErrorKind::io, strf("write to '%s' failed", path.string().c_str()));
  }
}

}  // namespace tkgr
