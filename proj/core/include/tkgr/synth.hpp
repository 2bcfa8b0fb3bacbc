#pragma once

// Synthetic dataset generator with a planted, deterministic 2-hop rule.
//
// Entity pairs (X_c, Y_c) carry the rule (X, r0, Y, t) ∧ (Y, r1, Z, t) ⇒
// (X, r2, Z, t+2), where the answer Z rotates with the grounding timestamp
// over a shared pool. Per timestamp the groundings are functional in both
// directions (one Y per X, one Z per Y, and conversely), so the co-temporal
// 2-hop walk determines the answer uniquely — while head edges from earlier
// groundings point at outdated answers, making one-hop copying of historical
// (X, r2, ·) edges unreliable. Body facts always carry earlier timestamps
// than the head, so heads placed in the validation/test ranges remain
// answerable from training-range support. Remaining relations carry uniform
// background noise confined to the training time range.

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "tkgr/dataset.hpp"

namespace tkgr {

struct SynthSpec {
  std::size_t entities = 50;
  std::size_t relations = 5;   // r0, r1 rule body; r2 rule head; rest noise
  std::int64_t timestamps = 40;
  std::size_t patterns = 200;  // planted rule instances across all triples
  std::size_t noise_facts = 150;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SynthReport {
  std::size_t chains = 0;
  std::size_t train_instances = 0;
  std::size_t valid_instances = 0;
  std::size_t test_instances = 0;
  std::size_t noise_facts = 0;
  std::size_t verified_heads = 0;  // eval-range heads with 2-hop support
};

// Generates the dataset in memory (filter already built) and verifies that
// every head outside the training range has an admissible support walk.
Dataset gen_synthetic(const SynthSpec& spec, SynthReport* report = nullptr);

// Writes train.txt / valid.txt / test.txt in the raw 4-column TSV format
// accepted by Dataset::from_files.
void write_synthetic_files(const Dataset& data,
                           const std::filesystem::path& dir);

}  // namespace tkgr
