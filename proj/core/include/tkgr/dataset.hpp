#pragma once

// Dataset = three temporally ordered splits sharing one vocabulary, with
// timestamps normalized to consecutive integer units:
//   normalized t = (raw t - origin) / granularity
// where granularity is the gcd of all raw gaps. Splits must not overlap in
// time and must appear in train < valid < test order.

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include "tkgr/tkg.hpp"
#include "tkgr/vocab.hpp"

namespace tkgr {

struct Dataset {
  Vocab entities;
  Vocab relations;
  std::vector<Quadruple> train, valid, test;
  std::int64_t origin = 0;       // raw timestamp mapped to 0
  std::int64_t granularity = 1;  // raw units per normalized step

  // Every known fact in both orientations, for time-aware filtered ranking.
  std::unordered_set<Quadruple, QuadrupleHash> filter;

  std::size_t num_base_relations() const { return relations.size(); }

  // Parse raw TSV files (train builds the vocabulary; valid/test must not
  // introduce new names), normalize timestamps, validate split ordering.
  static Dataset from_files(const std::filesystem::path& train_path,
                            const std::filesystem::path& valid_path,
                            const std::filesystem::path& test_path);

  // Prepared directory layout: entities.tsv, relations.tsv, meta.tsv,
  // train.tsv/valid.tsv/test.tsv with normalized timestamps.
  void save_prepared(const std::filesystem::path& dir) const;
  static Dataset load_prepared(const std::filesystem::path& dir);

  bool known_fact(std::uint32_t s, std::uint32_t r, std::uint32_t o, std::int64_t t) const {
    return filter.contains({s, r, o, t});
  }

  void rebuild_filter();  // populate `filter` from the three splits
};

}  // namespace tkgr
