#include "tkgr/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "tkgr/common.hpp"

namespace tkgr {
namespace {

std::vector<Quadruple> parse_file(const std::filesystem::path& path, Vocab& entities,
                                  Vocab& relations) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, strf("cannot open '%s'", path.string().c_str()));
  return parse_quadruples(in, path.filename().string(), entities, relations);
}

void write_file(const std::filesystem::path& path, const std::vector<Quadruple>& quads,
                const Vocab& entities, const Vocab& relations) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, strf("cannot write '%s'", path.string().c_str()));
  write_quadruples(out, quads, entities, relations);
  if (!out) fail(ErrorKind::io, strf("write to '%s' failed", path.string().c_str()));
}

std::pair<std::int64_t, std::int64_t> time_range(const std::vector<Quadruple>& quads) {
  auto [lo, hi] = std::minmax_element(quads.begin(), quads.end(),
                                      [](const Quadruple& a, const Quadruple& b) {
                                        return a.t < b.t;
                                      });
  return {lo->t, hi->t};
}

}  // namespace

Dataset Dataset::from_files(const std::filesystem::path& train_path,
                            const std::filesystem::path& valid_path,
                            const std::filesystem::path& test_path) {
  Dataset ds;
  ds.train = parse_file(train_path, ds.entities, ds.relations);
  ds.entities.freeze();
  ds.relations.freeze();
  ds.valid = parse_file(valid_path, ds.entities, ds.relations);
  ds.test = parse_file(test_path, ds.entities, ds.relations);
  if (ds.train.empty()) fail(ErrorKind::parse, "training split is empty");
  if (ds.valid.empty()) fail(ErrorKind::parse, "validation split is empty");
  if (ds.test.empty()) fail(ErrorKind::parse, "test split is empty");

  // timestamp normalization across all splits
  std::int64_t origin = std::numeric_limits<std::int64_t>::max();
  for (const auto* split : {&ds.train, &ds.valid, &ds.test})
    for (const auto& q : *split) origin = std::min(origin, q.t);
  std::int64_t g = 0;
  for (const auto* split : {&ds.train, &ds.valid, &ds.test})
    for (const auto& q : *split) g = std::gcd(g, q.t - origin);
  if (g == 0) g = 1;
  ds.origin = origin;
  ds.granularity = g;
  for (auto* split : {&ds.train, &ds.valid, &ds.test})
    for (auto& q : *split) q.t = (q.t - origin) / g;

  const auto [tr_lo, tr_hi] = time_range(ds.train);
  const auto [va_lo, va_hi] = time_range(ds.valid);
  const auto [te_lo, te_hi] = time_range(ds.test);
  (void)tr_lo;
  (void)te_hi;
  if (!(tr_hi < va_lo))
    fail(ErrorKind::parse,
         strf("split order violated: train ends at %lld but validation starts at %lld",
              static_cast<long long>(tr_hi), static_cast<long long>(va_lo)));
  if (!(va_hi < te_lo))
    fail(ErrorKind::parse,
         strf("split order violated: validation ends at %lld but test starts at %lld",
              static_cast<long long>(va_hi), static_cast<long long>(te_lo)));

  ds.rebuild_filter();
  return ds;
}

void Dataset::rebuild_filter() {
  filter.clear();
  const auto nrel = static_cast<std::uint32_t>(num_base_relations());
  for (const auto* split : {&train, &valid, &test}) {
    for (const auto& q : *split) {
      filter.insert(q);
      filter.insert({q.o, q.r + nrel, q.s, q.t});
    }
  }
}

void Dataset::save_prepared(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, strf("cannot create directory '%s'", dir.string().c_str()));
  entities.save(dir / "entities.tsv");
  relations.save(dir / "relations.tsv");
  write_file(dir / "train.tsv", train, entities, relations);
  write_file(dir / "valid.tsv", valid, entities, relations);
  write_file(dir / "test.tsv", test, entities, relations);
  std::ofstream meta(dir / "meta.tsv");
  if (!meta) fail(ErrorKind::io, "cannot write meta.tsv");
  meta << "origin\t" << origin << "\n"
       << "granularity\t" << granularity << "\n"
       << "entities\t" << entities.size() << "\n"
       << "relations\t" << relations.size() << "\n"
       << "train\t" << train.size() << "\n"
       << "valid\t" << valid.size() << "\n"
       << "test\t" << test.size() << "\n";
}

Dataset Dataset::load_prepared(const std::filesystem::path& dir) {
  Dataset ds;
  ds.entities = Vocab::load(dir / "entities.tsv");
  ds.relations = Vocab::load(dir / "relations.tsv");

  std::ifstream meta(dir / "meta.tsv");
  if (!meta) fail(ErrorKind::io, strf("cannot open '%s'", (dir / "meta.tsv").string().c_str()));
  std::string line;
  while (std::getline(meta, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    const std::string key = line.substr(0, tab);
    const std::string value = line.substr(tab + 1);
    try {
      if (key == "origin") ds.origin = std::stoll(value);
      if (key == "granularity") ds.granularity = std::stoll(value);
    } catch (const std::exception&) {
      fail(ErrorKind::parse, strf("meta.tsv: bad value for '%s'", key.c_str()));
    }
  }
  if (ds.granularity <= 0) fail(ErrorKind::parse, "meta.tsv: granularity must be positive");

  ds.train = parse_file(dir / "train.tsv", ds.entities, ds.relations);
  ds.valid = parse_file(dir / "valid.tsv", ds.entities, ds.relations);
  ds.test = parse_file(dir / "test.tsv", ds.entities, ds.relations);
  ds.rebuild_filter();
  return ds;
}

}  // namespace tkgr
