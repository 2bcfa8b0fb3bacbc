// Vocabulary tests: interning, frozen-mode rejection with suggestions,
// tab-separated persistence.

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "tkgr/common.hpp"
#include "tkgr/vocab.hpp"

using namespace tkgr;
namespace fs = std::filesystem;

TEST_CASE("interning assigns dense ids in first-seen order") {
  Vocab v;
  CHECK(v.intern("alpha") == 0);
  CHECK(v.intern("beta") == 1);
  CHECK(v.intern("alpha") == 0);
  CHECK(v.size() == 2);
  CHECK(v.name(0) == "alpha");
  CHECK(v.name(1) == "beta");
  CHECK(v.find("beta").value() == 1);
  CHECK(!v.find("gamma").has_value());
}

TEST_CASE("frozen vocab rejects new names and suggests near matches") {
  Vocab v;
  v.intern("make_statement");
  v.intern("make_visit");
  v.intern("arrest");
  v.freeze();
  CHECK(v.frozen());
  CHECK(v.intern("arrest") == 2);  // existing names still resolve
  try {
    v.require("make_sttaement");
    FAIL("expected vocab error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::vocab);
    const std::string msg = e.what();
    CHECK(msg.find("make_sttaement") != std::string::npos);
    CHECK(msg.find("make_statement") != std::string::npos);  // closest suggestion
  }
}

TEST_CASE("vocab save/load round trip, load is frozen") {
  Vocab v;
  v.intern("one two");  // spaces allowed inside names
  v.intern("three");
  const fs::path p =
      fs::temp_directory_path() / ("tkgr_vocab_" + std::to_string(::getpid()) + ".tsv");
  v.save(p);
  const Vocab w = Vocab::load(p);
  CHECK(w.size() == 2);
  CHECK(w.name(0) == "one two");
  CHECK(w.name(1) == "three");
  CHECK(w.frozen());
  fs::remove(p);
}

TEST_CASE("vocab load validates dense ascending ids") {
  const fs::path p =
      fs::temp_directory_path() / ("tkgr_vocab_bad_" + std::to_string(::getpid()) + ".tsv");
  {
    std::ofstream out(p);
    out << "0\ta\n2\tb\n";  // gap in ids
  }
  CHECK_THROWS_AS(Vocab::load(p), Error);
  fs::remove(p);
}
