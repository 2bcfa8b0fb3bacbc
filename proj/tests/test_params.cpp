// Parameter store, optimizer, and checkpoint container tests.

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "tkgr/common.hpp"
#include "tkgr/params.hpp"

using namespace tkgr;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& tag) {
  return fs::temp_directory_path() / ("tkgr_" + tag + "_" + std::to_string(::getpid()) + ".ckpt");
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("parameter creation is seeded, bounded, and idempotent") {
  Rng rng(42);
  ParameterStore store;
  auto w = store.create("w", {3, 4}, rng, 0.1);
  CHECK(w->value.shape() == std::vector<std::size_t>{3, 4});
  for (double x : w->value.data()) CHECK(std::abs(x) <= 0.1);
  CHECK(store.get("w").get() == w.get());
  CHECK(store.create("w", {3, 4}, rng).get() == w.get());  // adopt, not reinit
  CHECK_THROWS_AS(store.create("w", {4, 4}, rng), Error);  // shape mismatch
  auto b = store.zeros("b", {4});
  for (double x : b->value.data()) CHECK(x == 0.0);
  CHECK(store.names() == std::vector<std::string>{"w", "b"});
  CHECK(store.total_elements() == 16);
}

TEST_CASE("optimizer drives a quadratic to its minimum") {
  Rng rng(1);
  ParameterStore store;
  auto x = store.create("x", {1}, rng, 0.5);
  AdamOptimizer opt(0.1);
  opt.attach_all(store);
  for (int i = 0; i < 400; ++i) {
    auto loss = ad::square(ad::sub(x, ad::scalar(3.0)));
    auto grads = ad::backward(loss);
    opt.step(grads);
  }
  CHECK(x->value[0] == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("optimizer reports the pre-clip global norm and clipping alters the trajectory") {
  auto run = [](double clip, const std::vector<std::vector<double>>& grad_seq) {
    Rng rng(7);
    ParameterStore store;
    auto p = store.create("p", {2}, rng, 0.0);
    const Tensor start = p->value;
    AdamOptimizer opt(0.01, clip);
    opt.attach(p);
    double first_norm = 0.0;
    for (std::size_t s = 0; s < grad_seq.size(); ++s) {
      ad::GradMap grads;
      grads[p.get()] = ad::constant(Tensor::of(grad_seq[s]));
      const double n = opt.step(grads);
      if (s == 0) first_norm = n;
    }
    return std::pair{first_norm, p->value};
  };
  const std::vector<std::vector<double>> seq{{3.0, 4.0}, {0.001, 0.0}};
  auto [norm_free, end_free] = run(0.0, seq);
  auto [norm_clip, end_clip] = run(0.5, seq);
  CHECK(norm_free == doctest::Approx(5.0));
  CHECK(norm_clip == doctest::Approx(5.0));  // reported norm is pre-clip
  CHECK(end_free.data() != end_clip.data());     // clipped moments diverge later
}

TEST_CASE("checkpoint round trip preserves parameters and config") {
  Rng rng(99);
  ParameterStore store;
  store.create("emb/entities", {5, 3}, rng);
  store.create("head/w", {3}, rng);
  std::map<std::string, std::string> config{{"dim", "16"}, {"seed", "7"}};
  const auto path = temp_file("roundtrip");
  save_checkpoint(store, config, path);

  std::map<std::string, std::string> loaded_config;
  auto loaded = load_checkpoint(path, loaded_config);
  CHECK(loaded_config == config);
  REQUIRE(loaded.names() == store.names());
  for (const auto& name : store.names())
    CHECK(loaded.get(name)->value.data() == store.get(name)->value.data());

  // byte-identical re-save (deterministic container)
  const auto path2 = temp_file("roundtrip2");
  save_checkpoint(loaded, loaded_config, path2);
  CHECK(read_bytes(path) == read_bytes(path2));
  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("corrupt checkpoints raise integrity errors naming the failure point") {
  Rng rng(5);
  ParameterStore store;
  store.create("alpha", {2, 2}, rng);
  store.create("beta", {4}, rng);
  const auto path = temp_file("corrupt");
  save_checkpoint(store, {{"k", "v"}}, path);
  const std::string good = read_bytes(path);
  std::map<std::string, std::string> cfg;

  SUBCASE("truncation inside a parameter record") {
    write_bytes(path, good.substr(0, good.size() - 40));
    try {
      load_checkpoint(path, cfg);
      FAIL("expected integrity error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::integrity);
      CHECK(std::string(e.what()).find("beta") != std::string::npos);
    }
  }
  SUBCASE("missing footer") {
    write_bytes(path, good.substr(0, good.size() - 3));
    try {
      load_checkpoint(path, cfg);
      FAIL("expected integrity error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("footer") != std::string::npos);
    }
  }
  SUBCASE("bad magic") {
    std::string bad = good;
    bad[0] = 'X';
    write_bytes(path, bad);
    CHECK_THROWS_WITH_AS(load_checkpoint(path, cfg), doctest::Contains("magic"), Error);
  }
  fs::remove(path);
}

TEST_CASE("resume with a different vocabulary size fails with a shape error") {
  Rng rng(3);
  ParameterStore store;
  store.create("emb/entities", {4, 2}, rng);
  const auto path = temp_file("mismatch");
  save_checkpoint(store, {}, path);
  std::map<std::string, std::string> cfg;
  auto loaded = load_checkpoint(path, cfg);
  Rng rng2(3);
  try {
    loaded.create("emb/entities", {6, 2}, rng2);  // model built over a larger vocab
    FAIL("expected shape mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::integrity);
    CHECK(std::string(e.what()).find("emb/entities") != std::string::npos);
  }
  fs::remove(path);
}
