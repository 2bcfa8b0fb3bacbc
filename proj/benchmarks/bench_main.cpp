#include <benchmark/benchmark.h>

#include "tkgr/autodiff.hpp"
#include "tkgr/rng.hpp"

namespace ad = tkgr::ad;
using tkgr::Rng;
using tkgr::Tensor;

static Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = rng.uniform(-0.5, 0.5);
  return t;
}

static void BM_matvec_forward_backward(benchmark::State& state) {
  Rng rng(1);
  std::size_t n = static_cast<std::size_t>(state.range(0));
  ad::Var W = ad::leaf(random_tensor({n, n}, rng));
  ad::Var x = ad::leaf(random_tensor({n}, rng));
  for (auto _ : state) {
    ad::Var loss = ad::sum(ad::tanh_(ad::matvec(W, x)));
    auto grads = ad::backward(loss);
    benchmark::DoNotOptimize(ad::grad_of(grads, W));
  }
}
BENCHMARK(BM_matvec_forward_backward)->Arg(64)->Arg(200);

BENCHMARK_MAIN();
