#include <benchmark/benchmark.h>

#include "dio/attacks.hpp"
#include "dio/losses.hpp"
#include "dio/model.hpp"
#include "dio/ortho_geometry.hpp"
#include "dio/sgd.hpp"

using namespace dio;

namespace {

Tensor uniform(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform();
  return t;
}

std::vector<int> labels(std::size_t n, std::size_t k) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % k);
  return y;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = uniform({n, n}, rng), b = uniform({n, n}, rng);
  for (auto _ : state) {
    Graph g(false);
    benchmark::DoNotOptimize(matmul(g.constant(a), g.constant(b)).value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  Tensor a = uniform({n, n}, rng);
  const Tensor b = uniform({n, n}, rng);
  a.set_requires_grad(true);
  for (auto _ : state) {
    Graph g;
    g.backward(sum(matmul(g.leaf(a), g.constant(b))));
    benchmark::DoNotOptimize(a.grad().data());
    a.clear_grad();
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(64);

void BM_Conv2d(benchmark::State& state) {
  Rng rng(3);
  Tensor x = uniform({16, 1, 28, 28}, rng);
  const Tensor w = uniform({8, 1, 3, 3}, rng);
  x.set_requires_grad(true);
  for (auto _ : state) {
    Graph g;
    g.backward(sum(conv2d(g.leaf(x), g.constant(w), Conv2dOptions{1, 1})));
    benchmark::DoNotOptimize(x.grad().data());
    x.clear_grad();
  }
}
BENCHMARK(BM_Conv2d);

DioModel synth_model(std::size_t heads) {
  ArchSpec arch;
  arch.heads = heads;
  arch.features = 128;
  return make_model(arch, 7);
}

void BM_PgdStep(benchmark::State& state) {
  const DioModel m = synth_model(4);
  Rng rng(4);
  const Tensor x = uniform({250, 20}, rng);
  const auto y = labels(250, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pgd(head_logits(m, 0), x, y, AttackSpec::pgd(0.05, 0.0125, 1)).x_adv.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 250);
}
BENCHMARK(BM_PgdStep);

void BM_AdaptA1(benchmark::State& state) {
  const DioModel m = synth_model(static_cast<std::size_t>(state.range(0)));
  Rng rng(5);
  const Tensor x = uniform({250, 20}, rng);
  const auto y = labels(250, 4);
  AttackSpec s = AttackSpec::pgd(0.05, 0.0125, 10);
  s.kind = AttackKind::adapt_a1;
  for (auto _ : state) benchmark::DoNotOptimize(adapt_a1(m, x, y, s).x_adv.data().data());
}
BENCHMARK(BM_AdaptA1)->Arg(4)->Arg(10);

void BM_Square(benchmark::State& state) {
  const DioModel m = synth_model(4);
  Rng rng(6);
  const Tensor x = uniform({250, 20}, rng);
  const auto y = labels(250, 4);
  AttackSpec s = default_attack(AttackKind::square_l2);
  s.iters = 100;
  for (auto _ : state) {
    Rng q(1);
    benchmark::DoNotOptimize(square_l2(random_head_query(m, q), x, y, s).x_adv.data().data());
  }
}
BENCHMARK(BM_Square);

void BM_TrainStep(benchmark::State& state) {
  DioModel m = synth_model(static_cast<std::size_t>(state.range(0)));
  Rng rng(7);
  const Tensor x = uniform({50, 20}, rng);
  const auto y = labels(50, 4);
  Sgd opt(0.01, 0.9, 5e-4);
  auto params = m.parameters();
  for (auto& p : params) p.set_requires_grad(true);
  for (auto _ : state) {
    Graph g;
    Objective obj = total_objective(g, m, g.constant(x), y, LossWeights{0.1, 0.1, 2.0});
    g.backward(obj.total);
    opt.step(params);
  }
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(4)->Arg(10);

void BM_LemmaSuite(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(lemma1_suite(d, {0.05, 0.1, 0.2}, 10000, 1).size());
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_LemmaSuite)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
