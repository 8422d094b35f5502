#include <benchmark/benchmark.h>

#include <vector>

#include "delusive/analytic.hpp"
#include "delusive/attacks.hpp"
#include "delusive/data.hpp"
#include "delusive/models.hpp"
#include "delusive/numerics.hpp"
#include "delusive/training.hpp"
#include "delusive/wasserstein.hpp"

using namespace delusive;

namespace {

Dataset bench_dataset(std::size_t n, std::size_t d) {
  const GaussianMixtureSpec spec{0.05, 1.0, d, MixtureVariant::Original};
  Rng rng(1);
  return sample_mixture(spec, n, rng);
}

Model bench_mlp(std::size_t dim, std::size_t hidden) {
  Rng rng(2);
  return Model(make_mlp(dim, hidden, 2, rng));
}

ThreatBall bench_ball(double radius) {
  ThreatBall ball;
  ball.norm = NormKind::Linf;
  ball.radius = radius;
  return ball;
}

void BM_std_normal_cdf(benchmark::State& state) {
  double x = -8.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(std_normal_cdf(x));
    x = x >= 8.0 ? -8.0 : x + 1e-3;
  }
}
BENCHMARK(BM_std_normal_cdf);

void BM_sample_mixture(benchmark::State& state) {
  const GaussianMixtureSpec spec{0.05, 1.0, static_cast<std::size_t>(state.range(0)),
                                 MixtureVariant::Original};
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(sample_mixture(spec, 256, rng));
}
BENCHMARK(BM_sample_mixture)->Arg(50)->Arg(500);

void BM_batch_loss_and_grads(benchmark::State& state) {
  const Dataset ds = bench_dataset(128, static_cast<std::size_t>(state.range(0)));
  const Model model = bench_mlp(ds.dim(), 64);
  Grads grads = zero_grads_like(model);
  Matrix input_grads(ds.size(), ds.dim());
  for (auto _ : state)
    benchmark::DoNotOptimize(batch_loss_and_grads(model, ds.features, ds.labels,
                                                  LossKind::CrossEntropy, &grads, &input_grads));
}
BENCHMARK(BM_batch_loss_and_grads)->Arg(50)->Arg(200);

void BM_pgd_batch(benchmark::State& state) {
  const Dataset ds = bench_dataset(128, 50);
  const Model model = bench_mlp(ds.dim(), 64);
  const ThreatBall ball = bench_ball(0.1);
  Rng rng(4);
  for (auto _ : state)
    benchmark::DoNotOptimize(pgd_maximize_batch(model, ds.features, ds.labels, ball,
                                                static_cast<std::size_t>(state.range(0)), 0.02,
                                                rng));
}
BENCHMARK(BM_pgd_batch)->Arg(7)->Arg(20);

void BM_attack_p1(benchmark::State& state) {
  const Dataset ds = bench_dataset(static_cast<std::size_t>(state.range(0)), 50);
  const Model model = bench_mlp(ds.dim(), 64);
  AttackConfig cfg = default_attack_config(AttackKind::P1, bench_ball(0.1));
  cfg.steps = 10;
  cfg.target_map = cyclic_target_map(ds.class_count);
  for (auto _ : state) benchmark::DoNotOptimize(attack_p1(ds, model, cfg));
}
BENCHMARK(BM_attack_p1)->Arg(128)->Arg(512);

void BM_exact_winf(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Dataset a = bench_dataset(n, 10);
  Dataset b = a;
  Rng rng(5);
  for (std::size_t i = 0; i < b.features.size(); ++i) b.features.data()[i] += rng.uniform(-0.1, 0.1);
  const CostSpec cost{NormKind::Linf};
  for (auto _ : state) benchmark::DoNotOptimize(exact_winf(a, b, cost));
}
BENCHMARK(BM_exact_winf)->Arg(64)->Arg(256);

void BM_figure2_curves(benchmark::State& state) {
  std::vector<std::size_t> grid;
  for (std::size_t d = 1; d <= 100000; d *= 10) grid.push_back(d);
  for (auto _ : state) benchmark::DoNotOptimize(figure2_curves(0.01, 1.0, grid));
}
BENCHMARK(BM_figure2_curves);

void BM_train_epoch(benchmark::State& state) {
  const Dataset ds = bench_dataset(1024, 50);
  const Model start = bench_mlp(ds.dim(), 64);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch = 128;
  cfg.lr.decay_epochs = {};
  cfg.seed = 6;
  for (auto _ : state) benchmark::DoNotOptimize(train(start, ds, cfg));
}
BENCHMARK(BM_train_epoch);

}  // namespace

BENCHMARK_MAIN();
