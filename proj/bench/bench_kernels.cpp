// Serial reference kernels against their OpenMP counterparts. Run with
// OMP_NUM_THREADS set to compare thread counts.

#include <map>
#include <random>

#include <benchmark/benchmark.h>

#include "vmb/collision.hpp"
#include "vmb/nonlinear.hpp"

using namespace vmb;

namespace {

CollisionKernel kernel() {
  CollisionKernel k;
  k.gamma = -1.0;
  k.angular_nodes = 16;
  return k;
}

const VelocityGrid& grid(int n) {
  static std::map<int, VelocityGrid> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_velocity_grid(n, 6.0)).first;
  return it->second;
}

std::vector<double> perturbed_maxwellian(const VelocityGrid& g) {
  std::vector<double> F(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) F[i] = g.maxwellian[i] * (1.0 + 0.2 * g.nodes[i][0]);
  return F;
}

SpeciesPair random_pair(std::size_t nx, const VelocityGrid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  SpeciesPair f(nx, g.size());
  for (auto& x : f.values()) x = 1e-2 * N(rng);
  return f;
}

void BM_QBilinear(benchmark::State& state) {
  const auto& g = grid(static_cast<int>(state.range(0)));
  const auto F = perturbed_maxwellian(g);
  const auto k = kernel();
  for (auto _ : state) benchmark::DoNotOptimize(q_bilinear(F, F, k, g));
}

void BM_QBilinearSerial(benchmark::State& state) {
  const auto& g = grid(static_cast<int>(state.range(0)));
  const auto F = perturbed_maxwellian(g);
  const auto k = kernel();
  for (auto _ : state) benchmark::DoNotOptimize(serial::q_bilinear(F, F, k, g));
}

void BM_AssembleRaw(benchmark::State& state) {
  const auto& g = grid(static_cast<int>(state.range(0)));
  const auto k = kernel();
  for (auto _ : state) benchmark::DoNotOptimize(assemble_raw(k, g));
}

void BM_AssembleRawSerial(benchmark::State& state) {
  const auto& g = grid(static_cast<int>(state.range(0)));
  const auto k = kernel();
  for (auto _ : state) benchmark::DoNotOptimize(serial::assemble_raw(k, g));
}

// Nonlinear term on a 4x4 spatial grid: tensor-backed OpenMP operator,
// direct-quadrature OpenMP fallback and the serial reference.
void BM_NonlinearTensor(benchmark::State& state) {
  const auto& g = grid(static_cast<int>(state.range(0)));
  const NonlinearOperator op(kernel(), g);
  const auto f = random_pair(16, g, 1), h = random_pair(16, g, 2);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(f, h));
}

void BM_NonlinearDirect(benchmark::State& state) {
  const auto& g = grid(static_cast<int>(state.range(0)));
  NonlinearOptions opt;
  opt.tensor_bytes_cap = 0;
  const NonlinearOperator op(kernel(), g, opt);
  const auto f = random_pair(16, g, 1), h = random_pair(16, g, 2);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(f, h));
}

void BM_NonlinearSerial(benchmark::State& state) {
  const auto& g = grid(static_cast<int>(state.range(0)));
  const auto f = random_pair(16, g, 1), h = random_pair(16, g, 2);
  const auto k = kernel();
  for (auto _ : state) benchmark::DoNotOptimize(serial::nonlinear_T(f, h, k, g));
}

}  // namespace

BENCHMARK(BM_QBilinear)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_QBilinearSerial)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssembleRaw)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssembleRawSerial)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NonlinearTensor)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NonlinearDirect)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NonlinearSerial)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
