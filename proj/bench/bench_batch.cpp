#include "rpb/bptt.hpp"
#include "rpb/train.hpp"

#include <benchmark/benchmark.h>

namespace {

struct Fixture {
  rpb::TrainProblem problem = rpb::TrainProblem::nominal("corridor");
  rpb::BoostOperator m;
  std::vector<rpb::Sample> samples;
  std::vector<std::size_t> indices;

  explicit Fixture(rpb::Index count) {
    std::mt19937_64 rng(3);
    m = rpb::BoostOperator::random(problem.boost, 1e-2, rng);
    samples = rpb::draw_samples(problem, count, 200, rpb::ReferenceMode::kSampled, {}, rng);
    for (std::size_t i = 0; i < samples.size(); ++i) indices.push_back(i);
  }
};

void BM_BatchGradientSerial(benchmark::State& state) {
  Fixture f(state.range(0));
  const rpb::Loss loss = f.problem.make_loss();
  for (auto _ : state) {
    benchmark::DoNotOptimize(rpb::batch_gradient_serial(f.problem.plant, f.problem.model, f.m, loss, f.samples, f.indices));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BatchGradientParallel(benchmark::State& state) {
  Fixture f(state.range(0));
  const rpb::Loss loss = f.problem.make_loss();
  for (auto _ : state) {
    benchmark::DoNotOptimize(rpb::batch_gradient_parallel(f.problem.plant, f.problem.model, f.m, loss, f.samples, f.indices));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BatchLossSerial(benchmark::State& state) {
  Fixture f(state.range(0));
  const rpb::Loss loss = f.problem.make_loss();
  for (auto _ : state) {
    benchmark::DoNotOptimize(rpb::batch_loss_serial(f.problem.plant, f.problem.model, f.m, loss, f.samples));
  }
}

void BM_BatchLossParallel(benchmark::State& state) {
  Fixture f(state.range(0));
  const rpb::Loss loss = f.problem.make_loss();
  for (auto _ : state) {
    benchmark::DoNotOptimize(rpb::batch_loss_parallel(f.problem.plant, f.problem.model, f.m, loss, f.samples));
  }
}

}  // namespace

BENCHMARK(BM_BatchGradientSerial)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradientParallel)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchLossSerial)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchLossParallel)->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
