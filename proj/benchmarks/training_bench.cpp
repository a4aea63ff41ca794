#include <benchmark/benchmark.h>

#include "comm_arena/env.hpp"
#include "comm_arena/training.hpp"

using namespace comm_arena;

namespace {

void BM_EnvStep(benchmark::State& state) {
  const env::EnvConfig config;
  SeedStream rng(1);
  auto s = env::reset(config, rng);
  const env::JointAction a{env::Action::kPosX, env::Action::kNegY, env::Action::kPosY,
                           env::Action::kNegX};
  for (auto _ : state) {
    if (s.step == config.episode_length) s = env::reset(config, rng);
    s = env::step(s, a, config).next_state;
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_EnvStep);

void BM_Rollout(benchmark::State& state) {
  training::TrainingConfig config;
  config.mode = env::Mode::kPublicComm;
  const auto trainer = training::make_trainer(config, env::EnvConfig{});
  SeedStream rng(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(training::run_episodes(trainer, state.range(0), 0.1, rng));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Rollout)->Arg(1)->Arg(50)->Unit(benchmark::kMillisecond);

// One full epoch: 50 episodes, 8 minibatches, target sync.
void BM_TrainEpoch(benchmark::State& state) {
  training::TrainingConfig config;
  config.mode = static_cast<env::Mode>(state.range(0));
  auto trainer = training::make_trainer(config, env::EnvConfig{});
  for (auto _ : state) {
    benchmark::DoNotOptimize(training::train_epoch(trainer));
  }
  state.SetLabel(std::string(env::to_string(config.mode)));
}
BENCHMARK(BM_TrainEpoch)
    ->Arg(static_cast<int>(env::Mode::kNoComm))
    ->Arg(static_cast<int>(env::Mode::kPrivateComm))
    ->Unit(benchmark::kMillisecond);

}  // namespace
