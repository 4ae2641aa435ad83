// Copyright (c) 2026 The ukat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "ukat/audio.h"
#include "ukat/frontend.h"
#include "ukat/labels.h"
#include "ukat/model.h"
#include "ukat/network.h"

namespace ukat {
namespace {

Waveform Noise(std::size_t n, int rate) {
  std::mt19937 rng(1);
  std::normal_distribution<float> g(0.0f, 0.1f);
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (auto& s : w.samples) s = g(rng);
  return w;
}

void BM_LogMel(benchmark::State& state) {
  const Waveform w = Noise(static_cast<std::size_t>(state.range(0)) * 16000, 16000);
  const LogMelExtractor ex{FrontendConfig{}};
  for (auto _ : state) benchmark::DoNotOptimize(ex.Extract(w));
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.SetLabel("seconds of audio");
}
BENCHMARK(BM_LogMel)->Arg(1)->Arg(10);

void BM_Resample(benchmark::State& state) {
  const int rate = static_cast<int>(state.range(0));
  const Waveform w = Noise(static_cast<std::size_t>(rate), rate);
  for (auto _ : state) benchmark::DoNotOptimize(Resample(w, 16000));
}
BENCHMARK(BM_Resample)->Arg(8000)->Arg(44100)->Arg(48000);

FeatureBatch<float> RandomBatch(int batch, int frames) {
  std::mt19937 rng(2);
  std::normal_distribution<float> g(-8.0f, 2.0f);
  FeatureBatch<float> b{batch, frames, 64, std::vector<float>(static_cast<std::size_t>(batch) * frames * 64),
                        std::vector<int>(batch, frames)};
  for (auto& v : b.values) v = g(rng);
  return b;
}

Model CompactModel() {
  const auto vocab = LabelVocabulary::Merge({"Speech", "Engine", "Siren", "Rain"}, {"alpha", "bravo", "charlie"});
  return BuildModel(ArchitectureConfig::Compact(vocab.size()), vocab, 3);
}

void BM_CompactForward(benchmark::State& state) {
  Network<float> net(CompactModel());
  const auto b = RandomBatch(static_cast<int>(state.range(0)), 97);
  for (auto _ : state) benchmark::DoNotOptimize(net.Forward(b, Mode::kEval).data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CompactForward)->Arg(1)->Arg(32);

void BM_CompactTrainStep(benchmark::State& state) {
  Network<float> net(CompactModel());
  const auto b = RandomBatch(static_cast<int>(state.range(0)), 97);
  const std::vector<float> grad(static_cast<std::size_t>(state.range(0)) * 7, 0.01f);
  for (auto _ : state) {
    net.ZeroGrads();
    net.Forward(b, Mode::kTrain);
    net.Backward(grad);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CompactTrainStep)->Arg(32);

void BM_ReferenceForward(benchmark::State& state) {
  std::vector<std::string> at{"Speech"};
  for (int i = 1; i < 527; ++i) at.push_back("event_" + std::to_string(i));
  const auto vocab = LabelVocabulary::Merge(at, {"yes", "no"});
  Network<float> net(BuildModel(ArchitectureConfig::Reference(vocab.size()), vocab, 3));
  const auto b = RandomBatch(1, 97);
  for (auto _ : state) benchmark::DoNotOptimize(net.Forward(b, Mode::kEval).data());
}
BENCHMARK(BM_ReferenceForward);

}  // namespace
}  // namespace ukat

BENCHMARK_MAIN();
