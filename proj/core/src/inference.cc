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

#include "ukat/inference.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ukat/error.h"

namespace ukat {

const char* BranchName(Branch branch) { return branch == Branch::kKws ? "kws" : "at"; }

void DecisionConfig::Validate() const {
  Require(gamma >= 0.0 && gamma <= 1.0, ErrorKind::kConfig, "gamma must lie in [0, 1]");
  Require(condition_threshold >= 0.0 && condition_threshold <= 1.0, ErrorKind::kConfig,
          "condition threshold must lie in [0, 1]");
}

std::vector<Waveform> ChunkAudio(const Waveform& w, double seconds) {
  Require(seconds > 0.0, ErrorKind::kArgument, "chunk length must be positive");
  const auto len = static_cast<std::size_t>(std::llround(seconds * w.sample_rate));
  Require(len > 0, ErrorKind::kArgument, "chunk length rounds to zero samples");
  std::vector<Waveform> chunks;
  for (std::size_t start = 0; start < w.samples.size(); start += len) {
    Waveform c;
    c.sample_rate = w.sample_rate;
    c.samples.assign(len, 0.0f);
    const std::size_t n = std::min(len, w.samples.size() - start);
    std::copy_n(w.samples.begin() + static_cast<std::ptrdiff_t>(start), n, c.samples.begin());
    chunks.push_back(std::move(c));
  }
  return chunks;
}

namespace {

// First index of the maximum; -1 for an empty span.
int ArgMax(std::span<const float> v) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(v.size()); ++i) {
    if (best < 0 || v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

Decision Decide(std::span<const float> prediction, const LabelVocabulary& vocab,
                const DecisionConfig& config) {
  config.Validate();
  const PredictionSlices s = SplitPrediction(prediction, vocab);
  Decision d;
  const int k = ArgMax(s.kws);
  if (k >= 0 && s.kws[k] >= config.gamma) {
    d.branch = Branch::kKws;
    d.index = vocab.num_at() + k;
    d.score = s.kws[k];
    return d;
  }
  d.branch = Branch::kAt;
  d.index = ArgMax(s.at);
  d.score = d.index >= 0 ? s.at[d.index] : 0.0;
  return d;
}

Decision ConditionalDecide(std::span<const float> prediction, const LabelVocabulary& vocab,
                           const DecisionConfig& config) {
  std::vector<int> condition;
  for (const auto& name : config.condition) {
    const auto idx = vocab.Find(name);
    Require(idx.has_value() && !vocab.IsKeyword(*idx), ErrorKind::kConfig,
            "condition label '" + name + "' is not a sound-event label");
    condition.push_back(*idx);
  }
  Decision d = Decide(prediction, vocab, config);
  if (d.branch != Branch::kKws || condition.empty()) return d;
  double best = -std::numeric_limits<double>::infinity();
  for (int i : condition) best = std::max(best, static_cast<double>(prediction[i]));
  if (best >= config.condition_threshold) return d;
  const PredictionSlices s = SplitPrediction(prediction, vocab);
  Decision fallback;
  fallback.branch = Branch::kAt;
  fallback.index = ArgMax(s.at);
  fallback.score = fallback.index >= 0 ? s.at[fallback.index] : 0.0;
  fallback.suppressed = true;
  return fallback;
}

std::vector<std::pair<std::string, double>> TagEvents(std::span<const float> prediction,
                                                      const LabelVocabulary& vocab,
                                                      const TagCriterion& criterion) {
  Require(criterion.threshold.has_value() || criterion.top_n.has_value(), ErrorKind::kArgument,
          "tagging needs a threshold or a top-n count");
  if (criterion.threshold) {
    Require(*criterion.threshold >= 0.0 && *criterion.threshold <= 1.0, ErrorKind::kArgument,
            "tag threshold must lie in [0, 1]");
  }
  if (criterion.top_n) {
    Require(*criterion.top_n >= 1, ErrorKind::kArgument, "top-n must be at least 1");
  }
  const PredictionSlices s = SplitPrediction(prediction, vocab);
  std::vector<int> order(s.at.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return s.at[a] > s.at[b]; });
  std::vector<std::pair<std::string, double>> out;
  for (int i : order) {
    if (criterion.top_n && static_cast<int>(out.size()) >= *criterion.top_n) break;
    if (criterion.threshold && s.at[i] < *criterion.threshold) break;
    out.emplace_back(vocab.name(i), s.at[i]);
  }
  return out;
}

}  // namespace ukat
