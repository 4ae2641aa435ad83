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

#ifndef UKAT_EVALUATE_H_
#define UKAT_EVALUATE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ukat/inference.h"
#include "ukat/labels.h"
#include "ukat/metrics.h"
#include "ukat/training.h"

namespace ukat {

enum class EvalTask { kKws, kAt, kNeg };

const char* EvalTaskName(EvalTask task);
EvalTask ParseEvalTask(const std::string& name);

// Model outputs for an evaluation set, computed once and reused for every
// threshold. kws and at score whole clips; neg scores fixed-length chunks.
struct ScoredSet {
  EvalTask task = EvalTask::kKws;
  int outputs = 0;
  std::vector<float> scores;              // [items, outputs]
  std::vector<int> references;            // kws: reference index per item
  std::vector<std::uint8_t> labels;       // at: multi-hot [items, outputs]

  std::size_t size() const { return outputs == 0 ? 0 : scores.size() / outputs; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(scores).subspan(i * outputs, outputs);
  }
};

ScoredSet ScoreEntries(Predictor& predictor, std::span<const ManifestEntry> entries,
                       AudioStore& audio, EvalTask task, double chunk_seconds = 1.0);

EvalReport Summarize(const ScoredSet& set, const LabelVocabulary& vocab,
                     const DecisionConfig& decision, const std::string& dataset);

// One row per threshold in [lo, hi]: gamma, keyword fire rate and the task
// metric (accuracy for kws, rejection rate for neg).
std::string GammaSweepCsv(const ScoredSet& set, const LabelVocabulary& vocab, double lo,
                          double hi, double step);

}  // namespace ukat

#endif  // UKAT_EVALUATE_H_
