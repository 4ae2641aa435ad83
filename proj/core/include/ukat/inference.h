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

#ifndef UKAT_INFERENCE_H_
#define UKAT_INFERENCE_H_

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ukat/audio.h"
#include "ukat/labels.h"

namespace ukat {

enum class Branch { kKws, kAt };

const char* BranchName(Branch branch);

// Single-label output. A kws branch always points into the keyword block;
// an at branch on a model without AT outputs carries index -1 (rejection).
struct Decision {
  int index = -1;
  Branch branch = Branch::kAt;
  double score = 0.0;
  bool suppressed = false;  // conditional wake-up vetoed a keyword

  bool operator==(const Decision&) const = default;
};

struct DecisionConfig {
  double gamma = 0.4;
  // Conditional wake-up: a keyword only passes when some label in
  // `condition` scores at least `condition_threshold`.
  std::vector<std::string> condition;
  double condition_threshold = 0.5;

  void Validate() const;
};

// Non-overlapping windows of round(seconds * rate) samples; a trailing
// remainder becomes a final zero-padded chunk. Empty input yields no chunks.
std::vector<Waveform> ChunkAudio(const Waveform& w, double seconds);

// Keyword branch iff max(keyword scores) >= gamma, else the AT argmax. Ties
// go to the lowest index.
Decision Decide(std::span<const float> prediction, const LabelVocabulary& vocab,
                const DecisionConfig& config);

// Decide() followed by the condition veto; a vetoed keyword falls back to
// the AT argmax with `suppressed` set.
Decision ConditionalDecide(std::span<const float> prediction, const LabelVocabulary& vocab,
                           const DecisionConfig& config);

struct TagCriterion {
  std::optional<double> threshold;  // keep scores >= threshold
  std::optional<int> top_n;         // keep the n best
};

// AT-block labels meeting the criterion, best first.
std::vector<std::pair<std::string, double>> TagEvents(std::span<const float> prediction,
                                                      const LabelVocabulary& vocab,
                                                      const TagCriterion& criterion);

}  // namespace ukat

#endif  // UKAT_INFERENCE_H_
