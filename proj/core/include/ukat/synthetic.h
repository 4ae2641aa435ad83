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

#ifndef UKAT_SYNTHETIC_H_
#define UKAT_SYNTHETIC_H_

#include <cstdint>
#include <string>
#include <vector>

#include "ukat/audio.h"
#include "ukat/labels.h"

namespace ukat {

// Desk-scale stand-in for a keyword corpus plus a sound-event corpus.
// Keywords are fixed harmonic contours placed in short noisy clips; "unknown"
// words are random contours and play the role of Speech; sound events are
// stationary textures occupying part of a long clip.
struct SyntheticSpec {
  int num_keywords = 3;
  int num_events = 4;  // includes Speech
  int train_per_class = 60;
  int valid_per_class = 10;
  int eval_per_class = 40;
  int negative_streams = 20;
  double kws_min_seconds = 0.8;
  double kws_max_seconds = 1.0;
  double at_seconds = 10.0;
  double negative_seconds = 10.0;
  double noise_level = 0.02;
  std::uint64_t seed = 0;
  int sample_rate = 16000;

  void Validate() const;
};

inline constexpr int kMaxSyntheticKeywords = 6;
inline constexpr int kMaxSyntheticTextures = 6;

// Label names used by the generator.
LabelVocabulary SyntheticVocabulary(const SyntheticSpec& spec);

struct SyntheticDataset {
  LabelVocabulary vocab;
  std::string vocab_path;
  std::string train_kws;
  std::string train_at;
  std::string valid;
  std::string eval_kws;
  std::string eval_at;
  std::string eval_neg;
  std::size_t num_train_clips = 0;
};

// Writes WAV files under <dir>/audio and manifests/vocabulary under <dir>.
// Throws kIo if any output file already exists.
SyntheticDataset GenerateSyntheticDataset(const SyntheticSpec& spec, const std::string& dir);

// Individual clip synthesizers; `stream` selects an independent random
// stream, so a clip depends only on (seed, class, stream).
Waveform SynthesizeKeyword(const SyntheticSpec& spec, int keyword, std::uint64_t stream);
Waveform SynthesizeUnknownWord(const SyntheticSpec& spec, std::uint64_t stream);
Waveform SynthesizeEventClip(const SyntheticSpec& spec, int texture, std::uint64_t stream);
Waveform SynthesizeNegativeStream(const SyntheticSpec& spec, std::uint64_t stream);

}  // namespace ukat

#endif  // UKAT_SYNTHETIC_H_
