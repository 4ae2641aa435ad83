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

#ifndef UKAT_LABELS_H_
#define UKAT_LABELS_H_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ukat {

inline constexpr const char* kSpeechLabel = "Speech";
// Manifest name for non-target keywords; encodes as Speech.
inline constexpr const char* kUnknownKeyword = "unknown";

// Merged label space: the C sound-event labels occupy [0, C) and the K
// keywords occupy [C, C+K). The layout is frozen at construction.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;

  // Throws kVocabulary when "Speech" is absent or a block has duplicates,
  // kCollision when a keyword repeats an AT name.
  static LabelVocabulary Merge(std::vector<std::string> at_labels,
                               std::vector<std::string> kws_labels);

  // Relaxed construction for output-stripped models: the AT block may be
  // empty and "Speech" may be absent (speech_index() is then -1). Names
  // must still be unique.
  static LabelVocabulary Partial(std::vector<std::string> at_labels,
                                 std::vector<std::string> kws_labels);

  int num_at() const { return static_cast<int>(at_labels_.size()); }
  int num_kws() const { return static_cast<int>(kws_labels_.size()); }
  int size() const { return num_at() + num_kws(); }
  int speech_index() const { return speech_index_; }
  bool has_speech() const { return speech_index_ >= 0; }

  const std::vector<std::string>& at_labels() const { return at_labels_; }
  const std::vector<std::string>& kws_labels() const { return kws_labels_; }
  std::vector<std::string> names() const;
  const std::string& name(int index) const;

  std::optional<int> Find(const std::string& name) const;
  int IndexOf(const std::string& name) const;  // throws kVocabulary
  bool IsKeyword(int index) const { return index >= num_at(); }

  bool operator==(const LabelVocabulary& other) const {
    return at_labels_ == other.at_labels_ && kws_labels_ == other.kws_labels_;
  }

  // Plain text, one name per line, AT block first, "#---" before keywords.
  std::string Serialize() const;
  static LabelVocabulary Parse(const std::string& text, bool strict = true);
  void Save(const std::string& path) const;
  static LabelVocabulary Load(const std::string& path);

 private:
  std::vector<std::string> at_labels_;
  std::vector<std::string> kws_labels_;
  std::unordered_map<std::string, int> index_;
  int speech_index_ = -1;
};

enum class SourceKind { kKws, kAt };

const char* SourceName(SourceKind source);
SourceKind ParseSource(const std::string& name);

struct ManifestEntry {
  std::string audio;
  std::vector<std::string> labels;
  std::map<std::string, double> soft;  // empty when absent
  std::string split;
  SourceKind source = SourceKind::kAt;

  bool operator==(const ManifestEntry&) const = default;
};

// JSON Lines. Unknown fields are ignored; a malformed line raises a
// FormatError carrying its 1-based line number. ParseManifest resolves
// relative audio paths against the manifest directory.
std::vector<ManifestEntry> ParseManifest(const std::string& path);
std::vector<ManifestEntry> ParseManifestText(const std::string& text);
std::string ManifestLine(const ManifestEntry& entry);
void WriteManifest(const std::string& path, const std::vector<ManifestEntry>& entries);

struct EncodeOptions {
  // Target keywords also switch on Speech.
  bool speech_on_target = true;
};

using SoftLabelVector = std::vector<float>;

// Builds the multi-hot or soft training target of an entry.
SoftLabelVector EncodeTargets(const ManifestEntry& entry, const LabelVocabulary& vocab,
                              const EncodeOptions& options = {});

// Global index of the reference class for single-label evaluation: the
// keyword itself, Speech for non-target words, otherwise the first label.
int ReferenceIndex(const ManifestEntry& entry, const LabelVocabulary& vocab);

struct PredictionSlices {
  std::span<const float> at;
  std::span<const float> kws;
};

PredictionSlices SplitPrediction(std::span<const float> prediction,
                                 const LabelVocabulary& vocab);

}  // namespace ukat

#endif  // UKAT_LABELS_H_
