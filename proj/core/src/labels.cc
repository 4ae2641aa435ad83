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

#include "ukat/labels.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ukat/error.h"

namespace ukat {

namespace {

constexpr const char* kSeparator = "#---";

void CheckUnique(const std::vector<std::string>& names, const char* block) {
  std::set<std::string> seen;
  for (const auto& n : names) {
    Require(!n.empty(), ErrorKind::kVocabulary, std::string("empty label name in ") + block);
    Require(seen.insert(n).second, ErrorKind::kVocabulary,
            std::string("duplicate label '") + n + "' in " + block + " block");
  }
}

}  // namespace

LabelVocabulary LabelVocabulary::Merge(std::vector<std::string> at_labels,
                                       std::vector<std::string> kws_labels) {
  Require(!at_labels.empty(), ErrorKind::kVocabulary, "AT label block is empty");
  LabelVocabulary v = Partial(std::move(at_labels), std::move(kws_labels));
  Require(v.has_speech(), ErrorKind::kVocabulary, "AT labels must contain \"Speech\"");
  return v;
}

LabelVocabulary LabelVocabulary::Partial(std::vector<std::string> at_labels,
                                         std::vector<std::string> kws_labels) {
  CheckUnique(at_labels, "AT");
  CheckUnique(kws_labels, "keyword");

  LabelVocabulary v;
  v.at_labels_ = std::move(at_labels);
  v.kws_labels_ = std::move(kws_labels);
  for (int i = 0; i < v.num_at(); ++i) v.index_.emplace(v.at_labels_[i], i);
  for (int k = 0; k < v.num_kws(); ++k) {
    const auto& name = v.kws_labels_[k];
    Require(v.index_.emplace(name, v.num_at() + k).second, ErrorKind::kCollision,
            "keyword '" + name + "' collides with an AT label");
  }
  auto speech = v.index_.find(kSpeechLabel);
  if (speech != v.index_.end() && speech->second < v.num_at()) {
    v.speech_index_ = speech->second;
  }
  return v;
}

std::vector<std::string> LabelVocabulary::names() const {
  std::vector<std::string> all = at_labels_;
  all.insert(all.end(), kws_labels_.begin(), kws_labels_.end());
  return all;
}

const std::string& LabelVocabulary::name(int index) const {
  Require(index >= 0 && index < size(), ErrorKind::kArgument,
          "label index " + std::to_string(index) + " out of range");
  return index < num_at() ? at_labels_[index] : kws_labels_[index - num_at()];
}

std::optional<int> LabelVocabulary::Find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int LabelVocabulary::IndexOf(const std::string& name) const {
  auto idx = Find(name);
  if (!idx) Fail(ErrorKind::kVocabulary, "unknown label '" + name + "'");
  return *idx;
}

std::string LabelVocabulary::Serialize() const {
  std::string out;
  for (const auto& n : at_labels_) out += n + "\n";
  out += std::string(kSeparator) + "\n";
  for (const auto& n : kws_labels_) out += n + "\n";
  return out;
}

LabelVocabulary LabelVocabulary::Parse(const std::string& text, bool strict) {
  std::vector<std::string> at, kws;
  bool in_kws = false;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == kSeparator) {
      Require(!in_kws, ErrorKind::kVocabulary, "vocabulary has two separator lines");
      in_kws = true;
      continue;
    }
    if (line.empty()) continue;
    (in_kws ? kws : at).push_back(line);
  }
  return strict ? Merge(std::move(at), std::move(kws)) : Partial(std::move(at), std::move(kws));
}

void LabelVocabulary::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot write vocabulary: " + path);
  out << Serialize();
}

LabelVocabulary LabelVocabulary::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open vocabulary: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str());
}

const char* SourceName(SourceKind source) {
  return source == SourceKind::kKws ? "kws" : "at";
}

SourceKind ParseSource(const std::string& name) {
  if (name == "kws") return SourceKind::kKws;
  if (name == "at") return SourceKind::kAt;
  Fail(ErrorKind::kFormat, "source must be \"kws\" or \"at\", got \"" + name + "\"");
}

namespace {

ManifestEntry EntryFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("line is not a JSON object");
  ManifestEntry e;
  e.audio = j.at("audio").get<std::string>();
  if (e.audio.empty()) throw std::invalid_argument("empty audio path");
  e.labels = j.value("labels", std::vector<std::string>{});
  if (j.contains("soft") && !j["soft"].is_null()) {
    for (const auto& [name, score] : j["soft"].items()) {
      const double s = score.get<double>();
      if (!(s >= 0.0 && s <= 1.0)) {
        throw std::invalid_argument("soft score for '" + name + "' outside [0,1]");
      }
      e.soft[name] = s;
    }
  }
  e.split = j.value("split", std::string{});
  e.source = ParseSource(j.value("source", std::string{"at"}));
  return e;
}

}  // namespace

std::vector<ManifestEntry> ParseManifestText(const std::string& text) {
  std::vector<ManifestEntry> entries;
  std::istringstream in(text);
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      entries.push_back(EntryFromJson(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw FormatError(std::string("malformed manifest line: ") + e.what(), line_no);
    }
  }
  return entries;
}

std::vector<ManifestEntry> ParseManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open manifest: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::vector<ManifestEntry> entries;
  try {
    entries = ParseManifestText(ss.str());
  } catch (const FormatError& e) {
    throw e.WithContext(path);
  }
  // Relative audio paths are taken relative to the manifest itself.
  const std::filesystem::path dir = std::filesystem::path(path).parent_path();
  for (auto& e : entries) {
    const std::filesystem::path audio(e.audio);
    if (audio.is_relative()) e.audio = (dir / audio).lexically_normal().string();
  }
  return entries;
}

std::string ManifestLine(const ManifestEntry& entry) {
  nlohmann::json j;
  j["audio"] = entry.audio;
  j["labels"] = entry.labels;
  if (!entry.soft.empty()) j["soft"] = entry.soft;
  j["split"] = entry.split;
  j["source"] = SourceName(entry.source);
  return j.dump();
}

void WriteManifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot write manifest: " + path);
  for (const auto& e : entries) out << ManifestLine(e) << "\n";
}

SoftLabelVector EncodeTargets(const ManifestEntry& entry, const LabelVocabulary& vocab,
                              const EncodeOptions& options) {
  SoftLabelVector y(vocab.size(), 0.0f);
  auto resolve = [&](const std::string& name) {
    auto idx = vocab.Find(name);
    if (!idx) {
      Fail(ErrorKind::kEncoding,
           "label '" + name + "' of " + entry.audio + " is not in the vocabulary");
    }
    return *idx;
  };

  if (entry.source == SourceKind::kKws) {
    for (const auto& name : entry.labels) {
      if (name == kUnknownKeyword) {
        Require(vocab.has_speech(), ErrorKind::kEncoding, "vocabulary has no Speech label");
        y[vocab.speech_index()] = 1.0f;
        continue;
      }
      const int idx = resolve(name);
      y[idx] = 1.0f;
      if (vocab.IsKeyword(idx) && options.speech_on_target && vocab.has_speech()) {
        y[vocab.speech_index()] = 1.0f;
      }
    }
    return y;
  }

  if (!entry.soft.empty()) {
    for (const auto& [name, score] : entry.soft) {
      Require(score >= 0.0 && score <= 1.0, ErrorKind::kEncoding,
              "soft score for '" + name + "' outside [0,1]");
      y[resolve(name)] = static_cast<float>(score);
    }
    return y;
  }
  for (const auto& name : entry.labels) y[resolve(name)] = 1.0f;
  return y;
}

int ReferenceIndex(const ManifestEntry& entry, const LabelVocabulary& vocab) {
  Require(!entry.labels.empty(), ErrorKind::kEncoding, entry.audio + " has no labels");
  if (entry.source == SourceKind::kKws) {
    for (const auto& name : entry.labels) {
      if (name == kUnknownKeyword) continue;
      auto idx = vocab.Find(name);
      if (idx && vocab.IsKeyword(*idx)) return *idx;
    }
    Require(vocab.has_speech(), ErrorKind::kEncoding, "vocabulary has no Speech label");
    return vocab.speech_index();
  }
  auto idx = vocab.Find(entry.labels.front());
  if (!idx) Fail(ErrorKind::kEncoding, "label '" + entry.labels.front() + "' not in vocabulary");
  return *idx;
}

PredictionSlices SplitPrediction(std::span<const float> prediction,
                                 const LabelVocabulary& vocab) {
  Require(static_cast<int>(prediction.size()) == vocab.size(), ErrorKind::kShape,
          "prediction length " + std::to_string(prediction.size()) +
              " does not match vocabulary size " + std::to_string(vocab.size()));
  return {prediction.first(vocab.num_at()), prediction.subspan(vocab.num_at())};
}

}  // namespace ukat
