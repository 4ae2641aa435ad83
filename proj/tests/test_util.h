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

#ifndef UKAT_TESTS_TEST_UTIL_H_
#define UKAT_TESTS_TEST_UTIL_H_

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ukat/frontend.h"
#include "ukat/labels.h"
#include "ukat/model.h"

namespace ukat::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ukat_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline LabelVocabulary SmallVocab() {
  return LabelVocabulary::Merge({"Speech", "Dog", "Music"}, {"yes", "no"});
}

// Non-trivial normalization statistics so eval-mode checks exercise them.
inline void PerturbBatchNorm(Model* m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& t : m->tensors) {
    const auto ends_with = [&](const std::string& suffix) {
      return t.name.size() >= suffix.size() &&
             t.name.compare(t.name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".running_var")) {
      for (auto& v : t.data) v = static_cast<float>(1.0 + u(rng));
    } else if (ends_with(".running_mean") || (t.name.rfind("classifier", 0) != 0 && ends_with(".bias"))) {
      for (auto& v : t.data) v = static_cast<float>(u(rng));
    } else if (ends_with("bn.weight")) {
      for (auto& v : t.data) v = static_cast<float>(1.0 + u(rng));
    } else if (t.name == "classifier.bias") {
      for (auto& v : t.data) v = static_cast<float>(u(rng));
    }
  }
}

inline std::vector<float> RandomFeatures(int frames, int mels, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<float> v(static_cast<std::size_t>(frames) * mels);
  for (auto& x : v) x = static_cast<float>(g(rng));
  return v;
}

inline LogMelSpectrogram RandomSpectrogram(int frames, int mels, std::mt19937_64& rng) {
  LogMelSpectrogram s;
  s.frames = frames;
  s.n_mels = mels;
  s.values = RandomFeatures(frames, mels, rng);
  return s;
}

}  // namespace ukat::testing

#endif  // UKAT_TESTS_TEST_UTIL_H_
