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

#ifndef UKAT_TRAINING_H_
#define UKAT_TRAINING_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ukat/audio.h"
#include "ukat/frontend.h"
#include "ukat/labels.h"
#include "ukat/model.h"
#include "ukat/network.h"

namespace ukat {

using Rng = std::mt19937_64;

struct TrainConfig {
  double crop_seconds = 1.0;
  // Clip length used when random cropping is disabled; keyword clips are
  // zero-padded up to it.
  double uncropped_seconds = 10.0;
  int batch_size = 64;
  int max_epochs = 500;
  double learning_rate = 1e-3;
  std::string lr_schedule = "constant";  // "constant" | "cosine"
  std::uint64_t seed = 0;
  bool random_crop = true;
  bool psl = true;
  bool speech_on_target = true;
  int top_k = 4;

  void Validate() const;
};

// TOML-style `key = value` lines; '#' starts a comment. Unknown keys raise a
// kConfig error naming the line.
TrainConfig ParseTrainConfig(const std::string& text, TrainConfig base = {});
TrainConfig LoadTrainConfig(const std::string& path, TrainConfig base = {});
std::string FormatTrainConfig(const TrainConfig& cfg);

// Contiguous window of round(seconds * rate) samples starting uniformly at
// random; shorter inputs are zero-padded on the right.
Waveform RandomCrop(const Waveform& w, double seconds, Rng& rng);

// Zero-pads or truncates to exactly round(seconds * rate) samples.
Waveform FitToDuration(const Waveform& w, double seconds);

// Right-pads every item to the longest one with `pad_value` frames.
FeatureBatch<float> PadBatch(std::span<const LogMelSpectrogram> items, float pad_value);
std::vector<LogMelSpectrogram> UnpadBatch(const FeatureBatch<float>& batch);

struct BceResult {
  double loss = 0.0;
  std::vector<double> grad;  // d(loss)/d(logits)
};

// Mean binary cross-entropy over all elements, in the stable logit form
// max(z,0) - z*y + log(1 + exp(-|z|)); grad = (sigmoid(z) - y) / N.
BceResult BceLoss(std::span<const double> logits, std::span<const double> targets);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;
};

// One bias-corrected Adam update over the tensors flagged trainable. A
// non-finite gradient aborts the step with kNumeric, leaving params and state
// untouched.
template <typename T>
void AdamStep(std::vector<std::vector<T>>& params, const std::vector<std::vector<T>>& grads,
              const std::vector<bool>& trainable, AdamState& state, const AdamOptions& options);

// Evaluation-mode model bundled with its feature extractor.
class Predictor {
 public:
  explicit Predictor(Model model);

  const Model& model() const { return model_; }
  const LabelVocabulary& vocab() const { return model_.vocab; }
  const LogMelExtractor& extractor() const { return extractor_; }

  // Sigmoid outputs for one clip (resampled to the model rate if needed).
  std::vector<float> Predict(const Waveform& w);
  std::vector<float> PredictFeatures(const LogMelSpectrogram& features);
  // Row-major [items, outputs].
  std::vector<float> PredictBatch(std::span<const LogMelSpectrogram> items);

 private:
  Model model_;
  LogMelExtractor extractor_;
  Network<float> net_;
};

// Machine annotator producing pseudo strong labels: its eval-mode outputs on a
// crop become the AT block of the student's target.
class PslTeacher {
 public:
  // Throws kConfig unless every AT label of `student_vocab` is a teacher output.
  PslTeacher(Model teacher, const LabelVocabulary& student_vocab);

  SoftLabelVector Generate(const Waveform& crop);
  const Model& model() const { return predictor_.model(); }

 private:
  Predictor predictor_;
  std::vector<int> gather_;  // teacher index for each student AT label
  int student_size_ = 0;
};

SoftLabelVector GeneratePsl(PslTeacher& teacher, const Waveform& crop);

struct CheckpointScore {
  int epoch = 0;
  double map = 0.0;
};

// Best `k` by validation mAP, descending; ties go to the earlier epoch.
std::vector<CheckpointScore> RankCheckpoints(std::span<const CheckpointScore> scores, int k);

// Loads and caches decoded audio, resampled to the frontend rate.
class AudioStore {
 public:
  explicit AudioStore(int sample_rate) : sample_rate_(sample_rate) {}
  const Waveform& Get(const std::string& path);
  int sample_rate() const { return sample_rate_; }

 private:
  int sample_rate_;
  std::vector<std::pair<std::string, std::unique_ptr<Waveform>>> cache_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TrainData {
  std::vector<ManifestEntry> kws;
  std::vector<ManifestEntry> at;
  std::vector<ManifestEntry> valid;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_map = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  Model final_model;
  std::vector<CheckpointScore> ranking;  // top-k, best first
  std::vector<Model> ranked_models;      // parallel to `ranking`
  std::vector<EpochStats> history;
  double initial_loss = 0.0;  // mean loss of the first ten steps
  bool diverged = false;
};

struct TrainOptions {
  // When set, checkpoints are written as <dir>/epoch_<n>.ukat alongside
  // <dir>/ranking.json; only the current top-k files are kept.
  std::string checkpoint_dir;
  PslTeacher* teacher = nullptr;
  std::function<void(const EpochStats&)> on_epoch;
};

// Validation mAP over the merged label space; keyword labels count as
// ordinary classes and classes without positives are skipped.
double ValidationMap(Predictor& predictor, std::span<const ManifestEntry> entries,
                     AudioStore& audio);

TrainResult Train(const TrainConfig& config, const Model& initial, const TrainData& data,
                  AudioStore& audio, const TrainOptions& options = {});

}  // namespace ukat

#endif  // UKAT_TRAINING_H_
