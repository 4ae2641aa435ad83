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

#include "ukat/training.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ukat/error.h"
#include "ukat/metrics.h"

namespace ukat {

void TrainConfig::Validate() const {
  Require(crop_seconds > 0.0, ErrorKind::kConfig, "crop_seconds must be positive");
  Require(uncropped_seconds > 0.0, ErrorKind::kConfig, "uncropped_seconds must be positive");
  Require(batch_size >= 1, ErrorKind::kConfig, "batch_size must be at least 1");
  Require(max_epochs >= 1, ErrorKind::kConfig, "max_epochs must be at least 1");
  Require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorKind::kConfig,
          "learning_rate must be positive");
  Require(lr_schedule == "constant" || lr_schedule == "cosine", ErrorKind::kConfig,
          "lr_schedule must be 'constant' or 'cosine'");
  Require(top_k >= 1, ErrorKind::kConfig, "top_k must be at least 1");
}

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool ParseBool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  Fail(ErrorKind::kConfig, where + ": expected a boolean, got '" + v + "'");
}

double ParseDouble(const std::string& v, const std::string& where) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  Require(used == v.size() && used > 0, ErrorKind::kConfig,
          where + ": expected a number, got '" + v + "'");
  return d;
}

long long ParseInt(const std::string& v, const std::string& where) {
  std::size_t used = 0;
  long long i = 0;
  try {
    i = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  Require(used == v.size() && used > 0, ErrorKind::kConfig,
          where + ": expected an integer, got '" + v + "'");
  return i;
}

}  // namespace

TrainConfig ParseTrainConfig(const std::string& text, TrainConfig cfg) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no);
    const auto eq = line.find('=');
    Require(eq != std::string::npos, ErrorKind::kConfig, where + ": expected key = value");
    const std::string key = Trim(line.substr(0, eq));
    std::string value = Trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key == "crop_seconds") {
      cfg.crop_seconds = ParseDouble(value, where);
    } else if (key == "uncropped_seconds") {
      cfg.uncropped_seconds = ParseDouble(value, where);
    } else if (key == "batch_size") {
      cfg.batch_size = static_cast<int>(ParseInt(value, where));
    } else if (key == "max_epochs") {
      cfg.max_epochs = static_cast<int>(ParseInt(value, where));
    } else if (key == "learning_rate") {
      cfg.learning_rate = ParseDouble(value, where);
    } else if (key == "lr_schedule") {
      cfg.lr_schedule = value;
    } else if (key == "seed") {
      const long long s = ParseInt(value, where);
      Require(s >= 0, ErrorKind::kConfig, where + ": seed must be non-negative");
      cfg.seed = static_cast<std::uint64_t>(s);
    } else if (key == "random_crop") {
      cfg.random_crop = ParseBool(value, where);
    } else if (key == "psl") {
      cfg.psl = ParseBool(value, where);
    } else if (key == "speech_on_target") {
      cfg.speech_on_target = ParseBool(value, where);
    } else if (key == "top_k") {
      cfg.top_k = static_cast<int>(ParseInt(value, where));
    } else {
      Fail(ErrorKind::kConfig, where + ": unknown key '" + key + "'");
    }
  }
  cfg.Validate();
  return cfg;
}

TrainConfig LoadTrainConfig(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseTrainConfig(ss.str(), std::move(base));
}

std::string FormatTrainConfig(const TrainConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "crop_seconds = " << cfg.crop_seconds << "\n"
     << "uncropped_seconds = " << cfg.uncropped_seconds << "\n"
     << "batch_size = " << cfg.batch_size << "\n"
     << "max_epochs = " << cfg.max_epochs << "\n"
     << "learning_rate = " << cfg.learning_rate << "\n"
     << "lr_schedule = \"" << cfg.lr_schedule << "\"\n"
     << "seed = " << cfg.seed << "\n"
     << "random_crop = " << (cfg.random_crop ? "true" : "false") << "\n"
     << "psl = " << (cfg.psl ? "true" : "false") << "\n"
     << "speech_on_target = " << (cfg.speech_on_target ? "true" : "false") << "\n"
     << "top_k = " << cfg.top_k << "\n";
  return os.str();
}

namespace {

std::size_t SamplesFor(double seconds, int rate) {
  const auto n = std::llround(seconds * rate);
  Require(n >= 1, ErrorKind::kArgument, "duration rounds to zero samples");
  return static_cast<std::size_t>(n);
}

}  // namespace

Waveform RandomCrop(const Waveform& w, double seconds, Rng& rng) {
  Require(seconds > 0.0, ErrorKind::kArgument, "crop length must be positive");
  const std::size_t len = SamplesFor(seconds, w.sample_rate);
  Waveform out;
  out.sample_rate = w.sample_rate;
  if (w.samples.size() <= len) {
    out.samples = w.samples;
    out.samples.resize(len, 0.0f);
    return out;
  }
  std::uniform_int_distribution<std::size_t> start_dist(0, w.samples.size() - len);
  const std::size_t start = start_dist(rng);
  out.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     w.samples.begin() + static_cast<std::ptrdiff_t>(start + len));
  return out;
}

Waveform FitToDuration(const Waveform& w, double seconds) {
  Require(seconds > 0.0, ErrorKind::kArgument, "duration must be positive");
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples = w.samples;
  out.samples.resize(SamplesFor(seconds, w.sample_rate), 0.0f);
  return out;
}

FeatureBatch<float> PadBatch(std::span<const LogMelSpectrogram> items, float pad_value) {
  Require(!items.empty(), ErrorKind::kArgument, "cannot pad an empty batch");
  FeatureBatch<float> b;
  b.batch = static_cast<int>(items.size());
  b.mels = items.front().n_mels;
  for (const auto& it : items) {
    Require(it.n_mels == b.mels, ErrorKind::kShape, "mixed mel counts in one batch");
    b.frames = std::max(b.frames, it.frames);
  }
  const std::size_t plane = static_cast<std::size_t>(b.frames) * b.mels;
  b.values.assign(plane * items.size(), pad_value);
  b.lengths.reserve(items.size());
  for (std::size_t n = 0; n < items.size(); ++n) {
    std::copy(items[n].values.begin(), items[n].values.end(),
              b.values.begin() + static_cast<std::ptrdiff_t>(n * plane));
    b.lengths.push_back(items[n].frames);
  }
  return b;
}

std::vector<LogMelSpectrogram> UnpadBatch(const FeatureBatch<float>& batch) {
  Require(batch.lengths.size() == static_cast<std::size_t>(batch.batch), ErrorKind::kShape,
          "length count does not match batch size");
  const std::size_t plane = static_cast<std::size_t>(batch.frames) * batch.mels;
  std::vector<LogMelSpectrogram> out(batch.batch);
  for (int n = 0; n < batch.batch; ++n) {
    out[n].frames = batch.lengths[n];
    out[n].n_mels = batch.mels;
    const auto begin = batch.values.begin() + static_cast<std::ptrdiff_t>(n * plane);
    out[n].values.assign(begin,
                         begin + static_cast<std::ptrdiff_t>(batch.lengths[n]) * batch.mels);
  }
  return out;
}

BceResult BceLoss(std::span<const double> logits, std::span<const double> targets) {
  Require(logits.size() == targets.size(), ErrorKind::kShape, "logit / target shape mismatch");
  Require(!logits.empty(), ErrorKind::kArgument, "empty loss input");
  BceResult r;
  r.grad.resize(logits.size());
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double y = targets[i];
    Require(std::isfinite(z), ErrorKind::kNumeric, "non-finite logit");
    Require(y >= 0.0 && y <= 1.0, ErrorKind::kArgument, "target outside [0,1]");
    sum += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    r.grad[i] = (Sigmoid(z) - y) * inv_n;
  }
  r.loss = sum * inv_n;
  return r;
}

template <typename T>
void AdamStep(std::vector<std::vector<T>>& params, const std::vector<std::vector<T>>& grads,
              const std::vector<bool>& trainable, AdamState& state, const AdamOptions& options) {
  Require(params.size() == grads.size() && params.size() == trainable.size(), ErrorKind::kShape,
          "parameter / gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!trainable[i]) continue;
    Require(params[i].size() == grads[i].size(), ErrorKind::kShape,
            "parameter / gradient size mismatch");
    for (T g : grads[i]) {
      Require(std::isfinite(static_cast<double>(g)), ErrorKind::kNumeric, "non-finite gradient");
    }
  }
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].size(), 0.0);
      state.v[i].assign(params[i].size(), 0.0);
    }
  }
  Require(state.m.size() == params.size(), ErrorKind::kShape, "optimizer state mismatch");
  ++state.step;
  const double b1 = options.beta1;
  const double b2 = options.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!trainable[i]) continue;
    auto& p = params[i];
    const auto& g = grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = static_cast<double>(g[j]);
      m[j] = b1 * m[j] + (1.0 - b1) * gj;
      v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] = static_cast<T>(static_cast<double>(p[j]) -
                            options.learning_rate * mhat / (std::sqrt(vhat) + options.eps));
    }
  }
}

template void AdamStep<float>(std::vector<std::vector<float>>&,
                              const std::vector<std::vector<float>>&, const std::vector<bool>&,
                              AdamState&, const AdamOptions&);
template void AdamStep<double>(std::vector<std::vector<double>>&,
                               const std::vector<std::vector<double>>&, const std::vector<bool>&,
                               AdamState&, const AdamOptions&);

Predictor::Predictor(Model model)
    : model_(std::move(model)), extractor_(model_.frontend), net_(model_) {}

std::vector<float> Predictor::Predict(const Waveform& w) {
  if (w.sample_rate == model_.frontend.sample_rate) {
    return PredictFeatures(extractor_.Extract(w));
  }
  return PredictFeatures(extractor_.Extract(Resample(w, model_.frontend.sample_rate)));
}

std::vector<float> Predictor::PredictFeatures(const LogMelSpectrogram& features) {
  return PredictBatch(std::span<const LogMelSpectrogram>(&features, 1));
}

std::vector<float> Predictor::PredictBatch(std::span<const LogMelSpectrogram> items) {
  const FeatureBatch<float> batch =
      PadBatch(items, static_cast<float>(model_.frontend.log_floor()));
  const std::vector<float>& logits = net_.Forward(batch, Mode::kEval);
  std::vector<float> out(logits.size());
  std::transform(logits.begin(), logits.end(), out.begin(), [](float z) { return Sigmoid(z); });
  return out;
}

PslTeacher::PslTeacher(Model teacher, const LabelVocabulary& student_vocab)
    : predictor_(std::move(teacher)), student_size_(student_vocab.size()) {
  const LabelVocabulary& tv = predictor_.vocab();
  for (const auto& name : student_vocab.at_labels()) {
    const auto idx = tv.Find(name);
    Require(idx.has_value(), ErrorKind::kConfig,
            "teacher has no output for sound-event label '" + name + "'");
    gather_.push_back(*idx);
  }
}

SoftLabelVector PslTeacher::Generate(const Waveform& crop) {
  const std::vector<float> p = predictor_.Predict(crop);
  SoftLabelVector y(student_size_, 0.0f);
  for (std::size_t i = 0; i < gather_.size(); ++i) y[i] = p[gather_[i]];
  return y;
}

SoftLabelVector GeneratePsl(PslTeacher& teacher, const Waveform& crop) {
  return teacher.Generate(crop);
}

std::vector<CheckpointScore> RankCheckpoints(std::span<const CheckpointScore> scores, int k) {
  Require(k >= 1, ErrorKind::kArgument, "k must be at least 1");
  std::vector<CheckpointScore> sorted(scores.begin(), scores.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.map != b.map) return a.map > b.map;
    return a.epoch < b.epoch;
  });
  if (sorted.size() > static_cast<std::size_t>(k)) sorted.resize(k);
  return sorted;
}

const Waveform& AudioStore::Get(const std::string& path) {
  if (auto it = index_.find(path); it != index_.end()) return *cache_[it->second].second;
  Waveform w = ReadWav(path);
  if (w.sample_rate != sample_rate_) w = Resample(w, sample_rate_);
  index_.emplace(path, cache_.size());
  cache_.emplace_back(path, std::make_unique<Waveform>(std::move(w)));
  return *cache_.back().second;
}

namespace {

constexpr int kEvalBatch = 16;

// Hard multi-hot target used for validation and for the PSL-off ablation.
SoftLabelVector HardTargets(const ManifestEntry& entry, const LabelVocabulary& vocab,
                            const EncodeOptions& options) {
  ManifestEntry hard = entry;
  hard.soft.clear();
  return EncodeTargets(hard, vocab, options);
}

}  // namespace

double ValidationMap(Predictor& predictor, std::span<const ManifestEntry> entries,
                     AudioStore& audio) {
  Require(!entries.empty(), ErrorKind::kArgument, "empty validation set");
  const LabelVocabulary& vocab = predictor.vocab();
  const int v = vocab.size();
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  scores.reserve(entries.size() * v);
  labels.reserve(entries.size() * v);
  for (std::size_t start = 0; start < entries.size(); start += kEvalBatch) {
    const std::size_t end = std::min(entries.size(), start + kEvalBatch);
    std::vector<LogMelSpectrogram> feats;
    for (std::size_t i = start; i < end; ++i) {
      feats.push_back(predictor.extractor().Extract(audio.Get(entries[i].audio)));
      for (float y : HardTargets(entries[i], vocab, {})) labels.push_back(y >= 0.5f ? 1 : 0);
    }
    for (float p : predictor.PredictBatch(feats)) scores.push_back(p);
  }
  return MeanAveragePrecision(scores, labels, static_cast<int>(entries.size()), v).map;
}

namespace {

void WriteRanking(const std::string& dir, const std::vector<CheckpointScore>& ranking) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : ranking) j.push_back({{"epoch", r.epoch}, {"map", r.map}});
  std::ofstream out(std::filesystem::path(dir) / "ranking.json", std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot write ranking.json in " + dir);
  out << j.dump(2) << "\n";
}

std::string CheckpointPath(const std::string& dir, int epoch) {
  return (std::filesystem::path(dir) / ("epoch_" + std::to_string(epoch) + ".ukat")).string();
}

}  // namespace

TrainResult Train(const TrainConfig& config, const Model& initial, const TrainData& data,
                  AudioStore& audio, const TrainOptions& options) {
  config.Validate();
  Require(!data.kws.empty() || !data.at.empty(), ErrorKind::kArgument, "no training data");
  Require(!data.valid.empty(), ErrorKind::kArgument, "empty validation manifest");
  Require(audio.sample_rate() == initial.frontend.sample_rate, ErrorKind::kConfig,
          "audio store rate differs from the model front-end rate");
  if (!options.checkpoint_dir.empty()) {
    std::filesystem::create_directories(options.checkpoint_dir);
  }

  const LabelVocabulary& vocab = initial.vocab;
  const EncodeOptions encode{config.speech_on_target};
  const LogMelExtractor extractor(initial.frontend);
  Network<float> net(initial);
  std::vector<bool> trainable(net.params().size());
  for (std::size_t i = 0; i < trainable.size(); ++i) trainable[i] = net.trainable(static_cast<int>(i));

  std::vector<const ManifestEntry*> pool;
  for (const auto& e : data.kws) pool.push_back(&e);
  for (const auto& e : data.at) pool.push_back(&e);

  Rng rng(config.seed);
  AdamState adam;
  AdamOptions adam_opts;
  const std::size_t steps_per_epoch =
      (pool.size() + config.batch_size - 1) / static_cast<std::size_t>(config.batch_size);
  const double total_steps = static_cast<double>(steps_per_epoch) * config.max_epochs;

  TrainResult result;
  result.final_model = initial;
  std::vector<CheckpointScore> scores;
  std::vector<std::pair<int, Model>> kept;
  std::vector<double> first_losses;

  for (int epoch = 1; epoch <= config.max_epochs && !result.diverged; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(pool.begin(), pool.end(), rng);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < pool.size(); start += config.batch_size) {
      const std::size_t end = std::min(pool.size(), start + config.batch_size);
      std::vector<LogMelSpectrogram> feats;
      std::vector<double> targets;
      for (std::size_t i = start; i < end; ++i) {
        const ManifestEntry& e = *pool[i];
        const Waveform& w = audio.Get(e.audio);
        const Waveform x = config.random_crop ? RandomCrop(w, config.crop_seconds, rng)
                                              : FitToDuration(w, config.uncropped_seconds);
        SoftLabelVector y;
        if (e.source == SourceKind::kAt && config.psl && options.teacher != nullptr) {
          y = options.teacher->Generate(x);
        } else if (config.psl) {
          y = EncodeTargets(e, vocab, encode);
        } else {
          y = HardTargets(e, vocab, encode);
        }
        targets.insert(targets.end(), y.begin(), y.end());
        feats.push_back(extractor.Extract(x));
      }
      const FeatureBatch<float> batch =
          PadBatch(feats, static_cast<float>(initial.frontend.log_floor()));
      const std::vector<float>& logits = net.Forward(batch, Mode::kTrain);
      const std::vector<double> z(logits.begin(), logits.end());
      BceResult bce;
      try {
        bce = BceLoss(z, targets);
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::kNumeric) throw;
        result.diverged = true;
        break;
      }
      if (!std::isfinite(bce.loss)) {
        result.diverged = true;
        break;
      }
      const std::vector<float> g(bce.grad.begin(), bce.grad.end());
      net.Backward(g);
      adam_opts.learning_rate = config.learning_rate;
      if (config.lr_schedule == "cosine") {
        const double progress = static_cast<double>(adam.step) / total_steps;
        adam_opts.learning_rate *= 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
      }
      try {
        AdamStep(net.params(), net.grads(), trainable, adam, adam_opts);
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::kNumeric) throw;
        result.diverged = true;
        break;
      }
      if (first_losses.size() < 10) first_losses.push_back(bce.loss);
      loss_sum += bce.loss;
      ++steps;
    }
    if (result.diverged) break;

    Model snapshot = initial;
    net.ExportTo(&snapshot);
    Predictor predictor(snapshot);
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0;
    stats.valid_map = ValidationMap(predictor, data.valid, audio);
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(stats);
    scores.push_back({epoch, stats.valid_map});

    const std::vector<CheckpointScore> ranking = RankCheckpoints(scores, config.top_k);
    const bool in_top = std::any_of(ranking.begin(), ranking.end(),
                                    [&](const auto& r) { return r.epoch == epoch; });
    if (in_top) {
      kept.emplace_back(epoch, snapshot);
      if (!options.checkpoint_dir.empty()) {
        SaveModel(snapshot, CheckpointPath(options.checkpoint_dir, epoch));
      }
    }
    std::erase_if(kept, [&](const auto& km) {
      const bool keep = std::any_of(ranking.begin(), ranking.end(),
                                    [&](const auto& r) { return r.epoch == km.first; });
      if (!keep && !options.checkpoint_dir.empty()) {
        std::filesystem::remove(CheckpointPath(options.checkpoint_dir, km.first));
      }
      return !keep;
    });
    if (!options.checkpoint_dir.empty()) WriteRanking(options.checkpoint_dir, ranking);
    result.final_model = std::move(snapshot);
    if (options.on_epoch) options.on_epoch(stats);
  }

  if (!first_losses.empty()) {
    result.initial_loss = std::accumulate(first_losses.begin(), first_losses.end(), 0.0) /
                          static_cast<double>(first_losses.size());
  }
  result.ranking = RankCheckpoints(scores, config.top_k);
  for (const auto& r : result.ranking) {
    for (const auto& [epoch, model] : kept) {
      if (epoch == r.epoch) result.ranked_models.push_back(model);
    }
  }
  return result;
}

}  // namespace ukat
