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

#include "ukat/evaluate.h"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "ukat/error.h"

namespace ukat {

const char* EvalTaskName(EvalTask task) {
  switch (task) {
    case EvalTask::kKws:
      return "kws";
    case EvalTask::kAt:
      return "at";
    case EvalTask::kNeg:
      return "neg";
  }
  return "?";
}

EvalTask ParseEvalTask(const std::string& name) {
  if (name == "kws") return EvalTask::kKws;
  if (name == "at") return EvalTask::kAt;
  if (name == "neg") return EvalTask::kNeg;
  Fail(ErrorKind::kArgument, "task must be kws, at or neg");
}

namespace {

constexpr std::size_t kBatch = 16;

void ScoreWaveforms(Predictor& predictor, std::span<const Waveform> clips,
                    std::vector<float>* out) {
  for (std::size_t start = 0; start < clips.size(); start += kBatch) {
    std::vector<LogMelSpectrogram> feats;
    for (std::size_t i = start; i < std::min(clips.size(), start + kBatch); ++i) {
      feats.push_back(predictor.extractor().Extract(clips[i]));
    }
    const std::vector<float> p = predictor.PredictBatch(feats);
    out->insert(out->end(), p.begin(), p.end());
  }
}

}  // namespace

ScoredSet ScoreEntries(Predictor& predictor, std::span<const ManifestEntry> entries,
                       AudioStore& audio, EvalTask task, double chunk_seconds) {
  Require(!entries.empty(), ErrorKind::kArgument, "empty evaluation set");
  const LabelVocabulary& vocab = predictor.vocab();
  ScoredSet set;
  set.task = task;
  set.outputs = vocab.size();
  std::vector<Waveform> clips;
  for (const auto& e : entries) {
    const Waveform& w = audio.Get(e.audio);
    if (task == EvalTask::kNeg) {
      for (auto& c : ChunkAudio(w, chunk_seconds)) clips.push_back(std::move(c));
      continue;
    }
    clips.push_back(w);
    if (task == EvalTask::kKws) {
      set.references.push_back(ReferenceIndex(e, vocab));
    } else {
      ManifestEntry hard = e;
      hard.soft.clear();
      for (float y : EncodeTargets(hard, vocab)) set.labels.push_back(y >= 0.5f ? 1 : 0);
    }
  }
  Require(!clips.empty(), ErrorKind::kArgument, "evaluation set holds no audio");
  ScoreWaveforms(predictor, clips, &set.scores);
  return set;
}

namespace {

std::vector<Decision> DecideAll(const ScoredSet& set, const LabelVocabulary& vocab,
                                const DecisionConfig& decision) {
  std::vector<Decision> out;
  out.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    out.push_back(ConditionalDecide(set.row(i), vocab, decision));
  }
  return out;
}

}  // namespace

EvalReport Summarize(const ScoredSet& set, const LabelVocabulary& vocab,
                     const DecisionConfig& decision, const std::string& dataset) {
  decision.Validate();
  EvalReport r;
  r.dataset = dataset;
  r.task = EvalTaskName(set.task);
  r.n_samples = static_cast<std::int64_t>(set.size());
  r.gamma = decision.gamma;
  switch (set.task) {
    case EvalTask::kKws: {
      const auto decisions = DecideAll(set, vocab, decision);
      r.accuracy = Accuracy(decisions, set.references);
      const ConfusionMatrix cm = Confusion(decisions, set.references, vocab.size());
      for (int c = 0; c < vocab.size(); ++c) {
        ClassReport cr;
        cr.label = vocab.name(c);
        for (int d = 0; d <= vocab.size(); ++d) cr.support += cm.at(c, d);
        if (cr.support > 0) {
          cr.recall = static_cast<double>(cm.at(c, c)) / static_cast<double>(cr.support);
        }
        r.per_class.push_back(cr);
      }
      break;
    }
    case EvalTask::kAt: {
      std::vector<double> scores(set.scores.begin(), set.scores.end());
      const MapResult m =
          MeanAveragePrecision(scores, set.labels, static_cast<int>(set.size()), set.outputs);
      r.map = m.map;
      for (int c = 0; c < vocab.size(); ++c) {
        ClassReport cr;
        cr.label = vocab.name(c);
        for (std::size_t i = 0; i < set.size(); ++i) cr.support += set.labels[i * set.outputs + c];
        cr.ap = m.per_class[c];
        r.per_class.push_back(cr);
      }
      break;
    }
    case EvalTask::kNeg: {
      const auto decisions = DecideAll(set, vocab, decision);
      r.rejection_rate = RejectionRate(decisions);
      std::vector<std::int64_t> fired(vocab.size(), 0);
      for (const auto& d : decisions) {
        if (d.index >= 0) ++fired[d.index];
      }
      for (int c = 0; c < vocab.size(); ++c) r.per_class.push_back({vocab.name(c), fired[c], {}, {}});
      break;
    }
  }
  return r;
}

std::string GammaSweepCsv(const ScoredSet& set, const LabelVocabulary& vocab, double lo,
                          double hi, double step) {
  Require(step > 0.0 && lo >= 0.0 && hi <= 1.0 && lo <= hi, ErrorKind::kArgument,
          "gamma sweep needs 0 <= lo <= hi <= 1 and step > 0");
  Require(set.task != EvalTask::kAt, ErrorKind::kArgument,
          "gamma sweep applies to kws and neg tasks");
  std::ostringstream os;
  os << "gamma,fire_rate," << (set.task == EvalTask::kKws ? "accuracy" : "rejection_rate")
     << "\n";
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  char buf[96];
  for (long i = 0; i <= n; ++i) {
    DecisionConfig cfg;
    cfg.gamma = std::min(hi, lo + static_cast<double>(i) * step);
    std::vector<Decision> decisions;
    for (std::size_t j = 0; j < set.size(); ++j) decisions.push_back(Decide(set.row(j), vocab, cfg));
    const double rejection = RejectionRate(decisions);
    const double metric =
        set.task == EvalTask::kKws ? Accuracy(decisions, set.references) : rejection;
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f\n", cfg.gamma, 1.0 - rejection, metric);
    os << buf;
  }
  return os.str();
}

}  // namespace ukat
