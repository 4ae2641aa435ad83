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

#include "cli.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ukat/error.h"
#include "ukat/evaluate.h"
#include "ukat/inference.h"
#include "ukat/model.h"
#include "ukat/synthetic.h"
#include "ukat/training.h"

namespace ukat::cli {
namespace {

namespace fs = std::filesystem;

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) Fail(ErrorKind::kIo, "cannot write " + path);
  f << text;
}

std::string ReadText(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) Fail(ErrorKind::kIo, "cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t\r") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// `--keep a,b,c` or `--keep @names.txt` (one name per line).
std::vector<std::string> ParseKeep(const std::string& spec) {
  if (spec.empty() || spec[0] != '@') return SplitList(spec);
  std::vector<std::string> out;
  std::istringstream in(ReadText(spec.substr(1)));
  std::string line;
  while (std::getline(in, line)) {
    line.erase(0, line.find_first_not_of(" \t"));
    line.erase(line.find_last_not_of(" \t\r") + 1);
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

struct Sweep {
  double lo = 0.0, hi = 1.0, step = 0.1;
};

Sweep ParseSweep(const std::string& s) {
  Sweep sw;
  char c1 = 0, c2 = 0;
  std::istringstream in(s);
  if (!(in >> sw.lo >> c1 >> sw.hi >> c2 >> sw.step) || c1 != ':' || c2 != ':' ||
      !(in >> std::ws).eof()) {
    Fail(ErrorKind::kArgument, "--gamma-sweep expects lo:hi:step, got '" + s + "'");
  }
  return sw;
}

std::string Fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  SyntheticSpec spec;
};

int RunSynth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  const SyntheticDataset ds = GenerateSyntheticDataset(a.spec, a.out);
  err << "seed=" << a.spec.seed << "\n";
  nlohmann::ordered_json j;
  j["seed"] = a.spec.seed;
  j["vocab"] = ds.vocab_path;
  j["train_kws"] = ds.train_kws;
  j["train_at"] = ds.train_at;
  j["valid"] = ds.valid;
  j["eval_kws"] = ds.eval_kws;
  j["eval_at"] = ds.eval_at;
  j["eval_neg"] = ds.eval_neg;
  j["num_train_clips"] = ds.num_train_clips;
  out << j.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string vocab, kws, at, valid, out, config, teacher, arch = "compact", init;
  std::optional<int> epochs, batch_size, top_k;
  std::optional<double> lr, crop_seconds;
  std::optional<std::uint64_t> seed;
  bool no_crop = false, no_psl = false, no_speech_on_target = false;
  bool quiet = false;
};

int RunTrain(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  if (!a.config.empty()) cfg = LoadTrainConfig(a.config);
  if (a.epochs) cfg.max_epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.top_k) cfg.top_k = *a.top_k;
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.crop_seconds) cfg.crop_seconds = *a.crop_seconds;
  if (a.seed) cfg.seed = *a.seed;
  if (a.no_crop) cfg.random_crop = false;
  if (a.no_psl) cfg.psl = false;
  if (a.no_speech_on_target) cfg.speech_on_target = false;
  cfg.Validate();

  const LabelVocabulary vocab = LabelVocabulary::Load(a.vocab);
  TrainData data;
  if (!a.kws.empty()) data.kws = ParseManifest(a.kws);
  if (!a.at.empty()) data.at = ParseManifest(a.at);
  data.valid = ParseManifest(a.valid);

  Model initial = a.init.empty()
                      ? BuildModel(ArchitectureConfig::Named(a.arch, vocab.size()), vocab, cfg.seed)
                      : LoadModel(a.init);
  Require(initial.vocab == vocab, ErrorKind::kVocabulary,
          "initial model vocabulary differs from " + a.vocab);
  std::optional<PslTeacher> teacher;
  if (cfg.psl && !a.teacher.empty()) teacher.emplace(LoadModel(a.teacher), vocab);

  fs::create_directories(a.out);
  WriteText((fs::path(a.out) / "train_config.toml").string(), FormatTrainConfig(cfg));
  err << "seed=" << cfg.seed << "\n";

  AudioStore audio(initial.frontend.sample_rate);
  TrainOptions opts;
  opts.checkpoint_dir = (fs::path(a.out) / "ckpt").string();
  opts.teacher = teacher ? &*teacher : nullptr;
  opts.on_epoch = [&](const EpochStats& s) {
    if (!a.quiet) {
      err << "epoch " << s.epoch << " loss " << Fixed(s.train_loss) << " valid_mAP "
          << Fixed(s.valid_map) << "\n";
    }
  };
  const TrainResult r = Train(cfg, initial, data, audio, opts);

  std::ostringstream hist;
  hist << "epoch,train_loss,valid_map\n";
  for (const auto& s : r.history) {
    hist << s.epoch << ',' << Fixed(s.train_loss) << ',' << Fixed(s.valid_map) << "\n";
  }
  WriteText((fs::path(a.out) / "history.csv").string(), hist.str());
  SaveModel(r.final_model, (fs::path(a.out) / "final.ukat").string());

  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["epochs_run"] = r.history.size();
  j["initial_loss"] = std::stod(Fixed(r.initial_loss));
  j["final_loss"] = r.history.empty() ? 0.0 : std::stod(Fixed(r.history.back().train_loss));
  j["diverged"] = r.diverged;
  auto ranking = nlohmann::ordered_json::array();
  for (const auto& c : r.ranking) ranking.push_back({{"epoch", c.epoch}, {"map", c.map}});
  j["ranking"] = ranking;
  out << j.dump(2) << "\n";
  if (r.diverged) {
    err << "training diverged; kept the last finite checkpoint\n";
    return kExitNumeric;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string model, manifest, task = "kws", report, csv, sweep, sweep_csv, condition, name;
  double gamma = 0.4;
  double condition_threshold = 0.5;
  double chunk = 1.0;
  std::uint64_t seed = 0;
};

int RunEval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const EvalTask task = ParseEvalTask(a.task);
  Predictor predictor(LoadModel(a.model));
  const auto entries = ParseManifest(a.manifest);
  AudioStore audio(predictor.model().frontend.sample_rate);
  const ScoredSet set = ScoreEntries(predictor, entries, audio, task, a.chunk);

  DecisionConfig decision;
  decision.gamma = a.gamma;
  decision.condition = SplitList(a.condition);
  decision.condition_threshold = a.condition_threshold;
  EvalReport report = Summarize(set, predictor.vocab(), decision,
                                a.name.empty() ? fs::path(a.manifest).stem().string() : a.name);
  report.seed = a.seed;
  err << "seed=" << a.seed << "\n";

  const std::string text = FormatReport(report);
  if (a.report.empty()) {
    out << text;
  } else {
    WriteText(a.report, text);
  }
  if (!a.csv.empty()) WriteText(a.csv, PerClassCsv(report));
  if (!a.sweep.empty()) {
    const Sweep sw = ParseSweep(a.sweep);
    const std::string curve = GammaSweepCsv(set, predictor.vocab(), sw.lo, sw.hi, sw.step);
    if (a.sweep_csv.empty()) {
      out << curve;
    } else {
      WriteText(a.sweep_csv, curve);
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::string model, condition;
  std::vector<std::string> clips;
  double gamma = 0.4;
  double condition_threshold = 0.5;
  double chunk = 1.0;
  std::optional<double> threshold;
  int top_n = 3;
};

int RunInfer(const InferArgs& a, std::ostream& out, std::ostream&) {
  Predictor predictor(LoadModel(a.model));
  const LabelVocabulary& vocab = predictor.vocab();
  DecisionConfig decision;
  decision.gamma = a.gamma;
  decision.condition = SplitList(a.condition);
  decision.condition_threshold = a.condition_threshold;
  decision.Validate();
  TagCriterion tags;
  if (a.threshold) {
    tags.threshold = a.threshold;
  } else {
    tags.top_n = a.top_n;
  }
  for (const auto& path : a.clips) {
    Waveform w = ReadWav(path);
    if (w.sample_rate != predictor.model().frontend.sample_rate) {
      w = Resample(w, predictor.model().frontend.sample_rate);
    }
    const auto chunks = ChunkAudio(w, a.chunk);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const std::vector<float> p = predictor.Predict(chunks[i]);
      const Decision d = ConditionalDecide(p, vocab, decision);
      nlohmann::ordered_json j;
      if (a.clips.size() > 1) j["file"] = path;
      j["chunk_index"] = i;
      j["start_s"] = std::stod(Fixed(static_cast<double>(i) * a.chunk));
      nlohmann::ordered_json dj;
      dj["label"] = d.index >= 0 ? nlohmann::ordered_json(vocab.name(d.index))
                                 : nlohmann::ordered_json(nullptr);
      dj["branch"] = BranchName(d.branch);
      dj["score"] = std::stod(Fixed(d.score));
      if (d.suppressed) dj["suppressed"] = true;
      j["decision"] = dj;
      auto events = nlohmann::ordered_json::array();
      if (vocab.num_at() > 0) {
        for (const auto& [name, score] : TagEvents(p, vocab, tags)) {
          events.push_back({{"label", name}, {"score", std::stod(Fixed(score))}});
        }
      }
      j["events"] = events;
      out << j.dump() << "\n";
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- strip

struct StripArgs {
  std::string model, keep, out;
};

int RunStrip(const StripArgs& a, std::ostream& out, std::ostream&) {
  const Model full = LoadModel(a.model);
  const Model stripped = StripOutput(full, ParseKeep(a.keep));
  SaveModel(stripped, a.out);
  nlohmann::ordered_json j;
  j["parameters_before"] = CountParameters(full);
  j["parameters_after"] = CountParameters(stripped);
  j["outputs"] = stripped.vocab.names();
  out << j.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- relabel

struct RelabelArgs {
  std::string teacher, manifest, out;
  double crop = 1.0;
};

// Offline pseudo strong labels: every clip is cut into `crop`-second chunks and
// each chunk gets the teacher's sound-event scores as soft labels.
int RunRelabel(const RelabelArgs& a, std::ostream& out, std::ostream&) {
  const Model teacher_model = LoadModel(a.teacher);
  const LabelVocabulary at_vocab =
      LabelVocabulary::Partial(teacher_model.vocab.at_labels(), {});
  PslTeacher teacher(teacher_model, at_vocab);
  const auto entries = ParseManifest(a.manifest);
  const fs::path root(a.out);
  const fs::path manifest_path = root / "psl.jsonl";
  if (fs::exists(manifest_path)) Fail(ErrorKind::kIo, "output already exists: " + manifest_path.string());
  fs::create_directories(root / "audio");
  AudioStore audio(teacher_model.frontend.sample_rate);
  std::vector<ManifestEntry> relabeled;
  for (std::size_t n = 0; n < entries.size(); ++n) {
    const auto& e = entries[n];
    if (e.source != SourceKind::kAt) continue;
    const auto chunks = ChunkAudio(audio.Get(e.audio), a.crop);
    for (std::size_t c = 0; c < chunks.size(); ++c) {
      char name[48];
      std::snprintf(name, sizeof(name), "clip%05zu_chunk%03zu.wav", n, c);
      const fs::path rel = fs::path("audio") / name;
      WriteWav((root / rel).string(), chunks[c]);
      const SoftLabelVector y = teacher.Generate(chunks[c]);
      ManifestEntry out_entry;
      out_entry.audio = rel.string();
      out_entry.labels = e.labels;
      out_entry.split = e.split;
      out_entry.source = SourceKind::kAt;
      for (int i = 0; i < at_vocab.num_at(); ++i) {
        out_entry.soft[at_vocab.name(i)] = std::stod(Fixed(y[i]));
      }
      relabeled.push_back(std::move(out_entry));
    }
  }
  WriteManifest(manifest_path.string(), relabeled);
  nlohmann::ordered_json j;
  j["manifest"] = manifest_path.string();
  j["chunks"] = relabeled.size();
  out << j.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- inspect

int RunInspect(const std::string& path, std::ostream& out, std::ostream&) {
  const Model m = LoadModel(path);
  nlohmann::ordered_json j;
  j["header"] = nlohmann::ordered_json::parse(ReadModelHeader(path).dump());
  j["parameters"] = CountParameters(m);
  j["stored_elements"] = CountStoredElements(m);
  j["file_bytes"] = fs::file_size(path);
  out << j.dump(2) << "\n";
  return kExitOk;
}

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kArgument:
    case ErrorKind::kConfig:
      return kExitUsage;
    case ErrorKind::kNumeric:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ukat: joint keyword spotting and audio tagging", "ukat"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate the seeded synthetic dataset");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--keywords", synth.spec.num_keywords, "Number of keywords");
  s->add_option("--events", synth.spec.num_events, "Number of sound events incl. Speech");
  s->add_option("--per-class", synth.spec.train_per_class, "Training clips per class");
  s->add_option("--valid-per-class", synth.spec.valid_per_class);
  s->add_option("--eval-per-class", synth.spec.eval_per_class);
  s->add_option("--negatives", synth.spec.negative_streams, "Negative-only streams");
  s->add_option("--at-seconds", synth.spec.at_seconds, "Sound-event clip length");
  s->add_option("--noise", synth.spec.noise_level, "Background noise level");
  s->add_option("--seed", synth.spec.seed);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Joint training with validation-mAP checkpointing");
  t->add_option("--vocab", train.vocab, "Label vocabulary file")->required();
  t->add_option("--kws", train.kws, "Keyword manifest");
  t->add_option("--at", train.at, "Sound-event manifest");
  t->add_option("--valid", train.valid, "Validation manifest")->required();
  t->add_option("--out", train.out, "Run directory")->required();
  t->add_option("--config", train.config, "key = value training config");
  t->add_option("--arch", train.arch, "reference | compact | tiny");
  t->add_option("--init", train.init, "Start from this model instead of a fresh one");
  t->add_option("--teacher", train.teacher, "Pseudo-label teacher model");
  t->add_option("--epochs", train.epochs);
  t->add_option("--batch-size", train.batch_size);
  t->add_option("--lr", train.lr);
  t->add_option("--crop", train.crop_seconds, "Random crop length in seconds");
  t->add_option("--top-k", train.top_k);
  t->add_option("--seed", train.seed);
  t->add_flag("--no-crop", train.no_crop, "Disable random cropping");
  t->add_flag("--no-psl", train.no_psl, "Use hard manifest labels");
  t->add_flag("--no-speech-on-target", train.no_speech_on_target);
  t->add_flag("--quiet", train.quiet);

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Accuracy, mAP or rejection rate on a manifest");
  e->add_option("--model", eval.model)->required();
  e->add_option("--manifest", eval.manifest)->required();
  e->add_option("--task", eval.task, "kws | at | neg")->check(CLI::IsMember({"kws", "at", "neg"}));
  e->add_option("--gamma", eval.gamma, "Keyword threshold")->check(CLI::Range(0.0, 1.0));
  e->add_option("--gamma-sweep", eval.sweep, "lo:hi:step operating curve");
  e->add_option("--sweep-csv", eval.sweep_csv, "Write the operating curve here");
  e->add_option("--chunk", eval.chunk, "Chunk length for the neg task");
  e->add_option("--condition", eval.condition, "Conditional wake-up labels");
  e->add_option("--condition-threshold", eval.condition_threshold);
  e->add_option("--report", eval.report, "JSON report path (default stdout)");
  e->add_option("--csv", eval.csv, "Per-class CSV path");
  e->add_option("--name", eval.name, "Dataset name in the report");
  e->add_option("--seed", eval.seed);

  InferArgs infer;
  auto* i = app.add_subcommand("infer", "Chunked decisions as JSON Lines");
  i->add_option("--model", infer.model)->required();
  i->add_option("clips", infer.clips, "WAV files")->required();
  i->add_option("--gamma", infer.gamma)->check(CLI::Range(0.0, 1.0));
  i->add_option("--chunk", infer.chunk);
  i->add_option("--top-n", infer.top_n, "Events reported per chunk");
  i->add_option("--threshold", infer.threshold, "Report events scoring at least this");
  i->add_option("--condition", infer.condition);
  i->add_option("--condition-threshold", infer.condition_threshold);

  StripArgs strip;
  auto* st = app.add_subcommand("strip", "Keep only the listed outputs");
  st->add_option("--model", strip.model)->required();
  st->add_option("--keep", strip.keep, "name,name,... or @file")->required();
  st->add_option("--out", strip.out)->required();

  RelabelArgs relabel;
  auto* r = app.add_subcommand("relabel", "Chunk clips and attach teacher soft labels");
  r->add_option("--teacher", relabel.teacher)->required();
  r->add_option("--manifest", relabel.manifest)->required();
  r->add_option("--crop", relabel.crop, "Chunk length in seconds");
  r->add_option("--out", relabel.out)->required();

  std::string inspect_path;
  auto* in = app.add_subcommand("inspect", "Print a model header");
  in->add_option("model", inspect_path)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*s) return RunSynth(synth, out, err);
    if (*t) return RunTrain(train, out, err);
    if (*e) return RunEval(eval, out, err);
    if (*i) return RunInfer(infer, out, err);
    if (*st) return RunStrip(strip, out, err);
    if (*r) return RunRelabel(relabel, out, err);
    if (*in) return RunInspect(inspect_path, out, err);
  } catch (const Error& ex) {
    err << "error [" << ErrorKindName(ex.kind()) << "]: " << ex.what() << "\n";
    return ExitCodeFor(ex.kind());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace ukat::cli
