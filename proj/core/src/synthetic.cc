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

#include "ukat/synthetic.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "ukat/error.h"

namespace ukat {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr std::array<const char*, kMaxSyntheticKeywords> kKeywordNames = {
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot"};
constexpr std::array<const char*, kMaxSyntheticTextures> kTextureNames = {
    "Engine", "Siren", "Rain", "Bell", "Wind", "Birdsong"};

// Three-syllable pitch contours (Hz), one per keyword.
constexpr std::array<std::array<double, 3>, kMaxSyntheticKeywords> kContours = {{
    {180.0, 300.0, 240.0},
    {420.0, 260.0, 520.0},
    {300.0, 600.0, 450.0},
    {240.0, 240.0, 480.0},
    {540.0, 380.0, 300.0},
    {340.0, 680.0, 340.0},
}};

enum Tag : std::uint32_t { kKeywordTag = 1, kUnknownTag, kEventTag, kNegativeTag };

std::mt19937_64 StreamRng(std::uint64_t seed, Tag tag, int cls, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(cls),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::vector<double> Noise(std::mt19937_64& rng, std::size_t n, double level) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = level * g(rng);
  return x;
}

// Raised-cosine attack and release of `ramp` samples.
double Envelope(std::size_t i, std::size_t n, std::size_t ramp) {
  ramp = std::min(ramp, n / 2);
  if (ramp == 0) return 1.0;
  if (i < ramp) return 0.5 - 0.5 * std::cos(std::numbers::pi * i / ramp);
  if (i + ramp >= n) return 0.5 - 0.5 * std::cos(std::numbers::pi * (n - 1 - i) / ramp);
  return 1.0;
}

// Voiced syllable: four decaying harmonics with light vibrato.
void AddSyllable(std::vector<double>& x, std::size_t start, std::size_t len, double f0,
                 double amp, int rate, std::mt19937_64& rng) {
  const double vib_rate = Uniform(rng, 4.0, 7.0);
  const double vib_depth = Uniform(rng, 0.005, 0.015);
  double phase = Uniform(rng, 0.0, kTwoPi);
  for (std::size_t i = 0; i < len && start + i < x.size(); ++i) {
    const double t = static_cast<double>(i) / rate;
    const double f = f0 * (1.0 + vib_depth * std::sin(kTwoPi * vib_rate * t));
    phase += kTwoPi * f / rate;
    double s = 0.0;
    for (int h = 1; h <= 4; ++h) s += std::sin(h * phase) / h;
    x[start + i] += amp * Envelope(i, len, static_cast<std::size_t>(0.02 * rate)) * s;
  }
}

Waveform ToWaveform(const std::vector<double>& x, int rate) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    w.samples[i] = static_cast<float>(std::clamp(x[i], -0.99, 0.99));
  }
  return w;
}

std::size_t Samples(double seconds, int rate) {
  return static_cast<std::size_t>(std::llround(seconds * rate));
}

// One-pole filters used to color noise.
void LowPass(std::vector<double>& x, double a) {
  double y = 0.0;
  for (auto& v : x) v = y = a * y + (1.0 - a) * v;
}

void HighPass(std::vector<double>& x) {
  double prev = 0.0;
  for (auto& v : x) {
    const double cur = v;
    v = cur - prev;
    prev = cur;
  }
}

// Texture `kind` of length n at unit-ish loudness.
std::vector<double> Texture(int kind, std::size_t n, int rate, std::mt19937_64& rng) {
  std::vector<double> x(n, 0.0);
  switch (kind) {
    case 0: {  // engine: low rumble plus a hum
      x = Noise(rng, n, 1.0);
      LowPass(x, 0.985);
      const double f = Uniform(rng, 55.0, 75.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        x[i] = 2.5 * x[i] + 0.12 * (std::sin(kTwoPi * f * t) + 0.5 * std::sin(kTwoPi * 2 * f * t));
      }
      break;
    }
    case 1: {  // siren: sinusoidal sweep 800-1600 Hz
      const double period = Uniform(rng, 0.8, 1.2);
      double phase = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        const double f = 1200.0 + 400.0 * std::sin(kTwoPi * t / period);
        phase += kTwoPi * f / rate;
        x[i] = 0.2 * std::sin(phase);
      }
      break;
    }
    case 2: {  // rain: high-passed hiss with random drops
      x = Noise(rng, n, 0.12);
      HighPass(x);
      std::bernoulli_distribution drop(40.0 / rate);
      for (std::size_t i = 0; i < n; ++i) {
        if (!drop(rng)) continue;
        const double amp = Uniform(rng, 0.1, 0.3);
        for (std::size_t j = 0; j < 80 && i + j < n; ++j) {
          x[i + j] += amp * std::exp(-0.08 * j) * ((j % 2) ? -1.0 : 1.0);
        }
      }
      break;
    }
    case 3: {  // bell: inharmonic partials struck periodically
      const double interval = Uniform(rng, 0.6, 0.8);
      const std::array<double, 3> partials = {2100.0, 2870.0, 3650.0};
      for (double onset = Uniform(rng, 0.0, interval); onset < static_cast<double>(n) / rate;
           onset += interval) {
        const auto s0 = Samples(onset, rate);
        for (std::size_t i = s0; i < n && i < s0 + Samples(0.6, rate); ++i) {
          const double t = static_cast<double>(i - s0) / rate;
          double v = 0.0;
          for (double p : partials) v += std::sin(kTwoPi * p * t);
          x[i] += 0.12 * std::exp(-6.0 * t) * v;
        }
      }
      break;
    }
    case 4: {  // wind: band-limited noise with slow swells
      x = Noise(rng, n, 1.0);
      LowPass(x, 0.8);
      HighPass(x);
      const double swell = Uniform(rng, 0.2, 0.4);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        x[i] *= 0.9 * (0.6 + 0.4 * std::sin(kTwoPi * swell * t));
      }
      break;
    }
    default: {  // birdsong: fast high chirps
      for (double onset = 0.0; onset < static_cast<double>(n) / rate;
           onset += Uniform(rng, 0.15, 0.35)) {
        const auto s0 = Samples(onset, rate);
        const auto len = Samples(0.08, rate);
        const double f_lo = Uniform(rng, 3500.0, 4500.0);
        double phase = 0.0;
        for (std::size_t i = 0; i < len && s0 + i < n; ++i) {
          const double f = f_lo + 2000.0 * static_cast<double>(i) / len;
          phase += kTwoPi * f / rate;
          x[s0 + i] += 0.2 * Envelope(i, len, len / 4) * std::sin(phase);
        }
      }
      break;
    }
  }
  return x;
}

}  // namespace

void SyntheticSpec::Validate() const {
  Require(num_keywords >= 1 && num_keywords <= kMaxSyntheticKeywords, ErrorKind::kConfig,
          "num_keywords must lie in [1, " + std::to_string(kMaxSyntheticKeywords) + "]");
  Require(num_events >= 2 && num_events - 1 <= kMaxSyntheticTextures, ErrorKind::kConfig,
          "num_events must lie in [2, " + std::to_string(kMaxSyntheticTextures + 1) + "]");
  Require(train_per_class >= 1 && valid_per_class >= 1 && eval_per_class >= 1,
          ErrorKind::kConfig, "per-class counts must be positive");
  Require(negative_streams >= 0, ErrorKind::kConfig, "negative_streams must be non-negative");
  Require(kws_min_seconds >= 0.7 && kws_max_seconds >= kws_min_seconds, ErrorKind::kConfig,
          "keyword clip durations must satisfy 0.7 <= min <= max");
  Require(at_seconds >= 2.0 && negative_seconds > 0.0, ErrorKind::kConfig,
          "clip durations too short");
  Require(noise_level >= 0.0 && noise_level < 0.5, ErrorKind::kConfig,
          "noise_level must lie in [0, 0.5)");
  Require(sample_rate >= 16000, ErrorKind::kConfig, "sample_rate must be at least 16 kHz");
}

LabelVocabulary SyntheticVocabulary(const SyntheticSpec& spec) {
  std::vector<std::string> at = {kSpeechLabel};
  for (int e = 0; e + 1 < spec.num_events; ++e) at.emplace_back(kTextureNames[e]);
  std::vector<std::string> kws;
  for (int k = 0; k < spec.num_keywords; ++k) kws.emplace_back(kKeywordNames[k]);
  return LabelVocabulary::Merge(std::move(at), std::move(kws));
}

Waveform SynthesizeKeyword(const SyntheticSpec& spec, int keyword, std::uint64_t stream) {
  Require(keyword >= 0 && keyword < kMaxSyntheticKeywords, ErrorKind::kArgument,
          "keyword index out of range");
  auto rng = StreamRng(spec.seed, kKeywordTag, keyword, stream);
  const int rate = spec.sample_rate;
  const auto n = Samples(Uniform(rng, spec.kws_min_seconds, spec.kws_max_seconds), rate);
  std::vector<double> x = Noise(rng, n, spec.noise_level);
  std::array<std::size_t, 3> lens{};
  std::size_t total = 0;
  for (auto& l : lens) total += l = Samples(Uniform(rng, 0.17, 0.22), rate);
  std::size_t pos = std::uniform_int_distribution<std::size_t>(0, n - total)(rng);
  const double amp = Uniform(rng, 0.15, 0.3);
  for (int s = 0; s < 3; ++s) {
    const double f0 = kContours[keyword][s] * Uniform(rng, 0.97, 1.03);
    AddSyllable(x, pos, lens[s], f0, amp, rate, rng);
    pos += lens[s];
  }
  return ToWaveform(x, rate);
}

Waveform SynthesizeUnknownWord(const SyntheticSpec& spec, std::uint64_t stream) {
  auto rng = StreamRng(spec.seed, kUnknownTag, 0, stream);
  const int rate = spec.sample_rate;
  const auto n = Samples(Uniform(rng, spec.kws_min_seconds, spec.kws_max_seconds), rate);
  std::vector<double> x = Noise(rng, n, spec.noise_level);
  const int syllables = std::uniform_int_distribution<int>(2, 4)(rng);
  std::vector<std::size_t> lens(syllables);
  std::size_t total = 0;
  for (auto& l : lens) total += l = Samples(Uniform(rng, 0.1, 0.2), rate);
  std::size_t pos = std::uniform_int_distribution<std::size_t>(0, n - total)(rng);
  const double amp = Uniform(rng, 0.15, 0.3);
  for (auto len : lens) {
    AddSyllable(x, pos, len, Uniform(rng, 130.0, 700.0), amp, rate, rng);
    pos += len;
  }
  return ToWaveform(x, rate);
}

Waveform SynthesizeEventClip(const SyntheticSpec& spec, int texture, std::uint64_t stream) {
  Require(texture >= 0 && texture < kMaxSyntheticTextures, ErrorKind::kArgument,
          "texture index out of range");
  auto rng = StreamRng(spec.seed, kEventTag, texture, stream);
  const int rate = spec.sample_rate;
  const auto n = Samples(spec.at_seconds, rate);
  std::vector<double> x = Noise(rng, n, spec.noise_level);
  // The event covers 40-80 % of the clip; the rest is background only.
  const auto len = Samples(spec.at_seconds * Uniform(rng, 0.4, 0.8), rate);
  const auto start = std::uniform_int_distribution<std::size_t>(0, n - len)(rng);
  const double gain = Uniform(rng, 0.7, 1.3);
  const std::vector<double> t = Texture(texture, len, rate, rng);
  for (std::size_t i = 0; i < len; ++i) {
    x[start + i] += gain * Envelope(i, len, Samples(0.05, rate)) * t[i];
  }
  return ToWaveform(x, rate);
}

Waveform SynthesizeNegativeStream(const SyntheticSpec& spec, std::uint64_t stream) {
  auto rng = StreamRng(spec.seed, kNegativeTag, 0, stream);
  const int rate = spec.sample_rate;
  const auto n = Samples(spec.negative_seconds, rate);
  std::vector<double> x;
  if (stream % 2 == 0) {
    // Colored noise not used in training: brown or pink-ish at random level.
    x = Noise(rng, n, Uniform(rng, 0.5, 2.0) * std::max(spec.noise_level, 0.01));
    LowPass(x, Uniform(rng, 0.3, 0.95));
    for (auto& v : x) v *= 3.0;
  } else {
    // Unseen tone signatures: steady beeps and two-tone dial sounds.
    x = Noise(rng, n, spec.noise_level);
    for (double onset = Uniform(rng, 0.0, 0.3); onset < spec.negative_seconds;
         onset += Uniform(rng, 0.4, 1.2)) {
      const auto s0 = Samples(onset, rate);
      const auto len = Samples(Uniform(rng, 0.1, 0.4), rate);
      const double f1 = Uniform(rng, 900.0, 3000.0);
      const double f2 = std::bernoulli_distribution(0.5)(rng) ? Uniform(rng, 900.0, 3000.0) : 0.0;
      for (std::size_t i = 0; i < len && s0 + i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        const double v = std::sin(kTwoPi * f1 * t) + (f2 > 0.0 ? std::sin(kTwoPi * f2 * t) : 0.0);
        x[s0 + i] += 0.15 * Envelope(i, len, Samples(0.01, rate)) * v;
      }
    }
  }
  return ToWaveform(x, rate);
}

namespace {

struct Writer {
  std::filesystem::path root;

  std::string Write(const Waveform& w, const std::string& rel) {
    const auto path = root / "audio" / rel;
    if (std::filesystem::exists(path)) Fail(ErrorKind::kIo, "refusing to overwrite " + path.string());
    std::filesystem::create_directories(path.parent_path());
    WriteWav(path.string(), w);
    return ("audio" / std::filesystem::path(rel)).string();
  }

  std::string Manifest(const std::string& name, const std::vector<ManifestEntry>& entries) {
    const auto path = (root / name).string();
    WriteManifest(path, entries);
    return path;
  }
};

std::string ClipName(const std::string& split, const std::string& cls, int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", i);
  return split + "/" + cls + "_" + buf + ".wav";
}

}  // namespace

SyntheticDataset GenerateSyntheticDataset(const SyntheticSpec& spec, const std::string& dir) {
  spec.Validate();
  const std::filesystem::path root(dir);
  for (const char* name : {"vocab.txt", "train_kws.jsonl", "train_at.jsonl", "valid.jsonl",
                           "eval_kws.jsonl", "eval_at.jsonl", "eval_neg.jsonl"}) {
    if (std::filesystem::exists(root / name)) {
      Fail(ErrorKind::kIo, "output already exists: " + (root / name).string());
    }
  }
  std::filesystem::create_directories(root);
  Writer out{root};

  SyntheticDataset ds;
  ds.vocab = SyntheticVocabulary(spec);
  ds.vocab_path = (root / "vocab.txt").string();
  ds.vocab.Save(ds.vocab_path);

  // Streams are disjoint per split so no clip is shared between splits.
  struct Split {
    const char* name;
    int count;
    std::uint64_t base;
  };
  const Split splits[] = {{"train", spec.train_per_class, 0},
                          {"valid", spec.valid_per_class, 1'000'000},
                          {"eval", spec.eval_per_class, 2'000'000}};
  std::vector<ManifestEntry> train_kws, train_at, valid, eval_kws, eval_at, eval_neg;
  for (const Split& s : splits) {
    std::vector<ManifestEntry>& kws_out = s.base == 0 ? train_kws : s.base == 1'000'000 ? valid : eval_kws;
    std::vector<ManifestEntry>& at_out = s.base == 0 ? train_at : s.base == 1'000'000 ? valid : eval_at;
    for (int k = 0; k < spec.num_keywords; ++k) {
      const std::string name = kKeywordNames[k];
      for (int i = 0; i < s.count; ++i) {
        const auto w = SynthesizeKeyword(spec, k, s.base + i);
        kws_out.push_back({out.Write(w, ClipName(s.name, name, i)), {name}, {}, s.name,
                           SourceKind::kKws});
      }
    }
    for (int i = 0; i < s.count; ++i) {
      const auto w = SynthesizeUnknownWord(spec, s.base + i);
      kws_out.push_back({out.Write(w, ClipName(s.name, kUnknownKeyword, i)), {kUnknownKeyword},
                         {}, s.name, SourceKind::kKws});
    }
    for (int e = 0; e + 1 < spec.num_events; ++e) {
      const std::string name = kTextureNames[e];
      for (int i = 0; i < s.count; ++i) {
        const auto w = SynthesizeEventClip(spec, e, s.base + i);
        at_out.push_back({out.Write(w, ClipName(s.name, name, i)), {name}, {}, s.name,
                          SourceKind::kAt});
      }
    }
  }
  for (int i = 0; i < spec.negative_streams; ++i) {
    const auto w = SynthesizeNegativeStream(spec, 3'000'000 + i);
    eval_neg.push_back({out.Write(w, ClipName("neg", "stream", i)), {}, {}, "eval-neg",
                        SourceKind::kAt});
  }

  ds.train_kws = out.Manifest("train_kws.jsonl", train_kws);
  ds.train_at = out.Manifest("train_at.jsonl", train_at);
  ds.valid = out.Manifest("valid.jsonl", valid);
  ds.eval_kws = out.Manifest("eval_kws.jsonl", eval_kws);
  ds.eval_at = out.Manifest("eval_at.jsonl", eval_at);
  ds.eval_neg = out.Manifest("eval_neg.jsonl", eval_neg);
  ds.num_train_clips = train_kws.size() + train_at.size();
  return ds;
}

}  // namespace ukat
