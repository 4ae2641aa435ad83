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

#include "ukat/frontend.h"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "ukat/error.h"

namespace ukat {
namespace {

// Frame starts 0, hop, 2*hop, ... while a full window fits.
int EnumerateFrames(std::size_t len, int n_fft, int hop) {
  const std::size_t padded = std::max<std::size_t>(len, n_fft);
  int count = 0;
  for (std::size_t start = 0; start + n_fft <= padded; start += hop) ++count;
  return count;
}

// Direct O(N^2) DFT front-end used as an independent oracle.
std::vector<double> OracleLogMel(const std::vector<float>& x, const FrontendConfig& cfg,
                                 const MelFilterbank& fb, std::size_t start) {
  const int n = cfg.n_fft;
  std::vector<double> power(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (int t = 0; t < n; ++t) {
      const double win = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * t / n);
      const double v = start + t < x.size() ? x[start + t] : 0.0;
      acc += win * v * std::polar(1.0, -2.0 * std::numbers::pi * k * t / n);
    }
    power[k] = std::norm(acc);
  }
  std::vector<double> out(cfg.n_mels);
  for (int m = 0; m < cfg.n_mels; ++m) {
    double e = 0.0;
    for (int k = 0; k <= n / 2; ++k) e += fb.at(m, k) * power[k];
    out[m] = std::max(std::log(e + cfg.eps), cfg.log_floor());
  }
  return out;
}

TEST(MelTest, HtkFormula) {
  EXPECT_NEAR(HzToMel(700.0), 2595.0 * std::log10(2.0), 1e-9);
  for (double hz : {0.0, 100.0, 1000.0, 7999.0}) EXPECT_NEAR(MelToHz(HzToMel(hz)), hz, 1e-9);
}

TEST(MelTest, FilterbankShapeAndCenters) {
  const MelFilterbank fb = BuildMelFilterbank(512, 64, 16000, 0.0, 8000.0);
  EXPECT_EQ(fb.n_mels, 64);
  EXPECT_EQ(fb.n_bins, 257);
  ASSERT_EQ(fb.weights.size(), 64u * 257u);
  for (double w : fb.weights) EXPECT_GE(w, 0.0);
  const double top = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
  for (int m = 0; m < 64; ++m) {
    const double mel = top * (m + 1) / 65.0;
    const double hz = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
    EXPECT_NEAR(fb.center_hz(m), hz, 1e-6 * hz);
    if (m > 0) {
      EXPECT_GT(fb.center_hz(m), fb.center_hz(m - 1));
    }
    double row = 0.0;
    for (int k = 0; k < 257; ++k) row += fb.at(m, k);
    EXPECT_GT(row, 0.0) << "row " << m;
  }
  for (int k = 1; k < 256; ++k) {
    double col = 0.0;
    for (int m = 0; m < 64; ++m) col += fb.at(m, k);
    EXPECT_GT(col, 0.0) << "bin " << k;
  }
}

TEST(MelTest, RejectsAboveNyquist) {
  try {
    BuildMelFilterbank(512, 64, 16000, 0.0, 8001.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kArgument);
  }
}

TEST(LogMelTest, ShapeLawMatchesFrameEnumeration) {
  const FrontendConfig cfg;
  for (std::size_t len = 1; len <= 20000; ++len) {
    ASSERT_EQ(NumFrames(len, cfg), EnumerateFrames(len, 512, 160)) << len;
  }
}

TEST(LogMelTest, OneSecondIs97By64) {
  Waveform w;
  w.samples.assign(16000, 0.1f);
  const LogMelSpectrogram s = ExtractLogMel(w);
  EXPECT_EQ(s.frames, 97);
  EXPECT_EQ(s.n_mels, 64);
  EXPECT_EQ(s.values.size(), 97u * 64u);
}

TEST(LogMelTest, SilenceIsLogFloor) {
  Waveform w;
  w.samples.assign(3000, 0.0f);
  const FrontendConfig cfg;
  for (float v : ExtractLogMel(w).values) EXPECT_EQ(v, static_cast<float>(cfg.log_floor()));
}

TEST(LogMelTest, ShortInputIsOneFrame) {
  Waveform w;
  w.samples.assign(100, 0.3f);
  EXPECT_EQ(ExtractLogMel(w).frames, 1);
}

TEST(LogMelTest, MatchesDirectDftOracle) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 0.2);
  Waveform w;
  for (int i = 0; i < 2000; ++i) w.samples.push_back(static_cast<float>(g(rng)));
  const FrontendConfig cfg;
  const LogMelExtractor ex(cfg);
  const LogMelSpectrogram s = ex.Extract(w);
  ASSERT_EQ(s.frames, NumFrames(w.size(), cfg));
  for (int t : {0, 3, s.frames - 1}) {
    const auto oracle = OracleLogMel(w.samples, cfg, ex.filterbank(), static_cast<std::size_t>(t) * 160);
    for (int m = 0; m < 64; ++m) EXPECT_NEAR(s.at(t, m), oracle[m], 1e-4) << t << "," << m;
  }
}

TEST(LogMelTest, GainShiftsByTwoLogTen) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.05);
  Waveform w, loud;
  for (int i = 0; i < 4000; ++i) {
    const float v = static_cast<float>(g(rng));
    w.samples.push_back(v);
    loud.samples.push_back(10.0f * v);
  }
  const auto a = ExtractLogMel(w);
  const auto b = ExtractLogMel(loud);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    EXPECT_NEAR(b.values[i] - a.values[i], 2.0 * std::log(10.0), 1e-3);
    EXPECT_GE(b.values[i], a.values[i]);
  }
}

TEST(LogMelTest, DeterministicAcrossExtractors) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Waveform w;
  for (int i = 0; i < 12345; ++i) w.samples.push_back(u(rng));
  const auto a = ExtractLogMel(w);
  const auto b = LogMelExtractor().Extract(w);
  EXPECT_EQ(a.values, b.values);
}

TEST(LogMelTest, SinePeaksAtItsMelBand) {
  const FrontendConfig cfg;
  const LogMelExtractor ex(cfg);
  Waveform w;
  for (int i = 0; i < 16000; ++i) w.samples.push_back(0.5f * std::sin(2.0 * std::numbers::pi * 1000.0 * i / 16000));
  const auto s = ex.Extract(w);
  int best = 0;
  for (int m = 1; m < 64; ++m) if (s.at(50, m) > s.at(50, best)) best = m;
  // The winning band's triangle must cover 1 kHz.
  EXPECT_LE(ex.filterbank().edges_hz[best], 1000.0);
  EXPECT_GE(ex.filterbank().edges_hz[best + 2], 1000.0);
}

TEST(LogMelTest, RejectsEmptyAndWrongRate) {
  Waveform empty;
  try {
    ExtractLogMel(empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyInput);
  }
  Waveform w;
  w.sample_rate = 8000;
  w.samples.assign(1000, 0.0f);
  try {
    ExtractLogMel(w);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kArgument);
  }
}

}  // namespace
}  // namespace ukat
