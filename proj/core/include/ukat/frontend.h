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

#ifndef UKAT_FRONTEND_H_
#define UKAT_FRONTEND_H_

#include <cmath>
#include <vector>

#include <nlohmann/json_fwd.hpp>
#include "ukat/audio.h"

namespace ukat {

struct FrontendConfig {
  int sample_rate = 16000;
  int n_fft = 512;       // 32 ms window at 16 kHz
  int win_length = 512;
  int hop_length = 160;  // 10 ms
  int n_mels = 64;
  double f_min = 0.0;
  double f_max = 8000.0;
  double eps = 1e-10;

  // Value of a frame with zero energy: ln(eps).
  double log_floor() const { return std::log(eps); }

  void Validate() const;
  bool operator==(const FrontendConfig&) const = default;
};

void to_json(nlohmann::json& j, const FrontendConfig& cfg);
void from_json(const nlohmann::json& j, FrontendConfig& cfg);

// HTK mel scale.
double HzToMel(double hz);
double MelToHz(double mel);

// Triangular filters, rows ordered by ascending center frequency.
struct MelFilterbank {
  int n_mels = 0;
  int n_bins = 0;  // n_fft / 2 + 1
  std::vector<double> weights;       // row-major n_mels x n_bins
  std::vector<double> edges_hz;      // n_mels + 2 band edges

  double at(int mel, int bin) const {
    return weights[static_cast<std::size_t>(mel) * n_bins + bin];
  }
  double center_hz(int mel) const { return edges_hz[mel + 1]; }
};

MelFilterbank BuildMelFilterbank(int n_fft, int n_mels, int sample_rate,
                                 double f_min, double f_max);

// frames x n_mels, row-major (time-major).
struct LogMelSpectrogram {
  int frames = 0;
  int n_mels = 0;
  double frame_hop = 0.01;
  std::vector<float> values;

  float at(int t, int m) const {
    return values[static_cast<std::size_t>(t) * n_mels + m];
  }
};

// Number of frames produced for `num_samples` input samples; inputs shorter
// than one window count as a single zero-padded frame.
int NumFrames(std::size_t num_samples, const FrontendConfig& cfg);

// Stateless feature extractor. Holds the precomputed window and filterbank;
// Extract() is const and safe to call from several threads.
class LogMelExtractor {
 public:
  explicit LogMelExtractor(const FrontendConfig& cfg = {});

  LogMelSpectrogram Extract(const Waveform& w) const;
  const FrontendConfig& config() const { return cfg_; }
  const MelFilterbank& filterbank() const { return filterbank_; }

 private:
  FrontendConfig cfg_;
  MelFilterbank filterbank_;
  std::vector<double> window_;
};

// Convenience wrapper constructing a one-off extractor.
LogMelSpectrogram ExtractLogMel(const Waveform& w, const FrontendConfig& cfg = {});

}  // namespace ukat

#endif  // UKAT_FRONTEND_H_
