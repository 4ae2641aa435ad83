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

#include <fftw3.h>

#include <algorithm>
#include <memory>
#include <mutex>

#include <nlohmann/json.hpp>

#include "ukat/error.h"

namespace ukat {

void FrontendConfig::Validate() const {
  Require(sample_rate > 0, ErrorKind::kConfig, "frontend sample_rate must be positive");
  Require(n_fft > 0 && win_length > 0 && win_length <= n_fft, ErrorKind::kConfig,
          "frontend window must satisfy 0 < win_length <= n_fft");
  Require(hop_length > 0, ErrorKind::kConfig, "frontend hop_length must be positive");
  Require(n_mels >= 1, ErrorKind::kConfig, "frontend n_mels must be >= 1");
  Require(eps > 0.0, ErrorKind::kConfig, "frontend eps must be positive");
  Require(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0,
          ErrorKind::kConfig, "frontend requires 0 <= f_min < f_max <= Nyquist");
}

void to_json(nlohmann::json& j, const FrontendConfig& cfg) {
  j = nlohmann::json{{"sample_rate", cfg.sample_rate}, {"n_fft", cfg.n_fft},
                     {"win_length", cfg.win_length},   {"hop_length", cfg.hop_length},
                     {"n_mels", cfg.n_mels},           {"f_min", cfg.f_min},
                     {"f_max", cfg.f_max},             {"eps", cfg.eps}};
}

void from_json(const nlohmann::json& j, FrontendConfig& cfg) {
  FrontendConfig d;
  cfg.sample_rate = j.value("sample_rate", d.sample_rate);
  cfg.n_fft = j.value("n_fft", d.n_fft);
  cfg.win_length = j.value("win_length", d.win_length);
  cfg.hop_length = j.value("hop_length", d.hop_length);
  cfg.n_mels = j.value("n_mels", d.n_mels);
  cfg.f_min = j.value("f_min", d.f_min);
  cfg.f_max = j.value("f_max", d.f_max);
  cfg.eps = j.value("eps", d.eps);
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank BuildMelFilterbank(int n_fft, int n_mels, int sample_rate,
                                 double f_min, double f_max) {
  Require(n_fft >= 2, ErrorKind::kArgument, "n_fft must be >= 2");
  Require(n_mels >= 1, ErrorKind::kArgument, "n_mels must be >= 1");
  Require(sample_rate > 0, ErrorKind::kArgument, "sample_rate must be positive");
  Require(f_min >= 0.0 && f_min < f_max, ErrorKind::kArgument,
          "filterbank requires 0 <= f_min < f_max");
  Require(f_max <= sample_rate / 2.0, ErrorKind::kArgument,
          "f_max " + std::to_string(f_max) + " Hz exceeds the Nyquist frequency");

  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_bins = n_fft / 2 + 1;
  fb.weights.assign(static_cast<std::size_t>(n_mels) * fb.n_bins, 0.0);
  fb.edges_hz.resize(n_mels + 2);
  const double mel_lo = HzToMel(f_min);
  const double mel_hi = HzToMel(f_max);
  for (int i = 0; i < n_mels + 2; ++i) {
    fb.edges_hz[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }
  const double bin_hz = static_cast<double>(sample_rate) / n_fft;
  for (int m = 0; m < n_mels; ++m) {
    const double lo = fb.edges_hz[m];
    const double mid = fb.edges_hz[m + 1];
    const double hi = fb.edges_hz[m + 2];
    for (int k = 0; k < fb.n_bins; ++k) {
      const double f = k * bin_hz;
      const double w = std::max(0.0, std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid)));
      fb.weights[static_cast<std::size_t>(m) * fb.n_bins + k] = w;
    }
  }
  return fb;
}

int NumFrames(std::size_t num_samples, const FrontendConfig& cfg) {
  const std::size_t len = std::max<std::size_t>(num_samples, cfg.win_length);
  return static_cast<int>((len - cfg.win_length) / cfg.hop_length) + 1;
}

namespace {

std::mutex& PlannerMutex() {
  static std::mutex mu;
  return mu;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(fftw_malloc(n)) {}
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* ptr;
};

// Planning is not thread-safe in FFTW, execution with new arrays is. Plans
// are cached per size for the life of the process.
fftw_plan RealForwardPlan(int n) {
  std::lock_guard<std::mutex> lock(PlannerMutex());
  static std::vector<std::pair<int, fftw_plan>> plans;
  for (const auto& [size, plan] : plans) {
    if (size == n) return plan;
  }
  FftwBuffer in(sizeof(double) * n);
  FftwBuffer out(sizeof(fftw_complex) * (n / 2 + 1));
  fftw_plan plan = fftw_plan_dft_r2c_1d(n, static_cast<double*>(in.ptr),
                                        static_cast<fftw_complex*>(out.ptr),
                                        FFTW_ESTIMATE);
  plans.emplace_back(n, plan);
  return plan;
}

}  // namespace

LogMelExtractor::LogMelExtractor(const FrontendConfig& cfg) : cfg_(cfg) {
  cfg_.Validate();
  filterbank_ = BuildMelFilterbank(cfg_.n_fft, cfg_.n_mels, cfg_.sample_rate,
                                   cfg_.f_min, cfg_.f_max);
  // Periodic Hann.
  window_.resize(cfg_.win_length);
  for (int i = 0; i < cfg_.win_length; ++i) {
    window_[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / cfg_.win_length);
  }
}

LogMelSpectrogram LogMelExtractor::Extract(const Waveform& w) const {
  Require(!w.empty(), ErrorKind::kEmptyInput, "cannot extract features from an empty waveform");
  Require(w.sample_rate == cfg_.sample_rate, ErrorKind::kArgument,
          "waveform is " + std::to_string(w.sample_rate) + " Hz, frontend expects " +
              std::to_string(cfg_.sample_rate) + " Hz; resample first");

  const int n_fft = cfg_.n_fft;
  const int n_bins = n_fft / 2 + 1;
  const int frames = NumFrames(w.size(), cfg_);
  const double log_floor = cfg_.log_floor();

  LogMelSpectrogram out;
  out.frames = frames;
  out.n_mels = cfg_.n_mels;
  out.frame_hop = static_cast<double>(cfg_.hop_length) / cfg_.sample_rate;
  out.values.resize(static_cast<std::size_t>(frames) * cfg_.n_mels);

  const fftw_plan plan = RealForwardPlan(n_fft);
  FftwBuffer in_buf(sizeof(double) * n_fft);
  FftwBuffer out_buf(sizeof(fftw_complex) * n_bins);
  auto* in = static_cast<double*>(in_buf.ptr);
  auto* spec = static_cast<fftw_complex*>(out_buf.ptr);
  std::vector<double> power(n_bins);

  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * cfg_.hop_length;
    std::fill(in, in + n_fft, 0.0);
    for (int i = 0; i < cfg_.win_length; ++i) {
      const std::size_t idx = start + i;
      if (idx < w.size()) in[i] = window_[i] * w.samples[idx];
    }
    fftw_execute_dft_r2c(plan, in, spec);
    for (int k = 0; k < n_bins; ++k) {
      power[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    }
    float* row = &out.values[static_cast<std::size_t>(t) * cfg_.n_mels];
    for (int m = 0; m < cfg_.n_mels; ++m) {
      const double* weights = &filterbank_.weights[static_cast<std::size_t>(m) * n_bins];
      double energy = 0.0;
      for (int k = 0; k < n_bins; ++k) energy += weights[k] * power[k];
      row[m] = static_cast<float>(std::max(std::log(energy + cfg_.eps), log_floor));
    }
  }
  return out;
}

LogMelSpectrogram ExtractLogMel(const Waveform& w, const FrontendConfig& cfg) {
  return LogMelExtractor(cfg).Extract(w);
}

}  // namespace ukat
