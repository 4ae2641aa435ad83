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

#ifndef UKAT_AUDIO_H_
#define UKAT_AUDIO_H_

#include <cstdint>
#include <string>
#include <vector>

namespace ukat {

// Mono PCM audio. Samples are nominally in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Throws kArgument on a non-positive rate and kNumeric on non-finite samples.
void ValidateWaveform(const Waveform& w);

enum class WavEncoding { kPcm16, kFloat32 };

// Reads a RIFF/WAVE file holding 16-bit PCM or 32-bit IEEE float data.
// Multi-channel input is averaged down to mono.
Waveform ReadWav(const std::string& path);
Waveform DecodeWav(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> EncodeWav(const Waveform& w,
                                    WavEncoding encoding = WavEncoding::kPcm16);
void WriteWav(const std::string& path, const Waveform& w,
              WavEncoding encoding = WavEncoding::kPcm16);

// Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel
// (beta 8.6, 32 taps per phase). Output length is
// round(len * target_rate / source_rate); identity when the rates match.
Waveform Resample(const Waveform& w, int target_rate);

}  // namespace ukat

#endif  // UKAT_AUDIO_H_
