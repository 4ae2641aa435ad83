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

#include "ukat/audio.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "ukat/error.h"

namespace ukat {

void ValidateWaveform(const Waveform& w) {
  Require(w.sample_rate > 0, ErrorKind::kArgument,
          "sample rate must be positive, got " + std::to_string(w.sample_rate));
  for (float s : w.samples) {
    if (!std::isfinite(s)) Fail(ErrorKind::kNumeric, "non-finite audio sample");
  }
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t ReadU32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t ReadU16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void PutU32(std::vector<std::uint8_t>* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void PutU16(std::vector<std::uint8_t>* out, std::uint16_t v) {
  out->push_back(static_cast<std::uint8_t>(v));
  out->push_back(static_cast<std::uint8_t>(v >> 8));
}

void PutTag(std::vector<std::uint8_t>* out, const char* tag) {
  out->insert(out->end(), tag, tag + 4);
}

}  // namespace

Waveform DecodeWav(const std::vector<std::uint8_t>& bytes) {
  const std::size_t n = bytes.size();
  if (n < 12) throw FormatError("file too short for a RIFF header", n);
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0) {
    throw FormatError("missing RIFF magic", 0);
  }
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("missing WAVE tag", 8);
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = ReadU32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > n) {
        throw FormatError("truncated fmt chunk", pos);
      }
      format = ReadU16(bytes.data() + body);
      channels = ReadU16(bytes.data() + body + 2);
      rate = ReadU32(bytes.data() + body + 4);
      bits = ReadU16(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        if (size < 26) throw FormatError("truncated extensible fmt chunk", pos);
        format = ReadU16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk", pos);
      if (channels == 0) throw FormatError("zero channels", pos);
      if (rate == 0) throw FormatError("zero sample rate", pos);
      const bool pcm16 = format == kFormatPcm && bits == 16;
      const bool f32 = format == kFormatFloat && bits == 32;
      if (!pcm16 && !f32) {
        throw FormatError("unsupported encoding: format " +
                              std::to_string(format) + ", " +
                              std::to_string(bits) + " bits",
                          pos);
      }
      // Some writers leave the size field at 0 or 0xFFFFFFFF for streams.
      std::size_t avail = std::min<std::size_t>(size, n - body);
      const std::size_t frame_bytes = static_cast<std::size_t>(bits / 8) * channels;
      const std::size_t frames = avail / frame_bytes;
      Waveform w;
      w.sample_rate = static_cast<int>(rate);
      w.samples.resize(frames);
      const std::uint8_t* p = bytes.data() + body;
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const std::uint8_t* s = p + (i * channels + c) * (bits / 8);
          if (pcm16) {
            acc += static_cast<std::int16_t>(ReadU16(s)) / 32768.0;
          } else {
            float v;
            std::uint32_t raw = ReadU32(s);
            std::memcpy(&v, &raw, 4);
            acc += v;
          }
        }
        w.samples[i] = static_cast<float>(acc / channels);
      }
      ValidateWaveform(w);
      return w;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError("no data chunk", pos);
}

Waveform ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open audio file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return DecodeWav(bytes);
  } catch (const FormatError& e) {
    throw e.WithContext(path);
  }
}

std::vector<std::uint8_t> EncodeWav(const Waveform& w, WavEncoding encoding) {
  ValidateWaveform(w);
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(w.samples.size() * (bits / 8));
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  PutTag(&out, "RIFF");
  PutU32(&out, 36 + data_bytes);
  PutTag(&out, "WAVE");
  PutTag(&out, "fmt ");
  PutU32(&out, 16);
  PutU16(&out, encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat);
  PutU16(&out, 1);
  PutU32(&out, static_cast<std::uint32_t>(w.sample_rate));
  PutU32(&out, static_cast<std::uint32_t>(w.sample_rate) * (bits / 8));
  PutU16(&out, bits / 8);
  PutU16(&out, bits);
  PutTag(&out, "data");
  PutU32(&out, data_bytes);
  for (float s : w.samples) {
    if (encoding == WavEncoding::kPcm16) {
      const double scaled = std::round(std::clamp(s, -1.0f, 1.0f) * 32767.0);
      PutU16(&out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    } else {
      std::uint32_t raw;
      std::memcpy(&raw, &s, 4);
      PutU32(&out, raw);
    }
  }
  return out;
}

void WriteWav(const std::string& path, const Waveform& w, WavEncoding encoding) {
  const auto bytes = EncodeWav(w, encoding);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot write audio file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorKind::kIo, "short write: " + path);
}

namespace {

constexpr int kTapsPerPhase = 32;
constexpr double kKaiserBeta = 8.6;

double Sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace

Waveform Resample(const Waveform& w, int target_rate) {
  Require(!w.empty(), ErrorKind::kEmptyInput, "cannot resample an empty waveform");
  Require(target_rate > 0 && w.sample_rate > 0, ErrorKind::kArgument,
          "sample rates must be positive");
  if (target_rate == w.sample_rate) return w;

  const std::int64_t g = std::gcd(target_rate, w.sample_rate);
  const std::int64_t up = target_rate / g;
  const std::int64_t down = w.sample_rate / g;
  const double cutoff = std::min(1.0, static_cast<double>(up) / down);
  const double half_width = kTapsPerPhase / 2;
  const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);

  // One normalized kernel per fractional phase; tap j covers input offset
  // j - (kTapsPerPhase/2 - 1) relative to floor(position).
  std::vector<double> table(static_cast<std::size_t>(up) * kTapsPerPhase);
  for (std::int64_t phase = 0; phase < up; ++phase) {
    const double frac = static_cast<double>(phase) / up;
    double* taps = &table[static_cast<std::size_t>(phase) * kTapsPerPhase];
    double sum = 0.0;
    for (int j = 0; j < kTapsPerPhase; ++j) {
      const double d = (j - (kTapsPerPhase / 2 - 1)) - frac;
      const double r = d / half_width;
      double win = 0.0;
      if (std::abs(r) < 1.0) {
        win = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) / i0_beta;
      }
      taps[j] = cutoff * Sinc(cutoff * d) * win;
      sum += taps[j];
    }
    for (int j = 0; j < kTapsPerPhase; ++j) taps[j] /= sum;
  }

  const auto in_len = static_cast<std::int64_t>(w.size());
  const std::int64_t out_len = (in_len * up + down / 2) / down;
  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(out_len));
  for (std::int64_t n = 0; n < out_len; ++n) {
    const std::int64_t num = n * down;
    const std::int64_t base = num / up;
    const std::int64_t phase = num % up;
    const double* taps = &table[static_cast<std::size_t>(phase) * kTapsPerPhase];
    double acc = 0.0;
    for (int j = 0; j < kTapsPerPhase; ++j) {
      const std::int64_t idx = base + j - (kTapsPerPhase / 2 - 1);
      if (idx >= 0 && idx < in_len) acc += taps[j] * w.samples[static_cast<std::size_t>(idx)];
    }
    out.samples[static_cast<std::size_t>(n)] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace ukat
