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

#ifndef UKAT_MODEL_H_
#define UKAT_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ukat/frontend.h"
#include "ukat/labels.h"

namespace ukat {

// One stage of inverted-residual blocks: `repeats` blocks, the first of
// which applies `stride` (both axes).
struct BlockSpec {
  int expansion = 6;
  int channels = 16;
  int stride = 1;
  int repeats = 1;

  bool operator==(const BlockSpec&) const = default;
};

struct ArchitectureConfig {
  int input_mels = 64;
  int stem_channels = 32;
  std::vector<BlockSpec> blocks;
  int embedding_dim = 1280;
  int num_outputs = 0;
  double width_multiplier = 1.0;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  // Standard MobileNetV2 layout on a 1-channel time x mel image.
  static ArchitectureConfig Reference(int num_outputs);
  // Scaled-down layout used for desk-scale training runs.
  static ArchitectureConfig Compact(int num_outputs);
  // Two blocks, F = 32. Small enough for exhaustive gradient checks.
  static ArchitectureConfig Tiny(int num_outputs);
  // Resolves "reference" | "compact" | "tiny".
  static ArchitectureConfig Named(const std::string& name, int num_outputs);

  // Channel counts after the width multiplier.
  int ScaledChannels(int channels) const;
  int ScaledEmbedding() const;

  void Validate() const;
  bool operator==(const ArchitectureConfig&) const = default;
};

void to_json(nlohmann::json& j, const BlockSpec& b);
void from_json(const nlohmann::json& j, BlockSpec& b);
void to_json(nlohmann::json& j, const ArchitectureConfig& cfg);
void from_json(const nlohmann::json& j, ArchitectureConfig& cfg);

struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
  // Running batch-norm statistics are stored but not trained.
  bool trainable = true;

  std::size_t numel() const { return data.size(); }
  bool operator==(const Tensor&) const = default;
};

std::size_t ShapeNumel(const std::vector<int>& shape);

// A complete, self-describing classifier: architecture, front-end, label
// space and named parameter tensors.
struct Model {
  ArchitectureConfig arch;
  FrontendConfig frontend;
  LabelVocabulary vocab;
  std::vector<Tensor> tensors;

  const Tensor& tensor(const std::string& name) const;
  Tensor& tensor(const std::string& name);
  int TensorIndex(const std::string& name) const;  // -1 when absent

  bool operator==(const Model&) const = default;
};

// Deterministic initialization: He-uniform convolution kernels, unit scale
// and zero shift for normalization, U(+-1/sqrt(F)) classifier weights and
// zero classifier bias.
Model BuildModel(const ArchitectureConfig& arch, const LabelVocabulary& vocab,
                 std::uint64_t seed, const FrontendConfig& frontend = {});

// Trainable element count (running statistics excluded).
std::size_t CountParameters(const Model& model);
// Every stored element, running statistics included.
std::size_t CountStoredElements(const Model& model);

// Keeps only the classifier rows of `keep`, in that order. Every other
// tensor is copied unchanged.
Model StripOutput(const Model& model, const std::vector<std::string>& keep);

// Binary container: "UKAT", u32 version, u32 header length, JSON header,
// padding to a 16-byte boundary, little-endian f32 tensor data.
inline constexpr std::uint32_t kModelVersion = 1;
std::vector<std::uint8_t> SerializeModel(const Model& model);
Model DeserializeModel(std::span<const std::uint8_t> bytes);
void SaveModel(const Model& model, const std::string& path);
Model LoadModel(const std::string& path);

// Header JSON only, for inspection.
nlohmann::json ReadModelHeader(const std::string& path);

}  // namespace ukat

#endif  // UKAT_MODEL_H_
