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

#include "ukat/model.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "ukat/error.h"
#include "ukat/network.h"

namespace ukat {

ArchitectureConfig ArchitectureConfig::Reference(int num_outputs) {
  ArchitectureConfig cfg;
  cfg.stem_channels = 32;
  cfg.blocks = {{1, 16, 1, 1}, {6, 24, 2, 2},  {6, 32, 2, 3},  {6, 64, 2, 4},
                {6, 96, 1, 3}, {6, 160, 2, 3}, {6, 320, 1, 1}};
  cfg.embedding_dim = 1280;
  cfg.num_outputs = num_outputs;
  return cfg;
}

ArchitectureConfig ArchitectureConfig::Compact(int num_outputs) {
  ArchitectureConfig cfg;
  cfg.stem_channels = 16;
  cfg.blocks = {{1, 16, 2, 1}, {4, 24, 2, 2}, {4, 48, 2, 2}};
  cfg.embedding_dim = 128;
  cfg.num_outputs = num_outputs;
  return cfg;
}

ArchitectureConfig ArchitectureConfig::Tiny(int num_outputs) {
  ArchitectureConfig cfg;
  cfg.stem_channels = 4;
  cfg.blocks = {{1, 4, 1, 1}, {2, 6, 2, 1}};
  cfg.embedding_dim = 32;
  cfg.num_outputs = num_outputs;
  return cfg;
}

ArchitectureConfig ArchitectureConfig::Named(const std::string& name, int num_outputs) {
  if (name == "reference") return Reference(num_outputs);
  if (name == "compact") return Compact(num_outputs);
  if (name == "tiny") return Tiny(num_outputs);
  Fail(ErrorKind::kConfig, "unknown architecture '" + name +
                               "' (expected reference, compact or tiny)");
}

namespace {

// Rounds to the nearest multiple of 8 without dropping more than 10%.
int MakeDivisible(double value, int divisor = 8) {
  int rounded = std::max(divisor, static_cast<int>(value + divisor / 2.0) / divisor * divisor);
  if (rounded < 0.9 * value) rounded += divisor;
  return rounded;
}

}  // namespace

int ArchitectureConfig::ScaledChannels(int channels) const {
  if (width_multiplier == 1.0) return channels;
  return MakeDivisible(channels * width_multiplier);
}

int ArchitectureConfig::ScaledEmbedding() const {
  if (width_multiplier <= 1.0) return embedding_dim;
  return MakeDivisible(embedding_dim * width_multiplier);
}

void ArchitectureConfig::Validate() const {
  Require(input_mels >= 1, ErrorKind::kConfig, "input_mels must be positive");
  Require(stem_channels >= 1, ErrorKind::kConfig, "stem_channels must be positive");
  Require(embedding_dim >= 1, ErrorKind::kConfig, "embedding_dim must be positive");
  Require(num_outputs >= 1, ErrorKind::kConfig, "num_outputs must be positive");
  Require(width_multiplier > 0.0, ErrorKind::kConfig, "width_multiplier must be positive");
  Require(bn_eps > 0.0 && bn_momentum > 0.0 && bn_momentum <= 1.0, ErrorKind::kConfig,
          "batch-norm eps/momentum out of range");
  for (const auto& b : blocks) {
    Require(b.expansion >= 1 && b.channels >= 1 && b.repeats >= 1 &&
                (b.stride == 1 || b.stride == 2),
            ErrorKind::kConfig, "block spec needs positive counts and stride 1 or 2");
  }
}

void to_json(nlohmann::json& j, const BlockSpec& b) {
  j = nlohmann::json{{"expansion", b.expansion},
                     {"channels", b.channels},
                     {"stride", b.stride},
                     {"repeats", b.repeats}};
}

void from_json(const nlohmann::json& j, BlockSpec& b) {
  b.expansion = j.at("expansion").get<int>();
  b.channels = j.at("channels").get<int>();
  b.stride = j.at("stride").get<int>();
  b.repeats = j.at("repeats").get<int>();
}

void to_json(nlohmann::json& j, const ArchitectureConfig& cfg) {
  j = nlohmann::json{{"input_mels", cfg.input_mels},
                     {"stem_channels", cfg.stem_channels},
                     {"blocks", cfg.blocks},
                     {"embedding_dim", cfg.embedding_dim},
                     {"num_outputs", cfg.num_outputs},
                     {"width_multiplier", cfg.width_multiplier},
                     {"bn_eps", cfg.bn_eps},
                     {"bn_momentum", cfg.bn_momentum}};
}

void from_json(const nlohmann::json& j, ArchitectureConfig& cfg) {
  cfg.input_mels = j.at("input_mels").get<int>();
  cfg.stem_channels = j.at("stem_channels").get<int>();
  cfg.blocks = j.at("blocks").get<std::vector<BlockSpec>>();
  cfg.embedding_dim = j.at("embedding_dim").get<int>();
  cfg.num_outputs = j.at("num_outputs").get<int>();
  cfg.width_multiplier = j.at("width_multiplier").get<double>();
  cfg.bn_eps = j.value("bn_eps", 1e-5);
  cfg.bn_momentum = j.value("bn_momentum", 0.1);
}

std::size_t ShapeNumel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

int Model::TensorIndex(const std::string& name) const {
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

const Tensor& Model::tensor(const std::string& name) const {
  const int i = TensorIndex(name);
  Require(i >= 0, ErrorKind::kArgument, "model has no tensor '" + name + "'");
  return tensors[i];
}

Tensor& Model::tensor(const std::string& name) {
  const int i = TensorIndex(name);
  Require(i >= 0, ErrorKind::kArgument, "model has no tensor '" + name + "'");
  return tensors[i];
}

// ---------------------------------------------------------------------------
// Graph

namespace {

class GraphBuilder {
 public:
  explicit GraphBuilder(Graph* g) : g_(g) {}

  int NewActivation() { return g_->num_activations++; }

  int Param(std::string name, std::vector<int> shape, ParamRole role, int fan_in = 1) {
    g_->params.push_back({std::move(name), std::move(shape), role, fan_in});
    return static_cast<int>(g_->params.size()) - 1;
  }

  int Conv3x3(const std::string& prefix, int in, int cin, int cout, int stride) {
    Op op{OpKind::kConv3x3, in, -1, NewActivation(), stride, cin, cout, {}};
    op.params = {Param(prefix + ".weight", {cout, cin, 3, 3}, ParamRole::kConvWeight, cin * 9)};
    return Push(std::move(op));
  }

  int Depthwise(const std::string& prefix, int in, int channels, int stride) {
    Op op{OpKind::kDepthwise3x3, in, -1, NewActivation(), stride, channels, channels, {}};
    op.params = {Param(prefix + ".weight", {channels, 1, 3, 3}, ParamRole::kConvWeight, 9)};
    return Push(std::move(op));
  }

  int Conv1x1(const std::string& prefix, int in, int cin, int cout) {
    Op op{OpKind::kConv1x1, in, -1, NewActivation(), 1, cin, cout, {}};
    op.params = {Param(prefix + ".weight", {cout, cin, 1, 1}, ParamRole::kConvWeight, cin)};
    return Push(std::move(op));
  }

  int BatchNorm(const std::string& prefix, int in, int channels) {
    Op op{OpKind::kBatchNorm, in, -1, NewActivation(), 1, channels, channels, {}};
    op.params = {Param(prefix + ".weight", {channels}, ParamRole::kBnScale),
                 Param(prefix + ".bias", {channels}, ParamRole::kBnShift),
                 Param(prefix + ".running_mean", {channels}, ParamRole::kBnMean),
                 Param(prefix + ".running_var", {channels}, ParamRole::kBnVar)};
    return Push(std::move(op));
  }

  int Relu6(int in, int channels) {
    return Push({OpKind::kRelu6, in, -1, NewActivation(), 1, channels, channels, {}});
  }

  int Add(int a, int b, int channels) {
    return Push({OpKind::kAdd, a, b, NewActivation(), 1, channels, channels, {}});
  }

  int MeanPool(int in, int channels) {
    return Push({OpKind::kMeanPool, in, -1, NewActivation(), 1, channels, channels, {}});
  }

  int Linear(const std::string& prefix, int in, int fin, int fout) {
    Op op{OpKind::kLinear, in, -1, NewActivation(), 1, fin, fout, {}};
    op.params = {Param(prefix + ".weight", {fout, fin}, ParamRole::kLinearWeight, fin),
                 Param(prefix + ".bias", {fout}, ParamRole::kLinearBias, fin)};
    return Push(std::move(op));
  }

 private:
  int Push(Op op) {
    const int out = op.out;
    g_->ops.push_back(std::move(op));
    return out;
  }

  Graph* g_;
};

}  // namespace

Graph BuildGraph(const ArchitectureConfig& arch) {
  arch.Validate();
  Graph g;
  GraphBuilder b(&g);

  const int stem = arch.ScaledChannels(arch.stem_channels);
  int x = b.Conv3x3("stem.conv", 0, 1, stem, 2);
  x = b.BatchNorm("stem.bn", x, stem);
  x = b.Relu6(x, stem);

  int cin = stem;
  int block = 0;
  for (const auto& spec : arch.blocks) {
    const int cout = arch.ScaledChannels(spec.channels);
    for (int r = 0; r < spec.repeats; ++r, ++block) {
      const int stride = r == 0 ? spec.stride : 1;
      const int hidden = cin * spec.expansion;
      const std::string p = "blocks." + std::to_string(block);
      const int input = x;
      int h = x;
      if (spec.expansion != 1) {
        h = b.Conv1x1(p + ".expand.conv", h, cin, hidden);
        h = b.BatchNorm(p + ".expand.bn", h, hidden);
        h = b.Relu6(h, hidden);
      }
      h = b.Depthwise(p + ".depthwise.conv", h, hidden, stride);
      h = b.BatchNorm(p + ".depthwise.bn", h, hidden);
      h = b.Relu6(h, hidden);
      h = b.Conv1x1(p + ".project.conv", h, hidden, cout);
      h = b.BatchNorm(p + ".project.bn", h, cout);
      if (stride == 1 && cin == cout) h = b.Add(input, h, cout);
      x = h;
      cin = cout;
    }
  }

  const int embed = arch.ScaledEmbedding();
  x = b.Conv1x1("head.conv", x, cin, embed);
  x = b.BatchNorm("head.bn", x, embed);
  x = b.Relu6(x, embed);
  x = b.MeanPool(x, embed);
  g.logits = b.Linear("classifier", x, embed, arch.num_outputs);
  return g;
}

Model BuildModel(const ArchitectureConfig& arch, const LabelVocabulary& vocab,
                 std::uint64_t seed, const FrontendConfig& frontend) {
  Require(arch.num_outputs == vocab.size(), ErrorKind::kConfig,
          "architecture has " + std::to_string(arch.num_outputs) +
              " outputs but the vocabulary has " + std::to_string(vocab.size()) + " labels");
  Require(arch.input_mels == frontend.n_mels, ErrorKind::kConfig,
          "architecture input_mels does not match the frontend n_mels");
  frontend.Validate();
  const Graph graph = BuildGraph(arch);

  Model model;
  model.arch = arch;
  model.frontend = frontend;
  model.vocab = vocab;
  std::mt19937_64 rng(seed);
  for (const auto& spec : graph.params) {
    Tensor t;
    t.name = spec.name;
    t.shape = spec.shape;
    t.data.assign(ShapeNumel(spec.shape), 0.0f);
    switch (spec.role) {
      case ParamRole::kConvWeight: {
        const double bound = std::sqrt(6.0 / spec.fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : t.data) v = static_cast<float>(dist(rng));
        break;
      }
      case ParamRole::kLinearWeight: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : t.data) v = static_cast<float>(dist(rng));
        break;
      }
      case ParamRole::kBnScale:
      case ParamRole::kBnVar:
        std::fill(t.data.begin(), t.data.end(), 1.0f);
        break;
      case ParamRole::kBnShift:
      case ParamRole::kBnMean:
      case ParamRole::kLinearBias:
        break;
    }
    t.trainable = spec.role != ParamRole::kBnMean && spec.role != ParamRole::kBnVar;
    model.tensors.push_back(std::move(t));
  }
  return model;
}

std::size_t CountParameters(const Model& model) {
  std::size_t n = 0;
  for (const auto& t : model.tensors) {
    if (t.trainable) n += t.numel();
  }
  return n;
}

std::size_t CountStoredElements(const Model& model) {
  std::size_t n = 0;
  for (const auto& t : model.tensors) n += t.numel();
  return n;
}

Model StripOutput(const Model& model, const std::vector<std::string>& keep) {
  Require(!keep.empty(), ErrorKind::kArgument, "strip needs at least one label to keep");
  std::set<std::string> seen;
  std::vector<std::string> at, kws;
  for (const auto& name : keep) {
    auto idx = model.vocab.Find(name);
    Require(idx.has_value(), ErrorKind::kArgument, "cannot keep unknown label '" + name + "'");
    Require(seen.insert(name).second, ErrorKind::kArgument, "label '" + name + "' kept twice");
    (model.vocab.IsKeyword(*idx) ? kws : at).push_back(name);
  }

  Model out = model;
  out.vocab = LabelVocabulary::Partial(at, kws);
  out.arch.num_outputs = out.vocab.size();
  const Tensor& weight = model.tensor("classifier.weight");
  const Tensor& bias = model.tensor("classifier.bias");
  const int features = weight.shape[1];
  Tensor& new_weight = out.tensor("classifier.weight");
  Tensor& new_bias = out.tensor("classifier.bias");
  new_weight.shape = {out.vocab.size(), features};
  new_weight.data.clear();
  new_bias.shape = {out.vocab.size()};
  new_bias.data.clear();
  for (const auto& name : out.vocab.names()) {
    const int row = model.vocab.IndexOf(name);
    const auto begin = weight.data.begin() + static_cast<std::ptrdiff_t>(row) * features;
    new_weight.data.insert(new_weight.data.end(), begin, begin + features);
    new_bias.data.push_back(bias.data[row]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[4] = {'U', 'K', 'A', 'T'};
constexpr std::size_t kPreamble = 12;
constexpr std::size_t kAlignment = 16;

void PutU32(std::vector<std::uint8_t>* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t GetU32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

nlohmann::json HeaderJson(const Model& model) {
  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : model.tensors) {
    tensors.push_back({{"name", t.name},
                       {"shape", t.shape},
                       {"offset", offset},
                       {"trainable", t.trainable}});
    offset += 4 * t.numel();
  }
  return {{"format", "ukat"},
          {"architecture", model.arch},
          {"frontend", model.frontend},
          {"vocabulary", {{"at", model.vocab.at_labels()}, {"kws", model.vocab.kws_labels()}}},
          {"tensors", tensors},
          {"data_bytes", offset}};
}

}  // namespace

std::vector<std::uint8_t> SerializeModel(const Model& model) {
  std::string header = HeaderJson(model).dump();
  const std::size_t unpadded = kPreamble + header.size();
  header.append((kAlignment - unpadded % kAlignment) % kAlignment, ' ');

  std::vector<std::uint8_t> out;
  out.reserve(kPreamble + header.size() + 4 * CountStoredElements(model));
  out.insert(out.end(), kMagic, kMagic + 4);
  PutU32(&out, kModelVersion);
  PutU32(&out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  for (const auto& t : model.tensors) {
    for (float v : t.data) {
      std::uint32_t raw;
      std::memcpy(&raw, &v, 4);
      PutU32(&out, raw);
    }
  }
  return out;
}

namespace {

nlohmann::json ParseHeader(std::span<const std::uint8_t> bytes, std::size_t* data_start) {
  if (bytes.size() < kPreamble) throw FormatError("truncated model preamble", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad model magic", 0);
  const std::uint32_t version = GetU32(bytes.data() + 4);
  if (version != kModelVersion) {
    throw FormatError("unsupported model version " + std::to_string(version), 4);
  }
  const std::uint32_t header_len = GetU32(bytes.data() + 8);
  if (kPreamble + header_len > bytes.size()) {
    throw FormatError("header length " + std::to_string(header_len) + " exceeds file size",
                      8);
  }
  const char* begin = reinterpret_cast<const char*>(bytes.data() + kPreamble);
  try {
    *data_start = kPreamble + header_len;
    return nlohmann::json::parse(begin, begin + header_len);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed model header: ") + e.what(),
                      kPreamble + (e.byte > 0 ? e.byte - 1 : 0));
  }
}

}  // namespace

Model DeserializeModel(std::span<const std::uint8_t> bytes) {
  std::size_t data_start = 0;
  const nlohmann::json header = ParseHeader(bytes, &data_start);

  Model model;
  try {
    model.arch = header.at("architecture").get<ArchitectureConfig>();
    model.frontend = header.at("frontend").get<FrontendConfig>();
    model.vocab = LabelVocabulary::Partial(
        header.at("vocabulary").at("at").get<std::vector<std::string>>(),
        header.at("vocabulary").at("kws").get<std::vector<std::string>>());
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("invalid model header: ") + e.what(), kPreamble);
  }
  if (model.arch.num_outputs != model.vocab.size()) {
    throw FormatError("header vocabulary size does not match architecture outputs", kPreamble);
  }

  Graph graph;
  try {
    graph = BuildGraph(model.arch);
  } catch (const Error& e) {
    throw FormatError(std::string("invalid architecture in header: ") + e.what(), kPreamble);
  }
  const auto& manifest = header.at("tensors");
  if (!manifest.is_array() || manifest.size() != graph.params.size()) {
    throw FormatError("tensor manifest does not match the declared architecture", kPreamble);
  }

  for (std::size_t i = 0; i < graph.params.size(); ++i) {
    const auto& entry = manifest[i];
    Tensor t;
    t.name = entry.at("name").get<std::string>();
    t.shape = entry.at("shape").get<std::vector<int>>();
    t.trainable = entry.value("trainable", true);
    if (t.name != graph.params[i].name || t.shape != graph.params[i].shape) {
      throw FormatError("tensor '" + t.name + "' does not match the declared architecture",
                        kPreamble);
    }
    const std::size_t offset = data_start + entry.at("offset").get<std::size_t>();
    const std::size_t n = ShapeNumel(t.shape);
    if (offset + 4 * n > bytes.size()) {
      throw FormatError("truncated tensor data for '" + t.name + "'", bytes.size());
    }
    t.data.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::uint32_t raw = GetU32(bytes.data() + offset + 4 * k);
      std::memcpy(&t.data[k], &raw, 4);
      if (!std::isfinite(t.data[k])) {
        throw FormatError("non-finite value in tensor '" + t.name + "'", offset + 4 * k);
      }
    }
    model.tensors.push_back(std::move(t));
  }
  return model;
}

void SaveModel(const Model& model, const std::string& path) {
  const auto bytes = SerializeModel(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot write model: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorKind::kIo, "short write: " + path);
}

namespace {

std::vector<std::uint8_t> ReadAll(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open model: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Model LoadModel(const std::string& path) {
  const auto bytes = ReadAll(path);
  try {
    return DeserializeModel(bytes);
  } catch (const FormatError& e) {
    throw e.WithContext(path);
  }
}

nlohmann::json ReadModelHeader(const std::string& path) {
  const auto bytes = ReadAll(path);
  std::size_t data_start = 0;
  return ParseHeader(bytes, &data_start);
}

}  // namespace ukat
