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

#ifndef UKAT_NETWORK_H_
#define UKAT_NETWORK_H_

#include <span>
#include <string>
#include <vector>

#include "ukat/model.h"

namespace ukat {

enum class ParamRole {
  kConvWeight,
  kBnScale,
  kBnShift,
  kBnMean,
  kBnVar,
  kLinearWeight,
  kLinearBias,
};

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  ParamRole role;
  int fan_in = 1;
};

enum class OpKind {
  kConv3x3,       // dense 3x3, padding 1
  kDepthwise3x3,  // per-channel 3x3, padding 1
  kConv1x1,
  kBatchNorm,
  kRelu6,
  kAdd,
  kMeanPool,      // global mean over time and frequency
  kLinear,
};

struct Op {
  OpKind kind;
  int in = -1;        // activation ids
  int in2 = -1;       // second operand of kAdd
  int out = -1;
  int stride = 1;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<int> params;  // indices into the parameter layout
};

// Static computation graph: stem conv, inverted-residual stack, 1x1 head,
// pooling, classifier. Activation 0 is the input spectrogram.
struct Graph {
  std::vector<ParamSpec> params;
  std::vector<Op> ops;
  int num_activations = 1;
  int logits = -1;
};

Graph BuildGraph(const ArchitectureConfig& arch);

enum class Mode { kTrain, kEval };

// A batch of spectrograms laid out [batch, 1, frames, mels], right-padded in
// time. Entries past `lengths[n]` frames are ignored by the network, so a
// padded item produces exactly the output of its unpadded self in eval mode.
template <typename T>
struct FeatureBatch {
  int batch = 0;
  int frames = 0;
  int mels = 0;
  std::vector<T> values;
  std::vector<int> lengths;
};

// Forward / backward engine over a model's parameters. T is float for
// training and inference, double for gradient verification.
template <typename T>
class Network {
 public:
  explicit Network(const Model& model);

  const ArchitectureConfig& arch() const { return arch_; }
  const Graph& graph() const { return graph_; }
  int num_outputs() const { return arch_.num_outputs; }

  // Returns logits, row-major [batch, num_outputs]. Train mode normalizes with
  // batch statistics, updates running statistics and keeps the activations
  // needed by Backward().
  const std::vector<T>& Forward(const FeatureBatch<T>& batch, Mode mode);

  // Accumulates parameter gradients for d(loss)/d(logits) of the most recent
  // train-mode Forward(). Consumes the cache.
  void Backward(std::span<const T> grad_logits);

  // Embedding fed to the classifier after the last Forward(), [batch, F].
  const std::vector<T>& embedding() const;

  std::vector<std::vector<T>>& params() { return params_; }
  const std::vector<std::vector<T>>& params() const { return params_; }
  std::vector<std::vector<T>>& grads() { return grads_; }
  const std::vector<std::vector<T>>& grads() const { return grads_; }
  bool trainable(int index) const;
  void ZeroGrads();

  // Copies the current parameter values into a model with the same layout.
  void ExportTo(Model* model) const;

 private:
  struct Activation {
    int batch = 0, channels = 0, height = 0, width = 0;
    std::vector<T> values;
    std::vector<int> valid;  // valid rows per item
    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  };
  struct BnCache {
    std::vector<T> xhat;
    std::vector<T> inv_std;
    std::vector<double> count;
  };

  void RunOp(std::size_t index, Mode mode);
  void BackOp(std::size_t index);
  void Conv3x3Forward(const Op& op);
  void Conv3x3Backward(const Op& op);
  void Depthwise3x3Forward(const Op& op);
  void Depthwise3x3Backward(const Op& op);
  void Conv1x1Forward(const Op& op);
  void Conv1x1Backward(const Op& op);
  void BatchNormForward(const Op& op, std::size_t index, Mode mode);
  void BatchNormBackward(const Op& op, std::size_t index);
  void Relu6Forward(const Op& op);
  void Relu6Backward(const Op& op);
  void AddForward(const Op& op);
  void AddBackward(const Op& op);
  void MeanPoolForward(const Op& op);
  void MeanPoolBackward(const Op& op);
  void LinearForward(const Op& op);
  void LinearBackward(const Op& op);

  void Shape(int id, int batch, int channels, int height, int width,
             std::vector<int> valid);
  std::vector<T>& Grad(int id);

  ArchitectureConfig arch_;
  Graph graph_;
  std::vector<std::vector<T>> params_;
  std::vector<std::vector<T>> grads_;
  std::vector<Activation> acts_;
  std::vector<std::vector<T>> act_grads_;
  std::vector<BnCache> bn_cache_;
  std::vector<T> logits_;
  bool cache_valid_ = false;
};

extern template class Network<float>;
extern template class Network<double>;

// Elementwise logistic function.
template <typename T>
T Sigmoid(T z);

}  // namespace ukat

#endif  // UKAT_NETWORK_H_
