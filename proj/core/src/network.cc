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

#include "ukat/network.h"

#include <algorithm>
#include <cmath>

#include "ukat/error.h"

namespace ukat {

template <typename T>
T Sigmoid(T z) {
  if (z >= 0) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template float Sigmoid<float>(float);
template double Sigmoid<double>(double);

namespace {

// Output index range [lo, hi) of a padded 3x3 tap `k` such that the input
// index o * stride + k - 1 falls inside [0, extent).
inline void TapRange(int k, int stride, int extent, int out_extent, int* lo, int* hi) {
  *lo = k == 0 ? 1 : 0;
  *hi = extent - k >= 0 ? std::min(out_extent, (extent - k) / stride + 1) : 0;
}

template <typename T>
T Dot(const T* a, const T* b, std::size_t n) {
  T acc = 0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void Axpy(T alpha, const T* x, T* y, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

template <typename T>
Network<T>::Network(const Model& model) : arch_(model.arch), graph_(BuildGraph(model.arch)) {
  Require(model.tensors.size() == graph_.params.size(), ErrorKind::kShape,
          "model tensors do not match the architecture");
  params_.resize(graph_.params.size());
  grads_.resize(graph_.params.size());
  for (std::size_t i = 0; i < graph_.params.size(); ++i) {
    const Tensor& t = model.tensors[i];
    Require(t.name == graph_.params[i].name && t.shape == graph_.params[i].shape,
            ErrorKind::kShape, "tensor '" + t.name + "' does not match the architecture");
    params_[i].assign(t.data.begin(), t.data.end());
    grads_[i].assign(t.data.size(), T(0));
  }
  acts_.resize(graph_.num_activations);
  act_grads_.resize(graph_.num_activations);
  bn_cache_.resize(graph_.ops.size());
}

template <typename T>
bool Network<T>::trainable(int index) const {
  const ParamRole role = graph_.params[index].role;
  return role != ParamRole::kBnMean && role != ParamRole::kBnVar;
}

template <typename T>
void Network<T>::ZeroGrads() {
  for (auto& g : grads_) std::fill(g.begin(), g.end(), T(0));
}

template <typename T>
void Network<T>::ExportTo(Model* model) const {
  Require(model->tensors.size() == params_.size(), ErrorKind::kShape,
          "export target does not match the network layout");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& dst = model->tensors[i].data;
    Require(dst.size() == params_[i].size(), ErrorKind::kShape,
            "export target tensor size mismatch");
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<float>(params_[i][k]);
  }
}

template <typename T>
const std::vector<T>& Network<T>::embedding() const {
  // The classifier's input is the pooling output.
  return acts_[graph_.ops.back().in].values;
}

template <typename T>
void Network<T>::Shape(int id, int batch, int channels, int height, int width,
                       std::vector<int> valid) {
  Activation& a = acts_[id];
  a.batch = batch;
  a.channels = channels;
  a.height = height;
  a.width = width;
  a.values.assign(static_cast<std::size_t>(batch) * channels * height * width, T(0));
  a.valid = std::move(valid);
}

template <typename T>
std::vector<T>& Network<T>::Grad(int id) {
  return act_grads_[id];
}

template <typename T>
const std::vector<T>& Network<T>::Forward(const FeatureBatch<T>& batch, Mode mode) {
  Require(batch.batch >= 1, ErrorKind::kEmptyInput, "forward needs a nonempty batch");
  Require(batch.mels == arch_.input_mels, ErrorKind::kShape,
          "spectrogram has " + std::to_string(batch.mels) + " mel bins, model expects " +
              std::to_string(arch_.input_mels));
  Require(batch.frames >= 1 &&
              batch.values.size() ==
                  static_cast<std::size_t>(batch.batch) * batch.frames * batch.mels,
          ErrorKind::kShape, "feature batch size does not match its declared shape");
  Require(batch.lengths.size() == static_cast<std::size_t>(batch.batch), ErrorKind::kShape,
          "feature batch needs one length per item");
  for (int len : batch.lengths) {
    Require(len >= 1 && len <= batch.frames, ErrorKind::kShape, "item length out of range");
  }
  for (T v : batch.values) {
    if (!std::isfinite(v)) Fail(ErrorKind::kNumeric, "non-finite value in network input");
  }

  Activation& input = acts_[0];
  input.batch = batch.batch;
  input.channels = 1;
  input.height = batch.frames;
  input.width = batch.mels;
  input.values = batch.values;
  input.valid = batch.lengths;
  // Rows past an item's length are zero, like the implicit convolution padding.
  for (int n = 0; n < batch.batch; ++n) {
    auto begin = input.values.begin() +
                 static_cast<std::ptrdiff_t>(n * input.plane() + batch.lengths[n] * input.width);
    std::fill(begin, input.values.begin() + static_cast<std::ptrdiff_t>((n + 1) * input.plane()),
              T(0));
  }

  cache_valid_ = false;
  for (std::size_t i = 0; i < graph_.ops.size(); ++i) RunOp(i, mode);
  cache_valid_ = mode == Mode::kTrain;
  logits_ = acts_[graph_.logits].values;
  return logits_;
}

template <typename T>
void Network<T>::Backward(std::span<const T> grad_logits) {
  Require(cache_valid_, ErrorKind::kState,
          "backward requires the activations of a train-mode forward pass");
  const Activation& out = acts_[graph_.logits];
  Require(grad_logits.size() == out.values.size(), ErrorKind::kShape,
          "gradient shape does not match the logits");
  for (int id = 0; id < graph_.num_activations; ++id) {
    act_grads_[id].assign(acts_[id].values.size(), T(0));
  }
  std::copy(grad_logits.begin(), grad_logits.end(), act_grads_[graph_.logits].begin());
  ZeroGrads();
  for (std::size_t i = graph_.ops.size(); i-- > 0;) BackOp(i);
  cache_valid_ = false;
}

template <typename T>
void Network<T>::RunOp(std::size_t index, Mode mode) {
  const Op& op = graph_.ops[index];
  switch (op.kind) {
    case OpKind::kConv3x3: Conv3x3Forward(op); break;
    case OpKind::kDepthwise3x3: Depthwise3x3Forward(op); break;
    case OpKind::kConv1x1: Conv1x1Forward(op); break;
    case OpKind::kBatchNorm: BatchNormForward(op, index, mode); break;
    case OpKind::kRelu6: Relu6Forward(op); break;
    case OpKind::kAdd: AddForward(op); break;
    case OpKind::kMeanPool: MeanPoolForward(op); break;
    case OpKind::kLinear: LinearForward(op); break;
  }
}

template <typename T>
void Network<T>::BackOp(std::size_t index) {
  const Op& op = graph_.ops[index];
  switch (op.kind) {
    case OpKind::kConv3x3: Conv3x3Backward(op); break;
    case OpKind::kDepthwise3x3: Depthwise3x3Backward(op); break;
    case OpKind::kConv1x1: Conv1x1Backward(op); break;
    case OpKind::kBatchNorm: BatchNormBackward(op, index); break;
    case OpKind::kRelu6: Relu6Backward(op); break;
    case OpKind::kAdd: AddBackward(op); break;
    case OpKind::kMeanPool: MeanPoolBackward(op); break;
    case OpKind::kLinear: LinearBackward(op); break;
  }
}

// --- dense 3x3 --------------------------------------------------------------

template <typename T>
void Network<T>::Conv3x3Forward(const Op& op) {
  const Activation& in = acts_[op.in];
  const int s = op.stride;
  const int h_out = (in.height - 1) / s + 1;
  const int w_out = (in.width - 1) / s + 1;
  std::vector<int> valid(in.batch);
  for (int n = 0; n < in.batch; ++n) valid[n] = (in.valid[n] - 1) / s + 1;
  Shape(op.out, in.batch, op.out_channels, h_out, w_out, valid);
  Activation& out = acts_[op.out];
  const T* weight = params_[op.params[0]].data();

  for (int n = 0; n < in.batch; ++n) {
    for (int co = 0; co < op.out_channels; ++co) {
      T* o = &out.values[(static_cast<std::size_t>(n) * op.out_channels + co) * out.plane()];
      for (int ci = 0; ci < op.in_channels; ++ci) {
        const T* x = &in.values[(static_cast<std::size_t>(n) * op.in_channels + ci) * in.plane()];
        for (int kh = 0; kh < 3; ++kh) {
          int oh_lo, oh_hi;
          TapRange(kh, s, in.valid[n], valid[n], &oh_lo, &oh_hi);
          for (int kw = 0; kw < 3; ++kw) {
            int ow_lo, ow_hi;
            TapRange(kw, s, in.width, w_out, &ow_lo, &ow_hi);
            const T w = weight[((co * op.in_channels + ci) * 3 + kh) * 3 + kw];
            for (int oh = oh_lo; oh < oh_hi; ++oh) {
              const T* xr = x + static_cast<std::size_t>(oh * s + kh - 1) * in.width + kw;
              T* orow = o + static_cast<std::size_t>(oh) * w_out;
              for (int ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += w * xr[ow * s - 1];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void Network<T>::Conv3x3Backward(const Op& op) {
  const Activation& in = acts_[op.in];
  const Activation& out = acts_[op.out];
  const std::vector<T>& gout = act_grads_[op.out];
  const bool need_input_grad = op.in != 0;
  std::vector<T>& gin = Grad(op.in);
  const T* weight = params_[op.params[0]].data();
  T* gweight = grads_[op.params[0]].data();
  const int s = op.stride;

  for (int n = 0; n < in.batch; ++n) {
    for (int co = 0; co < op.out_channels; ++co) {
      const T* go = &gout[(static_cast<std::size_t>(n) * op.out_channels + co) * out.plane()];
      for (int ci = 0; ci < op.in_channels; ++ci) {
        const std::size_t in_off = (static_cast<std::size_t>(n) * op.in_channels + ci) * in.plane();
        const T* x = &in.values[in_off];
        for (int kh = 0; kh < 3; ++kh) {
          int oh_lo, oh_hi;
          TapRange(kh, s, in.valid[n], out.valid[n], &oh_lo, &oh_hi);
          for (int kw = 0; kw < 3; ++kw) {
            int ow_lo, ow_hi;
            TapRange(kw, s, in.width, out.width, &ow_lo, &ow_hi);
            const int widx = ((co * op.in_channels + ci) * 3 + kh) * 3 + kw;
            const T w = weight[widx];
            T acc = 0;
            for (int oh = oh_lo; oh < oh_hi; ++oh) {
              const std::size_t row = static_cast<std::size_t>(oh * s + kh - 1) * in.width + kw;
              const T* xr = x + row;
              const T* gr = go + static_cast<std::size_t>(oh) * out.width;
              for (int ow = ow_lo; ow < ow_hi; ++ow) acc += gr[ow] * xr[ow * s - 1];
              if (need_input_grad) {
                T* gir = &gin[in_off + row];
                for (int ow = ow_lo; ow < ow_hi; ++ow) gir[ow * s - 1] += w * gr[ow];
              }
            }
            gweight[widx] += acc;
          }
        }
      }
    }
  }
}

// --- depthwise 3x3 ------------------------------------------------------------

template <typename T>
void Network<T>::Depthwise3x3Forward(const Op& op) {
  const Activation& in = acts_[op.in];
  const int s = op.stride;
  const int h_out = (in.height - 1) / s + 1;
  const int w_out = (in.width - 1) / s + 1;
  std::vector<int> valid(in.batch);
  for (int n = 0; n < in.batch; ++n) valid[n] = (in.valid[n] - 1) / s + 1;
  Shape(op.out, in.batch, op.out_channels, h_out, w_out, valid);
  Activation& out = acts_[op.out];
  const T* weight = params_[op.params[0]].data();

  for (int n = 0; n < in.batch; ++n) {
    for (int c = 0; c < op.out_channels; ++c) {
      const std::size_t plane_idx = static_cast<std::size_t>(n) * op.out_channels + c;
      const T* x = &in.values[plane_idx * in.plane()];
      T* o = &out.values[plane_idx * out.plane()];
      for (int kh = 0; kh < 3; ++kh) {
        int oh_lo, oh_hi;
        TapRange(kh, s, in.valid[n], valid[n], &oh_lo, &oh_hi);
        for (int kw = 0; kw < 3; ++kw) {
          int ow_lo, ow_hi;
          TapRange(kw, s, in.width, w_out, &ow_lo, &ow_hi);
          const T w = weight[(c * 3 + kh) * 3 + kw];
          for (int oh = oh_lo; oh < oh_hi; ++oh) {
            const T* xr = x + static_cast<std::size_t>(oh * s + kh - 1) * in.width + kw;
            T* orow = o + static_cast<std::size_t>(oh) * w_out;
            if (s == 1) {
#pragma omp simd
              for (int ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += w * xr[ow - 1];
            } else {
              for (int ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += w * xr[ow * s - 1];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void Network<T>::Depthwise3x3Backward(const Op& op) {
  const Activation& in = acts_[op.in];
  const Activation& out = acts_[op.out];
  const std::vector<T>& gout = act_grads_[op.out];
  std::vector<T>& gin = Grad(op.in);
  const T* weight = params_[op.params[0]].data();
  T* gweight = grads_[op.params[0]].data();
  const int s = op.stride;

  for (int n = 0; n < in.batch; ++n) {
    for (int c = 0; c < op.out_channels; ++c) {
      const std::size_t plane_idx = static_cast<std::size_t>(n) * op.out_channels + c;
      const T* x = &in.values[plane_idx * in.plane()];
      T* gx = &gin[plane_idx * in.plane()];
      const T* go = &gout[plane_idx * out.plane()];
      for (int kh = 0; kh < 3; ++kh) {
        int oh_lo, oh_hi;
        TapRange(kh, s, in.valid[n], out.valid[n], &oh_lo, &oh_hi);
        for (int kw = 0; kw < 3; ++kw) {
          int ow_lo, ow_hi;
          TapRange(kw, s, in.width, out.width, &ow_lo, &ow_hi);
          const int widx = (c * 3 + kh) * 3 + kw;
          const T w = weight[widx];
          T acc = 0;
          for (int oh = oh_lo; oh < oh_hi; ++oh) {
            const std::size_t row = static_cast<std::size_t>(oh * s + kh - 1) * in.width + kw;
            const T* xr = x + row;
            T* gxr = gx + row;
            const T* gr = go + static_cast<std::size_t>(oh) * out.width;
            if (s == 1) {
              acc += Dot(gr + ow_lo, xr + ow_lo - 1, static_cast<std::size_t>(ow_hi - ow_lo));
              Axpy(w, gr + ow_lo, gxr + ow_lo - 1, static_cast<std::size_t>(ow_hi - ow_lo));
            } else {
              for (int ow = ow_lo; ow < ow_hi; ++ow) {
                acc += gr[ow] * xr[ow * s - 1];
                gxr[ow * s - 1] += w * gr[ow];
              }
            }
          }
          gweight[widx] += acc;
        }
      }
    }
  }
}

// --- pointwise ------------------------------------------------------------------

template <typename T>
void Network<T>::Conv1x1Forward(const Op& op) {
  const Activation& in = acts_[op.in];
  Shape(op.out, in.batch, op.out_channels, in.height, in.width, in.valid);
  Activation& out = acts_[op.out];
  const T* weight = params_[op.params[0]].data();
  for (int n = 0; n < in.batch; ++n) {
    const std::size_t count = static_cast<std::size_t>(in.valid[n]) * in.width;
    for (int co = 0; co < op.out_channels; ++co) {
      T* o = &out.values[(static_cast<std::size_t>(n) * op.out_channels + co) * out.plane()];
      const T* wrow = weight + static_cast<std::size_t>(co) * op.in_channels;
      for (int ci = 0; ci < op.in_channels; ++ci) {
        Axpy(wrow[ci], &in.values[(static_cast<std::size_t>(n) * op.in_channels + ci) * in.plane()],
             o, count);
      }
    }
  }
}

template <typename T>
void Network<T>::Conv1x1Backward(const Op& op) {
  const Activation& in = acts_[op.in];
  const std::vector<T>& gout = act_grads_[op.out];
  std::vector<T>& gin = Grad(op.in);
  const T* weight = params_[op.params[0]].data();
  T* gweight = grads_[op.params[0]].data();
  for (int n = 0; n < in.batch; ++n) {
    const std::size_t count = static_cast<std::size_t>(in.valid[n]) * in.width;
    for (int co = 0; co < op.out_channels; ++co) {
      const T* go = &gout[(static_cast<std::size_t>(n) * op.out_channels + co) * in.plane()];
      const std::size_t wrow = static_cast<std::size_t>(co) * op.in_channels;
      for (int ci = 0; ci < op.in_channels; ++ci) {
        const std::size_t off = (static_cast<std::size_t>(n) * op.in_channels + ci) * in.plane();
        gweight[wrow + ci] += Dot(go, &in.values[off], count);
        Axpy(weight[wrow + ci], go, &gin[off], count);
      }
    }
  }
}

// --- batch norm -----------------------------------------------------------------

template <typename T>
void Network<T>::BatchNormForward(const Op& op, std::size_t index, Mode mode) {
  const Activation& in = acts_[op.in];
  Shape(op.out, in.batch, in.channels, in.height, in.width, in.valid);
  Activation& out = acts_[op.out];
  const T* gamma = params_[op.params[0]].data();
  const T* beta = params_[op.params[1]].data();
  T* running_mean = params_[op.params[2]].data();
  T* running_var = params_[op.params[3]].data();
  const double eps = arch_.bn_eps;

  if (mode == Mode::kEval) {
    for (int c = 0; c < in.channels; ++c) {
      const T scale = static_cast<T>(gamma[c] / std::sqrt(static_cast<double>(running_var[c]) + eps));
      const T shift = beta[c] - running_mean[c] * scale;
      for (int n = 0; n < in.batch; ++n) {
        const std::size_t off = (static_cast<std::size_t>(n) * in.channels + c) * in.plane();
        const std::size_t count = static_cast<std::size_t>(in.valid[n]) * in.width;
        const T* x = &in.values[off];
        T* y = &out.values[off];
        for (std::size_t p = 0; p < count; ++p) y[p] = scale * x[p] + shift;
      }
    }
    return;
  }

  BnCache& cache = bn_cache_[index];
  cache.xhat.assign(in.values.size(), T(0));
  cache.inv_std.assign(in.channels, T(0));
  cache.count.assign(1, 0.0);
  double count = 0.0;
  for (int n = 0; n < in.batch; ++n) count += static_cast<double>(in.valid[n]) * in.width;
  cache.count[0] = count;
  const double momentum = arch_.bn_momentum;

  for (int c = 0; c < in.channels; ++c) {
    double sum = 0.0;
    for (int n = 0; n < in.batch; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * in.channels + c) * in.plane();
      const std::size_t cnt = static_cast<std::size_t>(in.valid[n]) * in.width;
      for (std::size_t p = 0; p < cnt; ++p) sum += in.values[off + p];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (int n = 0; n < in.batch; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * in.channels + c) * in.plane();
      const std::size_t cnt = static_cast<std::size_t>(in.valid[n]) * in.width;
      for (std::size_t p = 0; p < cnt; ++p) {
        const double d = in.values[off + p] - mean;
        sq += d * d;
      }
    }
    const double var = sq / count;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    cache.inv_std[c] = static_cast<T>(inv_std);
    const T m = static_cast<T>(mean);
    const T is = static_cast<T>(inv_std);
    for (int n = 0; n < in.batch; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * in.channels + c) * in.plane();
      const std::size_t cnt = static_cast<std::size_t>(in.valid[n]) * in.width;
      for (std::size_t p = 0; p < cnt; ++p) {
        const T xh = (in.values[off + p] - m) * is;
        cache.xhat[off + p] = xh;
        out.values[off + p] = gamma[c] * xh + beta[c];
      }
    }
    const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
    running_mean[c] = static_cast<T>((1.0 - momentum) * running_mean[c] + momentum * mean);
    running_var[c] = static_cast<T>((1.0 - momentum) * running_var[c] + momentum * unbiased);
  }
}

template <typename T>
void Network<T>::BatchNormBackward(const Op& op, std::size_t index) {
  const Activation& in = acts_[op.in];
  const BnCache& cache = bn_cache_[index];
  const std::vector<T>& gout = act_grads_[op.out];
  std::vector<T>& gin = Grad(op.in);
  const T* gamma = params_[op.params[0]].data();
  T* ggamma = grads_[op.params[0]].data();
  T* gbeta = grads_[op.params[1]].data();
  const double count = cache.count[0];

  for (int c = 0; c < in.channels; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (int n = 0; n < in.batch; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * in.channels + c) * in.plane();
      const std::size_t cnt = static_cast<std::size_t>(in.valid[n]) * in.width;
      for (std::size_t p = 0; p < cnt; ++p) {
        sum_g += gout[off + p];
        sum_gx += static_cast<double>(gout[off + p]) * cache.xhat[off + p];
      }
    }
    ggamma[c] += static_cast<T>(sum_gx);
    gbeta[c] += static_cast<T>(sum_g);
    const T scale = gamma[c] * cache.inv_std[c];
    const T mean_g = static_cast<T>(sum_g / count);
    const T mean_gx = static_cast<T>(sum_gx / count);
    for (int n = 0; n < in.batch; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * in.channels + c) * in.plane();
      const std::size_t cnt = static_cast<std::size_t>(in.valid[n]) * in.width;
      for (std::size_t p = 0; p < cnt; ++p) {
        gin[off + p] += scale * (gout[off + p] - mean_g - cache.xhat[off + p] * mean_gx);
      }
    }
  }
}

// --- elementwise ----------------------------------------------------------------

template <typename T>
void Network<T>::Relu6Forward(const Op& op) {
  const Activation& in = acts_[op.in];
  Shape(op.out, in.batch, in.channels, in.height, in.width, in.valid);
  std::vector<T>& y = acts_[op.out].values;
  const std::vector<T>& x = in.values;
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::min(std::max(x[i], T(0)), T(6));
}

template <typename T>
void Network<T>::Relu6Backward(const Op& op) {
  const std::vector<T>& x = acts_[op.in].values;
  const std::vector<T>& gy = act_grads_[op.out];
  std::vector<T>& gx = Grad(op.in);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > T(0) && x[i] < T(6)) gx[i] += gy[i];
  }
}

template <typename T>
void Network<T>::AddForward(const Op& op) {
  const Activation& a = acts_[op.in];
  const Activation& b = acts_[op.in2];
  Require(a.values.size() == b.values.size(), ErrorKind::kShape, "residual shape mismatch");
  Shape(op.out, a.batch, a.channels, a.height, a.width, a.valid);
  std::vector<T>& y = acts_[op.out].values;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values[i] + b.values[i];
}

template <typename T>
void Network<T>::AddBackward(const Op& op) {
  const std::vector<T>& gy = act_grads_[op.out];
  std::vector<T>& ga = Grad(op.in);
  for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
  std::vector<T>& gb = Grad(op.in2);
  for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
}

// --- pooling / classifier -------------------------------------------------------

template <typename T>
void Network<T>::MeanPoolForward(const Op& op) {
  const Activation& in = acts_[op.in];
  Shape(op.out, in.batch, in.channels, 1, 1, std::vector<int>(in.batch, 1));
  std::vector<T>& y = acts_[op.out].values;
  for (int n = 0; n < in.batch; ++n) {
    const std::size_t cnt = static_cast<std::size_t>(in.valid[n]) * in.width;
    for (int c = 0; c < in.channels; ++c) {
      const T* x = &in.values[(static_cast<std::size_t>(n) * in.channels + c) * in.plane()];
      double sum = 0.0;
      for (std::size_t p = 0; p < cnt; ++p) sum += x[p];
      y[static_cast<std::size_t>(n) * in.channels + c] = static_cast<T>(sum / cnt);
    }
  }
}

template <typename T>
void Network<T>::MeanPoolBackward(const Op& op) {
  const Activation& in = acts_[op.in];
  const std::vector<T>& gy = act_grads_[op.out];
  std::vector<T>& gx = Grad(op.in);
  for (int n = 0; n < in.batch; ++n) {
    const std::size_t cnt = static_cast<std::size_t>(in.valid[n]) * in.width;
    for (int c = 0; c < in.channels; ++c) {
      const T g = gy[static_cast<std::size_t>(n) * in.channels + c] / static_cast<T>(cnt);
      T* dst = &gx[(static_cast<std::size_t>(n) * in.channels + c) * in.plane()];
      for (std::size_t p = 0; p < cnt; ++p) dst[p] += g;
    }
  }
}

template <typename T>
void Network<T>::LinearForward(const Op& op) {
  const Activation& in = acts_[op.in];
  Shape(op.out, in.batch, op.out_channels, 1, 1, std::vector<int>(in.batch, 1));
  std::vector<T>& y = acts_[op.out].values;
  const T* weight = params_[op.params[0]].data();
  const T* bias = params_[op.params[1]].data();
  const int fin = op.in_channels;
  // Each output row is computed independently of the others, so removing
  // rows never changes the remaining logits.
  for (int n = 0; n < in.batch; ++n) {
    const T* x = &in.values[static_cast<std::size_t>(n) * fin];
    for (int o = 0; o < op.out_channels; ++o) {
      const T* w = weight + static_cast<std::size_t>(o) * fin;
      T acc = 0;
      for (int f = 0; f < fin; ++f) acc += w[f] * x[f];
      y[static_cast<std::size_t>(n) * op.out_channels + o] = acc + bias[o];
    }
  }
}

template <typename T>
void Network<T>::LinearBackward(const Op& op) {
  const Activation& in = acts_[op.in];
  const std::vector<T>& gy = act_grads_[op.out];
  std::vector<T>& gx = Grad(op.in);
  const T* weight = params_[op.params[0]].data();
  T* gweight = grads_[op.params[0]].data();
  T* gbias = grads_[op.params[1]].data();
  const int fin = op.in_channels;
  for (int n = 0; n < in.batch; ++n) {
    const T* x = &in.values[static_cast<std::size_t>(n) * fin];
    T* gxn = &gx[static_cast<std::size_t>(n) * fin];
    for (int o = 0; o < op.out_channels; ++o) {
      const T g = gy[static_cast<std::size_t>(n) * op.out_channels + o];
      gbias[o] += g;
      Axpy(g, x, gweight + static_cast<std::size_t>(o) * fin, fin);
      Axpy(g, weight + static_cast<std::size_t>(o) * fin, gxn, fin);
    }
  }
}

template class Network<float>;
template class Network<double>;

}  // namespace ukat
