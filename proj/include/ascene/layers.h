// include/ascene/layers.h

// Copyright 2026  The ascene Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef ASCENE_LAYERS_H_
#define ASCENE_LAYERS_H_

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ascene/rng.h"
#include "ascene/tensor.h"

namespace ascene {

enum class LayerKind {
  kConv2d,
  kBatchNorm,
  kRelu,
  kMaxPool,
  kDropout,
  kGlobalAvgPool,
  kChannelAttention,
  kResidualAdd,
  kDense,
  kSoftmax,
  // Routing along the frequency axis.
  kFreqSlice,
  kFreqConcat,
};

std::string_view LayerKindName(LayerKind kind);
std::optional<LayerKind> ParseLayerKind(std::string_view name);

enum class Mode { kTrain, kEval };

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

using Inputs = std::vector<const Tensor *>;
using Hyper = std::map<std::string, double>;

/// A node operation. Forward in train mode caches what backward needs;
/// Infer never touches layer state and may run concurrently.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual size_t arity() const { return 1; }
  /// Per-sample output shape; throws ShapeError on incompatible inputs.
  virtual Shape OutputShape(const std::vector<Shape> &in) const = 0;
  virtual Hyper hyper() const { return {}; }

  virtual std::vector<Param *> Params() { return {}; }
  std::vector<const Param *> Params() const;
  /// Non-trainable state saved with parameters (batch-norm statistics).
  virtual std::vector<Tensor *> Buffers() { return {}; }
  virtual void Init(Rng &) {}

  Tensor Forward(const Inputs &in, Mode mode, Rng *rng);
  Tensor Infer(const Inputs &in) const;
  /// Gradient with respect to each input; parameter gradients accumulate.
  std::vector<Tensor> Backward(const Tensor &grad_out);
  void ZeroGrad();

 protected:
  virtual Tensor Eval(const Inputs &in) const = 0;
  virtual Tensor Train(const Inputs &in, Rng *rng) = 0;
  virtual std::vector<Tensor> Grad(const Tensor &grad_out) = 0;

 private:
  Shape CheckInputs(const Inputs &in) const;
  bool cached_ = false;
  Shape out_shape_;
};

class Conv2d : public Layer {
 public:
  Conv2d(size_t in_channels, size_t out_channels, size_t kernel_h, size_t kernel_w,
         size_t stride_h = 1, size_t stride_w = 1);
  LayerKind kind() const override { return LayerKind::kConv2d; }
  Shape OutputShape(const std::vector<Shape> &in) const override;
  Hyper hyper() const override;
  std::vector<Param *> Params() override { return {&weight_, &bias_}; }
  void Init(Rng &rng) override;

  size_t in_channels() const { return in_; }
  size_t out_channels() const { return out_; }
  size_t stride_w() const { return sw_; }
  Param &weight() { return weight_; }
  Param &bias() { return bias_; }
  const Param &weight() const { return weight_; }
  const Param &bias() const { return bias_; }

 protected:
  Tensor Eval(const Inputs &in) const override;
  Tensor Train(const Inputs &in, Rng *rng) override;
  std::vector<Tensor> Grad(const Tensor &grad_out) override;

 private:
  size_t in_, out_, kh_, kw_, sh_, sw_;
  Param weight_, bias_;
  Tensor x_;
};

class BatchNorm : public Layer {
 public:
  static constexpr double kMomentum = 0.9;
  static constexpr double kEpsilon = 1e-5;

  explicit BatchNorm(size_t channels);
  LayerKind kind() const override { return LayerKind::kBatchNorm; }
  Shape OutputShape(const std::vector<Shape> &in) const override;
  Hyper hyper() const override { return {{"channels", static_cast<double>(c_)}}; }
  std::vector<Param *> Params() override { return {&gamma_, &beta_}; }
  std::vector<Tensor *> Buffers() override { return {&running_mean_, &running_var_}; }

  const Tensor &running_mean() const { return running_mean_; }
  const Tensor &running_var() const { return running_var_; }

 protected:
  Tensor Eval(const Inputs &in) const override;
  Tensor Train(const Inputs &in, Rng *rng) override;
  std::vector<Tensor> Grad(const Tensor &grad_out) override;

 private:
  size_t c_;
  Param gamma_, beta_;
  Tensor running_mean_, running_var_;
  Tensor xhat_;
  std::vector<double> inv_std_;
};

class Relu : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::kRelu; }
  Shape OutputShape(const std::vector<Shape> &in) const override { return in[0]; }

 protected:
  Tensor Eval(const Inputs &in) const override;
  Tensor Train(const Inputs &in, Rng *rng) override;
  std::vector<Tensor> Grad(const Tensor &grad_out) override;

 private:
  Tensor x_;
};

/// Max pooling with window = stride, floor on the output size.
class MaxPool : public Layer {
 public:
  MaxPool(size_t pool_h, size_t pool_w);
  LayerKind kind() const override { return LayerKind::kMaxPool; }
  Shape OutputShape(const std::vector<Shape> &in) const override;
  Hyper hyper() const override;
  size_t pool_h() const { return ph_; }
  size_t pool_w() const { return pw_; }

 protected:
  Tensor Eval(const Inputs &in) const override;
  Tensor Train(const Inputs &in, Rng *rng) override;
  std::vector<Tensor> Grad(const Tensor &grad_out) override;

 private:
  Tensor Pool(const Tensor &x, std::vector<size_t> *argmax) const;
  size_t ph_, pw_;
  Shape in_shape_;
  std::vector<size_t> argmax_;
};

class Dropout : public Layer {
 public:
  explicit Dropout(double rate);
  LayerKind kind() const override { return LayerKind::kDropout; }
  Shape OutputShape(const std::vector<Shape> &in) const override { return in[0]; }
  Hyper hyper() const override { return {{"rate", rate_}}; }
  double rate() const { return rate_; }

 protected:
  Tensor Eval(const Inputs &in) const override { return *in[0]; }
  Tensor Train(const Inputs &in, Rng *rng) override;
  std::vector<Tensor> Grad(const Tensor &grad_out) override;

 private:
  double rate_;
  std::vector<double> mask_;
};

/// (N, C, H, W) -> (N, C).
class GlobalAvgPool : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::kGlobalAvgPool; }
  Shape OutputShape(const std::vector<Shape> &in) const override;

 protected:
  Tensor Eval(const Inputs &in) const override;
  Tensor Train(const Inputs &in, Rng *rng) override;
  std::vector<Tensor> Grad(const Tensor &grad_out) override;

 private:
  Shape in_shape_;
};

/// Squeeze-excitation gate: s = logistic(W2 relu(W1 gap(x) + b1) + b2),
/// output x scaled per channel by s.
class ChannelAttention : public Layer {
 public:
  ChannelAttention(size_t channels, size_t reduction = 4);
  LayerKind kind() const override { return LayerKind::kChannelAttention; }
  Shape OutputShape(const std::vector<Shape> &in) const override;
  Hyper hyper() const override;
  std::vector<Param *> Params() override { return {&w1_, &b1_, &w2_, &b2_}; }
  void Init(Rng &rng) override;

  /// Gate values, shape (N, C).
  Tensor Scales(const Tensor &x) const;

 protected:
  Tensor Eval(const Inputs &in) const override;
  Tensor Train(const Inputs &in, Rng *rng) override;
  std::vector<Tensor> Grad(const Tensor &grad_out) override;

 private:
  struct Squeeze {
    std::vector<double> pooled, hidden_pre, scale;
  };
  Squeeze Excite(const Tensor &x) const;

  size_t c_, reduction_, hidden_;
  Param w1_, b1_, w2_, b2_;
  Tensor x_;
  Squeeze sq_;
};

class ResidualAdd : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::kResidualAdd; }
  size_t arity() const override { return 2; }
  Shape OutputShape(const std::vector<Shape> &in) const override;

 protected:
  Tensor Eval(const Inputs &in) const override;
  Tensor Train(const Inputs &in, Rng *) override { return Eval(in); }
  std::vector<Tensor> Grad(const Tensor &grad_out) override { return {grad_out, grad_out}; }
};

/// Fully connected on the flattened sample: (N, ...) -> (N, out).
class Dense : public Layer {
 public:
  Dense(size_t in_features, size_t out_features);
  LayerKind kind() const override { return LayerKind::kDense; }
  Shape OutputShape(const std::vector<Shape> &in) const override;
  Hyper hyper() const override;
  std::vector<Param *> Params() override { return {&weight_, &bias_}; }
  void Init(Rng &rng) override;

 protected:
  Tensor Eval(const Inputs &in) const override;
  Tensor Train(const Inputs &in, Rng *rng) override;
  std::vector<Tensor> Grad(const Tensor &grad_out) override;

 private:
  size_t in_, out_;
  Param weight_, bias_;
  Tensor x_;
};

/// Row-wise softmax over (N, K).
class Softmax : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::kSoftmax; }
  Shape OutputShape(const std::vector<Shape> &in) const override;

 protected:
  Tensor Eval(const Inputs &in) const override;
  Tensor Train(const Inputs &in, Rng *rng) override;
  std::vector<Tensor> Grad(const Tensor &grad_out) override;

 private:
  Tensor y_;
};

/// Keeps frequency bins [begin, end) of (N, C, H, W).
class FreqSlice : public Layer {
 public:
  FreqSlice(size_t begin, size_t end);
  LayerKind kind() const override { return LayerKind::kFreqSlice; }
  Shape OutputShape(const std::vector<Shape> &in) const override;
  Hyper hyper() const override;

 protected:
  Tensor Eval(const Inputs &in) const override;
  Tensor Train(const Inputs &in, Rng *rng) override;
  std::vector<Tensor> Grad(const Tensor &grad_out) override;

 private:
  size_t begin_, end_;
  Shape in_shape_;
};

/// Concatenates two (N, C, H, W_i) inputs along frequency.
class FreqConcat : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::kFreqConcat; }
  size_t arity() const override { return 2; }
  Shape OutputShape(const std::vector<Shape> &in) const override;

 protected:
  Tensor Eval(const Inputs &in) const override;
  Tensor Train(const Inputs &in, Rng *rng) override;
  std::vector<Tensor> Grad(const Tensor &grad_out) override;

 private:
  size_t w0_ = 0, w1_ = 0;
};

/// Row-wise softmax with max subtraction.
Tensor SoftmaxRows(const Tensor &logits);

std::unique_ptr<Layer> MakeLayer(LayerKind kind, const Hyper &hyper);

}  // namespace ascene

#endif  // ASCENE_LAYERS_H_
