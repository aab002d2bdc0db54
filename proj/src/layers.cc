// src/layers.cc

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

#include "ascene/layers.h"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "ascene/error.h"

namespace ascene {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

constexpr std::array<std::string_view, 12> kKindNames = {
    "conv2d",        "batch_norm",        "relu",         "max_pool",
    "dropout",       "global_avg_pool",   "channel_attention", "residual_add",
    "dense",         "softmax",           "freq_slice",   "freq_concat"};

void HeUniform(Tensor &w, size_t fan_in, Rng &rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double &v : w.values) v = rng.Uniform(-limit, limit);
}

Param MakeParam(std::string name, Shape shape, double fill = 0.0) {
  Param p{std::move(name), Tensor(shape, fill), Tensor(shape)};
  return p;
}

void RequireRank(const Shape &s, size_t rank, std::string_view who) {
  if (s.size() != rank)
    throw ShapeError(std::string(who) + ": expected per-sample rank " + std::to_string(rank) +
                     ", got " + ShapeString(s));
}

size_t Need(const Hyper &h, const std::string &key) {
  auto it = h.find(key);
  if (it == h.end()) throw ConfigError("layer hyperparameter missing: " + key);
  if (!(it->second >= 0.0)) throw ConfigError("layer hyperparameter invalid: " + key);
  return static_cast<size_t>(std::llround(it->second));
}

struct ConvGeom {
  size_t c, h, w, kh, kw, sh, sw, ph, pw, ho, wo;
  size_t K() const { return c * kh * kw; }
  size_t P() const { return ho * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && sh == 1 && sw == 1; }
};

void Im2Col(const double *x, const ConvGeom &g, double *col) {
  const size_t P = g.P();
  for (size_t c = 0; c < g.c; ++c)
    for (size_t i = 0; i < g.kh; ++i)
      for (size_t j = 0; j < g.kw; ++j) {
        double *row = col + ((c * g.kh + i) * g.kw + j) * P;
        for (size_t oy = 0; oy < g.ho; ++oy) {
          long iy = static_cast<long>(oy * g.sh + i) - static_cast<long>(g.ph);
          double *dst = row + oy * g.wo;
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            std::fill(dst, dst + g.wo, 0.0);
            continue;
          }
          const double *src = x + (c * g.h + iy) * g.w;
          for (size_t ox = 0; ox < g.wo; ++ox) {
            long ix = static_cast<long>(ox * g.sw + j) - static_cast<long>(g.pw);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0 : src[ix];
          }
        }
      }
}

void Col2Im(const double *col, const ConvGeom &g, double *dx) {
  const size_t P = g.P();
  for (size_t c = 0; c < g.c; ++c)
    for (size_t i = 0; i < g.kh; ++i)
      for (size_t j = 0; j < g.kw; ++j) {
        const double *row = col + ((c * g.kh + i) * g.kw + j) * P;
        for (size_t oy = 0; oy < g.ho; ++oy) {
          long iy = static_cast<long>(oy * g.sh + i) - static_cast<long>(g.ph);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          double *dst = dx + (c * g.h + iy) * g.w;
          const double *src = row + oy * g.wo;
          for (size_t ox = 0; ox < g.wo; ++ox) {
            long ix = static_cast<long>(ox * g.sw + j) - static_cast<long>(g.pw);
            if (ix >= 0 && ix < static_cast<long>(g.w)) dst[ix] += src[ox];
          }
        }
      }
}

double Logistic(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

std::string_view LayerKindName(LayerKind kind) { return kKindNames[static_cast<size_t>(kind)]; }

std::optional<LayerKind> ParseLayerKind(std::string_view name) {
  for (size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == name) return static_cast<LayerKind>(i);
  return std::nullopt;
}

// ---------------------------------------------------------------- Layer

std::vector<const Param *> Layer::Params() const {
  auto ps = const_cast<Layer *>(this)->Params();
  return std::vector<const Param *>(ps.begin(), ps.end());
}

Shape Layer::CheckInputs(const Inputs &in) const {
  std::string who(LayerKindName(kind()));
  if (in.size() != arity())
    throw ShapeError(who + ": expected " + std::to_string(arity()) + " inputs, got " +
                     std::to_string(in.size()));
  std::vector<Shape> shapes;
  for (const Tensor *t : in) {
    if (t == nullptr || t->rank() < 2 || t->size() != NumElements(t->shape))
      throw ShapeError(who + ": malformed input tensor");
    if (t->dim(0) != in[0]->dim(0)) throw ShapeError(who + ": inputs disagree on batch size");
    shapes.push_back(t->SampleShape());
  }
  Shape out = OutputShape(shapes);
  for (const Tensor *t : in)
    if (!t->AllFinite()) throw NumericalError(who + ": non-finite input");
  out.insert(out.begin(), in[0]->dim(0));
  return out;
}

Tensor Layer::Forward(const Inputs &in, Mode mode, Rng *rng) {
  Shape expect = CheckInputs(in);
  if (mode == Mode::kEval) return Eval(in);
  Tensor out = Train(in, rng);
  cached_ = true;
  out_shape_ = expect;
  return out;
}

Tensor Layer::Infer(const Inputs &in) const {
  CheckInputs(in);
  return Eval(in);
}

std::vector<Tensor> Layer::Backward(const Tensor &grad_out) {
  if (!cached_) throw Error(std::string(LayerKindName(kind())) + ": backward before forward");
  if (grad_out.shape != out_shape_)
    throw ShapeError(std::string(LayerKindName(kind())) + ": upstream gradient shape " +
                     ShapeString(grad_out.shape) + " != output shape " + ShapeString(out_shape_));
  return Grad(grad_out);
}

void Layer::ZeroGrad() {
  for (Param *p : Params()) std::fill(p->grad.values.begin(), p->grad.values.end(), 0.0);
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(size_t in_channels, size_t out_channels, size_t kernel_h, size_t kernel_w,
               size_t stride_h, size_t stride_w)
    : in_(in_channels), out_(out_channels), kh_(kernel_h), kw_(kernel_w), sh_(stride_h), sw_(stride_w) {
  if (in_ == 0 || out_ == 0 || kh_ == 0 || kw_ == 0 || sh_ == 0 || sw_ == 0)
    throw ConfigError("conv2d: sizes must be positive");
  if (kh_ % 2 == 0 || kw_ % 2 == 0) throw ConfigError("conv2d: kernel sizes must be odd");
  weight_ = MakeParam("weight", {out_, in_, kh_, kw_});
  bias_ = MakeParam("bias", {out_});
}

Shape Conv2d::OutputShape(const std::vector<Shape> &in) const {
  RequireRank(in[0], 3, "conv2d");
  if (in[0][0] != in_)
    throw ShapeError("conv2d: expected " + std::to_string(in_) + " channels, got " + ShapeString(in[0]));
  size_t h = in[0][1], w = in[0][2];
  if (h == 0 || w == 0) throw ShapeError("conv2d: empty spatial input");
  return {out_, (h - 1) / sh_ + 1, (w - 1) / sw_ + 1};
}

Hyper Conv2d::hyper() const {
  return {{"in", double(in_)}, {"out", double(out_)}, {"kh", double(kh_)},
          {"kw", double(kw_)}, {"sh", double(sh_)},   {"sw", double(sw_)}};
}

void Conv2d::Init(Rng &rng) {
  HeUniform(weight_.value, in_ * kh_ * kw_, rng);
  std::fill(bias_.value.values.begin(), bias_.value.values.end(), 0.0);
}

Tensor Conv2d::Eval(const Inputs &in) const {
  const Tensor &x = *in[0];
  const size_t n = x.dim(0);
  ConvGeom g{in_, x.dim(2), x.dim(3), kh_, kw_, sh_, sw_, kh_ / 2, kw_ / 2, 0, 0};
  g.ho = (g.h - 1) / sh_ + 1;
  g.wo = (g.w - 1) / sw_ + 1;
  Tensor y({n, out_, g.ho, g.wo});
  CMapR W(weight_.value.data(), out_, g.K());
  Eigen::Map<const Eigen::VectorXd> b(bias_.value.data(), out_);
  Buffer col(g.pointwise() ? 0 : g.K() * g.P());
  for (size_t s = 0; s < n; ++s) {
    const double *xs = x.data() + s * in_ * g.h * g.w;
    if (!g.pointwise()) Im2Col(xs, g, col.data());
    CMapR C(g.pointwise() ? xs : col.data(), g.K(), g.P());
    MapR Y(y.data() + s * out_ * g.P(), out_, g.P());
    Y.noalias() = W * C;
    Y.colwise() += b;
  }
  return y;
}

Tensor Conv2d::Train(const Inputs &in, Rng *) {
  x_ = *in[0];
  return Eval(in);
}

std::vector<Tensor> Conv2d::Grad(const Tensor &grad_out) {
  const size_t n = x_.dim(0);
  ConvGeom g{in_, x_.dim(2), x_.dim(3), kh_, kw_, sh_, sw_, kh_ / 2, kw_ / 2,
             grad_out.dim(2), grad_out.dim(3)};
  Tensor dx(x_.shape);
  CMapR W(weight_.value.data(), out_, g.K());
  MapR dW(weight_.grad.data(), out_, g.K());
  Eigen::Map<Eigen::VectorXd> db(bias_.grad.data(), out_);
  Buffer col(g.K() * g.P()), dcol(g.K() * g.P());
  for (size_t s = 0; s < n; ++s) {
    const double *xs = x_.data() + s * in_ * g.h * g.w;
    double *dxs = dx.data() + s * in_ * g.h * g.w;
    CMapR dY(grad_out.data() + s * out_ * g.P(), out_, g.P());
    if (g.pointwise()) {
      CMapR C(xs, g.K(), g.P());
      dW.noalias() += dY * C.transpose();
      MapR(dxs, g.K(), g.P()).noalias() = W.transpose() * dY;
    } else {
      Im2Col(xs, g, col.data());
      CMapR C(col.data(), g.K(), g.P());
      dW.noalias() += dY * C.transpose();
      MapR dC(dcol.data(), g.K(), g.P());
      dC.noalias() = W.transpose() * dY;
      Col2Im(dcol.data(), g, dxs);
    }
    db += dY.rowwise().sum();
  }
  return {std::move(dx)};
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(size_t channels) : c_(channels) {
  if (c_ == 0) throw ConfigError("batch_norm: channels must be positive");
  gamma_ = MakeParam("gamma", {c_}, 1.0);
  beta_ = MakeParam("beta", {c_});
  running_mean_ = Tensor({c_}, 0.0);
  running_var_ = Tensor({c_}, 1.0);
}

Shape BatchNorm::OutputShape(const std::vector<Shape> &in) const {
  if (in[0].empty() || in[0][0] != c_)
    throw ShapeError("batch_norm: expected " + std::to_string(c_) + " channels, got " +
                     ShapeString(in[0]));
  return in[0];
}

Tensor BatchNorm::Eval(const Inputs &in) const {
  const Tensor &x = *in[0];
  const size_t n = x.dim(0), spatial = x.size() / (n * c_);
  Tensor y(x.shape);
  for (size_t c = 0; c < c_; ++c) {
    double scale = gamma_.value[c] / std::sqrt(running_var_[c] + kEpsilon);
    double shift = beta_.value[c] - running_mean_[c] * scale;
    for (size_t s = 0; s < n; ++s) {
      const double *src = x.data() + (s * c_ + c) * spatial;
      double *dst = y.data() + (s * c_ + c) * spatial;
      for (size_t k = 0; k < spatial; ++k) dst[k] = src[k] * scale + shift;
    }
  }
  return y;
}

Tensor BatchNorm::Train(const Inputs &in, Rng *) {
  const Tensor &x = *in[0];
  const size_t n = x.dim(0), spatial = x.size() / (n * c_);
  const double m = static_cast<double>(n * spatial);
  Tensor y(x.shape);
  xhat_ = Tensor(x.shape);
  inv_std_.assign(c_, 0.0);
  for (size_t c = 0; c < c_; ++c) {
    double mean = 0.0, var = 0.0;
    for (size_t s = 0; s < n; ++s) {
      const double *src = x.data() + (s * c_ + c) * spatial;
      for (size_t k = 0; k < spatial; ++k) mean += src[k];
    }
    mean /= m;
    for (size_t s = 0; s < n; ++s) {
      const double *src = x.data() + (s * c_ + c) * spatial;
      for (size_t k = 0; k < spatial; ++k) var += (src[k] - mean) * (src[k] - mean);
    }
    var /= m;
    double inv = 1.0 / std::sqrt(var + kEpsilon);
    inv_std_[c] = inv;
    for (size_t s = 0; s < n; ++s) {
      size_t off = (s * c_ + c) * spatial;
      for (size_t k = 0; k < spatial; ++k) {
        double xh = (x[off + k] - mean) * inv;
        xhat_[off + k] = xh;
        y[off + k] = gamma_.value[c] * xh + beta_.value[c];
      }
    }
    double unbiased = m > 1 ? var * m / (m - 1) : var;
    running_mean_[c] = kMomentum * running_mean_[c] + (1 - kMomentum) * mean;
    running_var_[c] = kMomentum * running_var_[c] + (1 - kMomentum) * unbiased;
  }
  return y;
}

std::vector<Tensor> BatchNorm::Grad(const Tensor &g) {
  const size_t n = g.dim(0), spatial = g.size() / (n * c_);
  const double m = static_cast<double>(n * spatial);
  Tensor dx(g.shape);
  for (size_t c = 0; c < c_; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (size_t s = 0; s < n; ++s) {
      size_t off = (s * c_ + c) * spatial;
      for (size_t k = 0; k < spatial; ++k) {
        sum_g += g[off + k];
        sum_gx += g[off + k] * xhat_[off + k];
      }
    }
    gamma_.grad[c] += sum_gx;
    beta_.grad[c] += sum_g;
    double k0 = gamma_.value[c] * inv_std_[c] / m;
    for (size_t s = 0; s < n; ++s) {
      size_t off = (s * c_ + c) * spatial;
      for (size_t k = 0; k < spatial; ++k)
        dx[off + k] = k0 * (m * g[off + k] - sum_g - xhat_[off + k] * sum_gx);
    }
  }
  return {std::move(dx)};
}

// ---------------------------------------------------------------- Relu

Tensor Relu::Eval(const Inputs &in) const {
  Tensor y = *in[0];
  for (double &v : y.values) v = std::max(v, 0.0);
  return y;
}

Tensor Relu::Train(const Inputs &in, Rng *) {
  x_ = *in[0];
  return Eval(in);
}

std::vector<Tensor> Relu::Grad(const Tensor &g) {
  Tensor dx = g;
  for (size_t i = 0; i < dx.size(); ++i)
    if (x_[i] <= 0.0) dx[i] = 0.0;
  return {std::move(dx)};
}

// ---------------------------------------------------------------- MaxPool

MaxPool::MaxPool(size_t pool_h, size_t pool_w) : ph_(pool_h), pw_(pool_w) {
  if (ph_ == 0 || pw_ == 0) throw ConfigError("max_pool: window must be positive");
}

Shape MaxPool::OutputShape(const std::vector<Shape> &in) const {
  RequireRank(in[0], 3, "max_pool");
  if (in[0][1] < ph_ || in[0][2] < pw_)
    throw ShapeError("max_pool: input " + ShapeString(in[0]) + " smaller than window");
  return {in[0][0], in[0][1] / ph_, in[0][2] / pw_};
}

Hyper MaxPool::hyper() const { return {{"ph", double(ph_)}, {"pw", double(pw_)}}; }

Tensor MaxPool::Pool(const Tensor &x, std::vector<size_t> *argmax) const {
  const size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const size_t ho = h / ph_, wo = w / pw_;
  Tensor y({n, c, ho, wo});
  if (argmax) argmax->assign(y.size(), 0);
  size_t o = 0;
  for (size_t p = 0; p < n * c; ++p) {
    const double *src = x.data() + p * h * w;
    for (size_t oy = 0; oy < ho; ++oy)
      for (size_t ox = 0; ox < wo; ++ox, ++o) {
        size_t best = (oy * ph_) * w + ox * pw_;
        for (size_t i = 0; i < ph_; ++i)
          for (size_t j = 0; j < pw_; ++j) {
            size_t idx = (oy * ph_ + i) * w + ox * pw_ + j;
            if (src[idx] > src[best]) best = idx;
          }
        y[o] = src[best];
        if (argmax) (*argmax)[o] = p * h * w + best;
      }
  }
  return y;
}

Tensor MaxPool::Eval(const Inputs &in) const { return Pool(*in[0], nullptr); }

Tensor MaxPool::Train(const Inputs &in, Rng *) {
  in_shape_ = in[0]->shape;
  return Pool(*in[0], &argmax_);
}

std::vector<Tensor> MaxPool::Grad(const Tensor &g) {
  Tensor dx(in_shape_);
  for (size_t o = 0; o < g.size(); ++o) dx[argmax_[o]] += g[o];
  return {std::move(dx)};
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout: rate must lie in [0, 1)");
}

Tensor Dropout::Train(const Inputs &in, Rng *rng) {
  const Tensor &x = *in[0];
  mask_.assign(x.size(), 1.0);
  if (rate_ > 0.0) {
    if (rng == nullptr) throw Error("dropout: train mode needs a random generator");
    const double keep = 1.0 / (1.0 - rate_);
    for (double &m : mask_) m = rng->Uniform() < rate_ ? 0.0 : keep;
  }
  Tensor y = x;
  for (size_t i = 0; i < y.size(); ++i) y[i] *= mask_[i];
  return y;
}

std::vector<Tensor> Dropout::Grad(const Tensor &g) {
  Tensor dx = g;
  for (size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
  return {std::move(dx)};
}

// ---------------------------------------------------------------- GlobalAvgPool

Shape GlobalAvgPool::OutputShape(const std::vector<Shape> &in) const {
  RequireRank(in[0], 3, "global_avg_pool");
  if (in[0][1] * in[0][2] == 0) throw ShapeError("global_avg_pool: empty spatial input");
  return {in[0][0]};
}

Tensor GlobalAvgPool::Eval(const Inputs &in) const {
  const Tensor &x = *in[0];
  const size_t n = x.dim(0), c = x.dim(1), s = x.dim(2) * x.dim(3);
  Tensor y({n, c});
  for (size_t p = 0; p < n * c; ++p) {
    double acc = 0.0;
    for (size_t k = 0; k < s; ++k) acc += x[p * s + k];
    y[p] = acc / static_cast<double>(s);
  }
  return y;
}

Tensor GlobalAvgPool::Train(const Inputs &in, Rng *) {
  in_shape_ = in[0]->shape;
  return Eval(in);
}

std::vector<Tensor> GlobalAvgPool::Grad(const Tensor &g) {
  Tensor dx(in_shape_);
  const size_t s = in_shape_[2] * in_shape_[3];
  for (size_t p = 0; p < g.size(); ++p) {
    double v = g[p] / static_cast<double>(s);
    std::fill(dx.values.begin() + p * s, dx.values.begin() + (p + 1) * s, v);
  }
  return {std::move(dx)};
}

// ---------------------------------------------------------------- ChannelAttention

ChannelAttention::ChannelAttention(size_t channels, size_t reduction)
    : c_(channels), reduction_(reduction) {
  if (c_ == 0 || reduction_ == 0) throw ConfigError("channel_attention: sizes must be positive");
  hidden_ = std::max<size_t>(1, c_ / reduction_);
  w1_ = MakeParam("w1", {hidden_, c_});
  b1_ = MakeParam("b1", {hidden_});
  w2_ = MakeParam("w2", {c_, hidden_});
  b2_ = MakeParam("b2", {c_});
}

Shape ChannelAttention::OutputShape(const std::vector<Shape> &in) const {
  RequireRank(in[0], 3, "channel_attention");
  if (in[0][0] != c_)
    throw ShapeError("channel_attention: expected " + std::to_string(c_) + " channels, got " +
                     ShapeString(in[0]));
  return in[0];
}

Hyper ChannelAttention::hyper() const {
  return {{"channels", double(c_)}, {"reduction", double(reduction_)}};
}

void ChannelAttention::Init(Rng &rng) {
  HeUniform(w1_.value, c_, rng);
  HeUniform(w2_.value, hidden_, rng);
  std::fill(b1_.value.values.begin(), b1_.value.values.end(), 0.0);
  std::fill(b2_.value.values.begin(), b2_.value.values.end(), 0.0);
}

ChannelAttention::Squeeze ChannelAttention::Excite(const Tensor &x) const {
  const size_t n = x.dim(0), s = x.dim(2) * x.dim(3);
  Squeeze q;
  q.pooled.assign(n * c_, 0.0);
  q.hidden_pre.assign(n * hidden_, 0.0);
  q.scale.assign(n * c_, 0.0);
  for (size_t b = 0; b < n; ++b) {
    for (size_t c = 0; c < c_; ++c) {
      double acc = 0.0;
      const double *src = x.data() + (b * c_ + c) * s;
      for (size_t k = 0; k < s; ++k) acc += src[k];
      q.pooled[b * c_ + c] = acc / static_cast<double>(s);
    }
    for (size_t j = 0; j < hidden_; ++j) {
      double z = b1_.value[j];
      for (size_t c = 0; c < c_; ++c) z += w1_.value[j * c_ + c] * q.pooled[b * c_ + c];
      q.hidden_pre[b * hidden_ + j] = z;
    }
    for (size_t c = 0; c < c_; ++c) {
      double z = b2_.value[c];
      for (size_t j = 0; j < hidden_; ++j)
        z += w2_.value[c * hidden_ + j] * std::max(0.0, q.hidden_pre[b * hidden_ + j]);
      q.scale[b * c_ + c] = Logistic(z);
    }
  }
  return q;
}

Tensor ChannelAttention::Scales(const Tensor &x) const {
  Infer({&x});
  Tensor s({x.dim(0), c_});
  auto scale = Excite(x).scale;
  s.values.assign(scale.begin(), scale.end());
  return s;
}

Tensor ChannelAttention::Eval(const Inputs &in) const {
  const Tensor &x = *in[0];
  Squeeze q = Excite(x);
  const size_t s = x.dim(2) * x.dim(3);
  Tensor y = x;
  for (size_t p = 0; p < q.scale.size(); ++p)
    for (size_t k = 0; k < s; ++k) y[p * s + k] *= q.scale[p];
  return y;
}

Tensor ChannelAttention::Train(const Inputs &in, Rng *) {
  x_ = *in[0];
  sq_ = Excite(x_);
  return Eval(in);
}

std::vector<Tensor> ChannelAttention::Grad(const Tensor &g) {
  const size_t n = x_.dim(0), s = x_.dim(2) * x_.dim(3);
  Tensor dx(x_.shape);
  std::vector<double> dz2(c_), dz1(hidden_);
  for (size_t b = 0; b < n; ++b) {
    for (size_t c = 0; c < c_; ++c) {
      size_t off = (b * c_ + c) * s;
      double ds = 0.0;
      for (size_t k = 0; k < s; ++k) ds += g[off + k] * x_[off + k];
      double sc = sq_.scale[b * c_ + c];
      dz2[c] = ds * sc * (1.0 - sc);
    }
    for (size_t j = 0; j < hidden_; ++j) {
      double hp = sq_.hidden_pre[b * hidden_ + j];
      double r = std::max(0.0, hp), dr = 0.0;
      for (size_t c = 0; c < c_; ++c) {
        w2_.grad[c * hidden_ + j] += dz2[c] * r;
        dr += w2_.value[c * hidden_ + j] * dz2[c];
      }
      dz1[j] = hp > 0.0 ? dr : 0.0;
      b1_.grad[j] += dz1[j];
    }
    for (size_t c = 0; c < c_; ++c) {
      b2_.grad[c] += dz2[c];
      double dpool = 0.0;
      for (size_t j = 0; j < hidden_; ++j) {
        w1_.grad[j * c_ + c] += dz1[j] * sq_.pooled[b * c_ + c];
        dpool += w1_.value[j * c_ + c] * dz1[j];
      }
      size_t off = (b * c_ + c) * s;
      double sc = sq_.scale[b * c_ + c];
      double spread = dpool / static_cast<double>(s);
      for (size_t k = 0; k < s; ++k) dx[off + k] = g[off + k] * sc + spread;
    }
  }
  return {std::move(dx)};
}

// ---------------------------------------------------------------- ResidualAdd

Shape ResidualAdd::OutputShape(const std::vector<Shape> &in) const {
  if (in[0] != in[1])
    throw ShapeError("residual_add: shapes differ: " + ShapeString(in[0]) + " vs " + ShapeString(in[1]));
  return in[0];
}

Tensor ResidualAdd::Eval(const Inputs &in) const {
  Tensor y = *in[0];
  for (size_t i = 0; i < y.size(); ++i) y[i] += (*in[1])[i];
  return y;
}

// ---------------------------------------------------------------- Dense

Dense::Dense(size_t in_features, size_t out_features) : in_(in_features), out_(out_features) {
  if (in_ == 0 || out_ == 0) throw ConfigError("dense: sizes must be positive");
  weight_ = MakeParam("weight", {out_, in_});
  bias_ = MakeParam("bias", {out_});
}

Shape Dense::OutputShape(const std::vector<Shape> &in) const {
  if (NumElements(in[0]) != in_)
    throw ShapeError("dense: expected " + std::to_string(in_) + " features, got " + ShapeString(in[0]));
  return {out_};
}

Hyper Dense::hyper() const { return {{"in", double(in_)}, {"out", double(out_)}}; }

void Dense::Init(Rng &rng) {
  HeUniform(weight_.value, in_, rng);
  std::fill(bias_.value.values.begin(), bias_.value.values.end(), 0.0);
}

Tensor Dense::Eval(const Inputs &in) const {
  const Tensor &x = *in[0];
  const size_t n = x.dim(0);
  Tensor y({n, out_});
  CMapR X(x.data(), n, in_);
  CMapR W(weight_.value.data(), out_, in_);
  MapR Y(y.data(), n, out_);
  Y.noalias() = X * W.transpose();
  Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias_.value.data(), out_);
  return y;
}

Tensor Dense::Train(const Inputs &in, Rng *) {
  x_ = *in[0];
  return Eval(in);
}

std::vector<Tensor> Dense::Grad(const Tensor &g) {
  const size_t n = x_.dim(0);
  CMapR X(x_.data(), n, in_);
  CMapR G(g.data(), n, out_);
  CMapR W(weight_.value.data(), out_, in_);
  MapR(weight_.grad.data(), out_, in_).noalias() += G.transpose() * X;
  Eigen::Map<Eigen::RowVectorXd>(bias_.grad.data(), out_) += G.colwise().sum();
  Tensor dx(x_.shape);
  MapR(dx.data(), n, in_).noalias() = G * W;
  return {std::move(dx)};
}

// ---------------------------------------------------------------- Softmax

Tensor SoftmaxRows(const Tensor &logits) {
  if (logits.rank() != 2) throw ShapeError("softmax: expected (N, K), got " + ShapeString(logits.shape));
  const size_t n = logits.dim(0), k = logits.dim(1);
  Tensor y(logits.shape);
  for (size_t r = 0; r < n; ++r) {
    const double *z = logits.data() + r * k;
    double *p = y.data() + r * k;
    double mx = *std::max_element(z, z + k);
    double sum = 0.0;
    for (size_t j = 0; j < k; ++j) sum += (p[j] = std::exp(z[j] - mx));
    for (size_t j = 0; j < k; ++j) p[j] /= sum;
  }
  return y;
}

Shape Softmax::OutputShape(const std::vector<Shape> &in) const {
  RequireRank(in[0], 1, "softmax");
  if (in[0][0] == 0) throw ShapeError("softmax: empty row");
  return in[0];
}

Tensor Softmax::Eval(const Inputs &in) const { return SoftmaxRows(*in[0]); }

Tensor Softmax::Train(const Inputs &in, Rng *) {
  y_ = SoftmaxRows(*in[0]);
  return y_;
}

std::vector<Tensor> Softmax::Grad(const Tensor &g) {
  const size_t n = y_.dim(0), k = y_.dim(1);
  Tensor dx(y_.shape);
  for (size_t r = 0; r < n; ++r) {
    double dot = 0.0;
    for (size_t j = 0; j < k; ++j) dot += g[r * k + j] * y_[r * k + j];
    for (size_t j = 0; j < k; ++j) dx[r * k + j] = y_[r * k + j] * (g[r * k + j] - dot);
  }
  return {std::move(dx)};
}

// ---------------------------------------------------------------- FreqSlice / FreqConcat

FreqSlice::FreqSlice(size_t begin, size_t end) : begin_(begin), end_(end) {
  if (begin_ >= end_) throw ConfigError("freq_slice: empty range");
}

Shape FreqSlice::OutputShape(const std::vector<Shape> &in) const {
  RequireRank(in[0], 3, "freq_slice");
  if (end_ > in[0][2])
    throw ShapeError("freq_slice: range end " + std::to_string(end_) + " beyond " + ShapeString(in[0]));
  return {in[0][0], in[0][1], end_ - begin_};
}

Hyper FreqSlice::hyper() const { return {{"begin", double(begin_)}, {"end", double(end_)}}; }

Tensor FreqSlice::Eval(const Inputs &in) const {
  const Tensor &x = *in[0];
  const size_t rows = x.dim(0) * x.dim(1) * x.dim(2), w = x.dim(3), wo = end_ - begin_;
  Tensor y({x.dim(0), x.dim(1), x.dim(2), wo});
  for (size_t r = 0; r < rows; ++r)
    std::copy_n(x.data() + r * w + begin_, wo, y.data() + r * wo);
  return y;
}

Tensor FreqSlice::Train(const Inputs &in, Rng *) {
  in_shape_ = in[0]->shape;
  return Eval(in);
}

std::vector<Tensor> FreqSlice::Grad(const Tensor &g) {
  Tensor dx(in_shape_);
  const size_t w = in_shape_[3], wo = end_ - begin_, rows = dx.size() / w;
  for (size_t r = 0; r < rows; ++r) std::copy_n(g.data() + r * wo, wo, dx.data() + r * w + begin_);
  return {std::move(dx)};
}

Shape FreqConcat::OutputShape(const std::vector<Shape> &in) const {
  RequireRank(in[0], 3, "freq_concat");
  RequireRank(in[1], 3, "freq_concat");
  if (in[0][0] != in[1][0] || in[0][1] != in[1][1])
    throw ShapeError("freq_concat: channel/time mismatch " + ShapeString(in[0]) + " vs " + ShapeString(in[1]));
  return {in[0][0], in[0][1], in[0][2] + in[1][2]};
}

Tensor FreqConcat::Eval(const Inputs &in) const {
  const Tensor &a = *in[0], &b = *in[1];
  const size_t rows = a.dim(0) * a.dim(1) * a.dim(2), wa = a.dim(3), wb = b.dim(3);
  Tensor y({a.dim(0), a.dim(1), a.dim(2), wa + wb});
  for (size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data() + r * wa, wa, y.data() + r * (wa + wb));
    std::copy_n(b.data() + r * wb, wb, y.data() + r * (wa + wb) + wa);
  }
  return y;
}

Tensor FreqConcat::Train(const Inputs &in, Rng *) {
  w0_ = in[0]->dim(3);
  w1_ = in[1]->dim(3);
  return Eval(in);
}

std::vector<Tensor> FreqConcat::Grad(const Tensor &g) {
  const size_t w = w0_ + w1_, rows = g.size() / w;
  Tensor da({g.dim(0), g.dim(1), g.dim(2), w0_}), db({g.dim(0), g.dim(1), g.dim(2), w1_});
  for (size_t r = 0; r < rows; ++r) {
    std::copy_n(g.data() + r * w, w0_, da.data() + r * w0_);
    std::copy_n(g.data() + r * w + w0_, w1_, db.data() + r * w1_);
  }
  return {std::move(da), std::move(db)};
}

// ---------------------------------------------------------------- factory

std::unique_ptr<Layer> MakeLayer(LayerKind kind, const Hyper &h) {
  switch (kind) {
    case LayerKind::kConv2d:
      return std::make_unique<Conv2d>(Need(h, "in"), Need(h, "out"), Need(h, "kh"), Need(h, "kw"),
                                      Need(h, "sh"), Need(h, "sw"));
    case LayerKind::kBatchNorm:
      return std::make_unique<BatchNorm>(Need(h, "channels"));
    case LayerKind::kRelu:
      return std::make_unique<Relu>();
    case LayerKind::kMaxPool:
      return std::make_unique<MaxPool>(Need(h, "ph"), Need(h, "pw"));
    case LayerKind::kDropout: {
      auto it = h.find("rate");
      if (it == h.end()) throw ConfigError("layer hyperparameter missing: rate");
      return std::make_unique<Dropout>(it->second);
    }
    case LayerKind::kGlobalAvgPool:
      return std::make_unique<GlobalAvgPool>();
    case LayerKind::kChannelAttention:
      return std::make_unique<ChannelAttention>(Need(h, "channels"), Need(h, "reduction"));
    case LayerKind::kResidualAdd:
      return std::make_unique<ResidualAdd>();
    case LayerKind::kDense:
      return std::make_unique<Dense>(Need(h, "in"), Need(h, "out"));
    case LayerKind::kSoftmax:
      return std::make_unique<Softmax>();
    case LayerKind::kFreqSlice:
      return std::make_unique<FreqSlice>(Need(h, "begin"), Need(h, "end"));
    case LayerKind::kFreqConcat:
      return std::make_unique<FreqConcat>();
  }
  throw ConfigError("unknown layer kind");
}

}  // namespace ascene
