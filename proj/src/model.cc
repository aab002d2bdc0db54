// src/model.cc

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

#include "ascene/model.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ascene/error.h"

namespace ascene {

Model::Model(Shape input_shape) {
  if (input_shape.empty() || NumElements(input_shape) == 0)
    throw ShapeError("model: empty input shape");
  nodes_.push_back({nullptr, {}, std::move(input_shape)});
}

int Model::Add(std::unique_ptr<Layer> layer, std::vector<int> inputs) {
  if (!layer) throw ConfigError("model: null layer");
  if (inputs.size() != layer->arity())
    throw ShapeError(std::string(LayerKindName(layer->kind())) + ": wrong number of inputs");
  std::vector<Shape> shapes;
  for (int id : inputs) {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
      throw ConfigError("model: input node " + std::to_string(id) + " does not exist yet");
    shapes.push_back(nodes_[id].shape);
  }
  Shape out = layer->OutputShape(shapes);
  nodes_.push_back({std::move(layer), std::move(inputs), std::move(out)});
  return output();
}

int Model::logits_node() const {
  const Layer *last = layer(output());
  if (last && last->kind() == LayerKind::kSoftmax) return nodes_.back().inputs[0];
  return output();
}

void Model::Init(Rng &rng) {
  for (auto &n : nodes_)
    if (n.layer) n.layer->Init(rng);
}

void Model::CheckInput(const Tensor &x) const {
  if (x.rank() != input_shape().size() + 1 || x.SampleShape() != input_shape())
    throw ShapeError("model: input " + ShapeString(x.shape) + " does not match (N, " +
                     ShapeString(input_shape()).substr(1));
}

Tensor Model::Forward(const Tensor &x, Mode mode, Rng *rng, int upto) {
  CheckInput(x);
  if (upto < 0) upto = output();
  std::vector<Tensor> out(upto + 1);
  out[0] = x;
  for (int id = 1; id <= upto; ++id) {
    Inputs in;
    for (int j : nodes_[id].inputs) in.push_back(&out[j]);
    out[id] = nodes_[id].layer->Forward(in, mode, rng);
  }
  return std::move(out[upto]);
}

Tensor Model::Backward(const Tensor &grad, int from) {
  std::vector<Tensor> grads(from + 1);
  grads[from] = grad;
  for (int id = from; id >= 1; --id) {
    if (grads[id].shape.empty()) continue;
    std::vector<Tensor> gi = nodes_[id].layer->Backward(grads[id]);
    for (size_t k = 0; k < gi.size(); ++k) {
      Tensor &dst = grads[nodes_[id].inputs[k]];
      if (dst.shape.empty()) {
        dst = std::move(gi[k]);
      } else {
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += gi[k][i];
      }
    }
    grads[id] = Tensor();
  }
  return std::move(grads[0]);
}

void Model::ZeroGrad() {
  for (auto &n : nodes_)
    if (n.layer) n.layer->ZeroGrad();
}

std::vector<Tensor> Model::InferAll(const Tensor &x) const {
  CheckInput(x);
  std::vector<Tensor> out(nodes_.size());
  out[0] = x;
  for (size_t id = 1; id < nodes_.size(); ++id) {
    Inputs in;
    for (int j : nodes_[id].inputs) in.push_back(&out[j]);
    out[id] = nodes_[id].layer->Infer(in);
  }
  return out;
}

Tensor Model::Infer(const Tensor &x) const { return std::move(InferAll(x).back()); }

std::vector<Param *> Model::Params() {
  std::vector<Param *> ps;
  for (auto &n : nodes_)
    if (n.layer)
      for (Param *p : n.layer->Params()) ps.push_back(p);
  return ps;
}

std::vector<Tensor *> Model::State() {
  std::vector<Tensor *> out;
  for (auto &n : nodes_) {
    if (!n.layer) continue;
    for (Param *p : n.layer->Params()) out.push_back(&p->value);
    for (Tensor *b : n.layer->Buffers()) out.push_back(b);
  }
  return out;
}

std::vector<const Tensor *> Model::State() const {
  auto s = const_cast<Model *>(this)->State();
  return std::vector<const Tensor *>(s.begin(), s.end());
}

size_t Model::ParameterCount() const {
  size_t total = 0;
  for (const auto &n : nodes_)
    if (n.layer)
      for (const Param *p : n.layer->Params()) total += p->value.size();
  return total;
}

std::string Model::Describe() const {
  std::ostringstream os;
  os << "0 input " << ShapeString(input_shape()) << "\n";
  for (size_t id = 1; id < nodes_.size(); ++id) {
    const Node &n = nodes_[id];
    os << id << " " << LayerKindName(n.layer->kind()) << " <-";
    for (int j : n.inputs) os << " " << j;
    for (const auto &[k, v] : n.layer->hyper()) os << " " << k << "=" << v;
    os << " -> " << ShapeString(n.shape) << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[8] = {'A', 'S', 'C', 'N', 'N', 'E', 'T', '\0'};
constexpr uint32_t kVersion = 1;

class Writer {
 public:
  void U32(uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void U64(uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void F64(double v) { U64(std::bit_cast<uint64_t>(v)); }
  void Str(std::string_view s) {
    U32(static_cast<uint32_t>(s.size()));
    out_.append(s);
  }
  void Raw(const char *p, size_t n) { out_.append(p, n); }
  void Dims(const Shape &s) {
    U32(static_cast<uint32_t>(s.size()));
    for (size_t d : s) U64(d);
  }
  std::string &str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  uint64_t Uint(int bytes) {
    Need(bytes);
    uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += bytes;
    return v;
  }
  uint32_t U32() { return static_cast<uint32_t>(Uint(4)); }
  uint64_t U64() { return Uint(8); }
  double F64() { return std::bit_cast<double>(U64()); }
  std::string Str() {
    uint32_t n = U32();
    Need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view Raw(size_t n) {
    Need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Shape Dims() {
    uint32_t r = U32();
    if (r > 16) throw Error("checkpoint: implausible rank");
    Shape s(r);
    for (auto &d : s) d = U64();
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void Need(size_t n) const {
    if (in_.size() - pos_ < n) throw Error("checkpoint: truncated");
  }
  std::string_view in_;
  size_t pos_ = 0;
};

}  // namespace

std::string EncodeCheckpoint(const Model &model, std::string_view config_text) {
  Writer w;
  w.Raw(kMagic, sizeof(kMagic));
  w.U32(kVersion);
  w.Str(config_text);
  w.Dims(model.input_shape());
  w.U32(static_cast<uint32_t>(model.size() - 1));
  for (int id = 1; id < static_cast<int>(model.size()); ++id) {
    const Layer *l = model.layer(id);
    w.Str(LayerKindName(l->kind()));
    w.U32(static_cast<uint32_t>(model.inputs(id).size()));
    for (int j : model.inputs(id)) w.U32(static_cast<uint32_t>(j));
    Hyper h = l->hyper();
    w.U32(static_cast<uint32_t>(h.size()));
    for (const auto &[k, v] : h) {
      w.Str(k);
      w.F64(v);
    }
    w.Dims(model.shape(id));
  }
  auto state = model.State();
  w.U64(state.size());
  for (const Tensor *t : state) {
    w.Dims(t->shape);
    for (double v : t->values) w.F64(v);
  }
  return std::move(w.str());
}

Checkpoint DecodeCheckpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.Raw(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic)))
    throw Error("checkpoint: bad magic number");
  uint32_t version = r.U32();
  if (version != kVersion) throw Error("checkpoint: unsupported version " + std::to_string(version));
  std::string config = r.Str();
  Model model(r.Dims());
  uint32_t n_nodes = r.U32();
  for (uint32_t i = 0; i < n_nodes; ++i) {
    std::string kind_name = r.Str();
    auto kind = ParseLayerKind(kind_name);
    if (!kind) throw Error("checkpoint: unknown layer kind '" + kind_name + "'");
    std::vector<int> inputs(r.U32());
    for (int &j : inputs) j = static_cast<int>(r.U32());
    Hyper h;
    uint32_t nh = r.U32();
    for (uint32_t k = 0; k < nh; ++k) {
      std::string key = r.Str();
      h[key] = r.F64();
    }
    int id = model.Add(MakeLayer(*kind, h), inputs);
    if (model.shape(id) != r.Dims()) throw Error("checkpoint: node " + std::to_string(id) + " shape mismatch");
  }
  auto state = model.State();
  if (r.U64() != state.size()) throw Error("checkpoint: parameter tensor count mismatch");
  for (Tensor *t : state) {
    if (r.Dims() != t->shape) throw Error("checkpoint: parameter shape mismatch");
    for (double &v : t->values) v = r.F64();
  }
  if (!r.done()) throw Error("checkpoint: trailing bytes");
  return Checkpoint{std::move(config), std::move(model)};
}

void SaveCheckpoint(const std::filesystem::path &path, const Model &model, std::string_view config_text) {
  std::string bytes = EncodeCheckpoint(model, config_text);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint LoadCheckpoint(const std::filesystem::path &path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError(path.string());
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return DecodeCheckpoint(bytes);
}

}  // namespace ascene
