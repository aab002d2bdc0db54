// include/ascene/model.h

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

#ifndef ASCENE_MODEL_H_
#define ASCENE_MODEL_H_

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ascene/layers.h"

namespace ascene {

/// Directed acyclic layer graph. Node 0 is the input; nodes are appended in
/// topological order and the last node is the output.
class Model {
 public:
  explicit Model(Shape input_shape);
  Model(Model &&) = default;
  Model &operator=(Model &&) = default;

  /// Appends a node fed by earlier nodes; returns its id.
  int Add(std::unique_ptr<Layer> layer, std::vector<int> inputs);
  int Add(std::unique_ptr<Layer> layer, int input) { return Add(std::move(layer), std::vector<int>{input}); }

  size_t size() const { return nodes_.size(); }
  int output() const { return static_cast<int>(nodes_.size()) - 1; }
  /// The node feeding a trailing softmax, or the output when there is none.
  int logits_node() const;
  const Shape &input_shape() const { return nodes_[0].shape; }
  const Shape &shape(int id) const { return nodes_.at(id).shape; }
  const std::vector<int> &inputs(int id) const { return nodes_.at(id).inputs; }
  /// Null for the input node.
  const Layer *layer(int id) const { return nodes_.at(id).layer.get(); }
  Layer *layer(int id) { return nodes_.at(id).layer.get(); }

  void Init(Rng &rng);
  /// Runs nodes 1..upto (default: output) and returns node `upto`.
  Tensor Forward(const Tensor &x, Mode mode, Rng *rng, int upto = -1);
  /// Gradient flowing from node `from`; returns the gradient w.r.t. the input.
  Tensor Backward(const Tensor &grad, int from);
  void ZeroGrad();

  /// Eval-mode forward without touching any state.
  Tensor Infer(const Tensor &x) const;
  std::vector<Tensor> InferAll(const Tensor &x) const;

  std::vector<Param *> Params();
  /// Parameter values followed by buffers, in node order.
  std::vector<Tensor *> State();
  std::vector<const Tensor *> State() const;
  size_t ParameterCount() const;
  /// Human-readable graph listing (one node per line).
  std::string Describe() const;

 private:
  struct Node {
    std::unique_ptr<Layer> layer;
    std::vector<int> inputs;
    Shape shape;
  };
  void CheckInput(const Tensor &x) const;
  std::vector<Node> nodes_;
};

struct Checkpoint {
  std::string config_text;
  Model model;
};

std::string EncodeCheckpoint(const Model &model, std::string_view config_text);
Checkpoint DecodeCheckpoint(std::string_view bytes);
void SaveCheckpoint(const std::filesystem::path &path, const Model &model, std::string_view config_text);
Checkpoint LoadCheckpoint(const std::filesystem::path &path);

}  // namespace ascene

#endif  // ASCENE_MODEL_H_
