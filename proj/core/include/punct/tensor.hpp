// core/include/punct/tensor.hpp
//
// Copyright 2026  The punct Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Dense row-major tensors of doubles and a tape-based reverse-mode
// autodiff graph with the handful of ops the encoders need.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace punct {

using Shape = std::vector<std::size_t>;

std::size_t shape_product(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  // Enabling allocates a zeroed gradient buffer; disabling drops it.
  void set_requires_grad(bool on);
  bool has_grad() const noexcept { return requires_grad_; }
  std::span<double> grad() noexcept { return grad_; }
  std::span<const double> grad() const noexcept { return grad_; }
  void zero_grad();

  Tensor reshaped(Shape shape) const;
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
  std::vector<double> grad_;
};

enum class OpKind {
  Constant,
  Parameter,
  MatMul,
  Add,
  Sub,
  Mul,
  Scale,
  AddBias,
  Relu,
  Tanh,
  Sigmoid,
  Softmax,
  LayerNorm,
  Conv1d,
  Conv2d,
  MaxPool2d,
  Embedding,
  SelectRows,
  ConcatCols,
  SliceCols,
  Reshape,
  Sum,
  CrossEntropy,
  Attention,
};

const char* op_name(OpKind kind);

class Graph;

// Lightweight handle to a node. Valid only for the lifetime of its graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Nodes are appended in evaluation order, so every input id precedes its
// consumer and the tape is topologically sorted by construction.
//
// When constructed with record = false no backward closures or gradient
// bookkeeping are kept, which is what inference should use.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Aliases `param`, which must outlive the graph. Gradients are added into
  // param.grad() by backward() when param.requires_grad() is set.
  Var parameter(Tensor& param);

  const Tensor& value(std::size_t id) const;
  std::span<const double> grad(Var v) const;
  OpKind kind(Var v) const { return nodes_[v.id].kind; }
  const std::vector<std::size_t>& inputs(Var v) const { return nodes_[v.id].inputs; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool recording() const noexcept { return record_; }

  void backward(Var loss);

  // Op-implementation interface.
  Var emit(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of a node, allocated zeroed on first use.
  std::vector<double>& grad_buffer(std::size_t id);

 private:
  struct Node {
    OpKind kind = OpKind::Constant;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor* param = nullptr;
    BackwardFn backward;
    std::vector<double> grad;
    bool needs_grad = false;
  };

  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> param_nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// x has last dimension n; bias has shape [n] and is broadcast over the rest.
Var add_bias(Var x, Var bias);
Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);
Var softmax(Var x, std::size_t axis);
// Normalizes over the last axis.
Var layer_norm(Var x, Var gain, Var bias, double epsilon = 1e-5);

struct Conv1dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};
// input [batch, length, in_channels], kernels [out_channels, in_channels, width],
// bias [out_channels] -> [batch, out_length, out_channels].
Var conv1d(Var input, Var kernels, Var bias, Conv1dOptions options = {});
Var conv1d(Var input, Var kernels, Conv1dOptions options = {});

struct Conv2dOptions {
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_h = 0, pad_w = 0;
};
// input [batch, in_channels, height, width], kernels [out, in, kh, kw],
// bias [out] -> [batch, out, out_h, out_w].
Var conv2d(Var input, Var kernels, Var bias, Conv2dOptions options = {});
Var conv2d(Var input, Var kernels, Conv2dOptions options = {});
// Non-overlapping max pooling; trailing rows/columns that do not fill a
// window are dropped.
Var max_pool2d(Var input, std::size_t pool_h, std::size_t pool_w);

// table [vocab, dim] -> [ids.size(), dim].
Var embedding(Var table, std::span<const std::int64_t> ids);
// Rows of x viewed as [dim(0), rest].
Var select_rows(Var x, std::span<const std::size_t> rows);
// 2-D inputs with equal row counts.
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var x, std::size_t begin, std::size_t end);
Var reshape(Var x, Shape shape);
Var sum(Var x);
// Mean over the batch of -log softmax(logits)[target].
Var cross_entropy(Var logits, std::span<const std::size_t> targets);

struct AttentionShape {
  std::size_t batch = 1;
  std::size_t query_len = 1;
  std::size_t key_len = 1;
  std::size_t heads = 1;
};
// Multi-head scaled dot-product attention. queries [batch*query_len, d],
// keys/values [batch*key_len, d]; key_mask[b*key_len + j] == 0 removes key j of
// example b from every softmax. Masked keys are skipped entirely, so their
// contents cannot influence the output.
Var attention(Var queries, Var keys, Var values, std::span<const std::uint8_t> key_mask,
              AttentionShape shape);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  long step = 0;
};

// One bias-corrected Adam update using each tensor's accumulated grad().
void adam_step(std::span<Tensor* const> params, AdamState& state, const AdamOptions& options);
void sgd_step(std::span<Tensor* const> params, double lr);

}  // namespace punct
