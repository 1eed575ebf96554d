// core/src/tensor.cpp
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

#include "punct/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

#include "punct/errors.hpp"

namespace punct {

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_)
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape_));
  data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  for (auto d : shape_)
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape_));
  if (shape_product(shape_) != data_.size())
    throw DimensionError("shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
}

Tensor Tensor::scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size())
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
  return shape_[axis];
}

double Tensor::item() const {
  if (data_.size() != 1) throw DimensionError("item() on non-scalar tensor " + shape_string(shape_));
  return data_[0];
}

void Tensor::set_requires_grad(bool on) {
  requires_grad_ = on;
  if (on)
    grad_.assign(data_.size(), 0.0);
  else
    grad_.clear();
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

Tensor Tensor::reshaped(Shape shape) const {
  Tensor out(std::move(shape), data_);
  return out;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Constant: return "constant";
    case OpKind::Parameter: return "parameter";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::AddBias: return "add_bias";
    case OpKind::Relu: return "relu";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Softmax: return "softmax";
    case OpKind::LayerNorm: return "layer_norm";
    case OpKind::Conv1d: return "conv1d";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::MaxPool2d: return "max_pool2d";
    case OpKind::Embedding: return "embedding";
    case OpKind::SelectRows: return "select_rows";
    case OpKind::ConcatCols: return "concat_cols";
    case OpKind::SliceCols: return "slice_cols";
    case OpKind::Reshape: return "reshape";
    case OpKind::Sum: return "sum";
    case OpKind::CrossEntropy: return "cross_entropy";
    case OpKind::Attention: return "attention";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph->value(id); }

// ---------------------------------------------------------------------------
// Graph

Var Graph::constant(Tensor value) {
  Node node;
  node.kind = OpKind::Constant;
  node.needs_grad = record_ && value.requires_grad();
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Graph::parameter(Tensor& param) {
  if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) return Var{this, it->second};
  Node node;
  node.kind = OpKind::Parameter;
  node.param = &param;
  node.needs_grad = record_ && param.requires_grad();
  nodes_.push_back(std::move(node));
  param_nodes_.emplace(&param, nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

const Tensor& Graph::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.param ? *n.param : n.value;
}

std::span<const double> Graph::grad(Var v) const { return nodes_[v.id].grad; }

Var Graph::emit(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward) {
  Node node;
  node.kind = kind;
  node.value = std::move(value);
  if (record_) {
    node.needs_grad = std::any_of(inputs.begin(), inputs.end(),
                                  [this](std::size_t i) { return nodes_[i].needs_grad; });
    if (node.needs_grad) node.backward = std::move(backward);
  }
  node.inputs = std::move(inputs);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

std::vector<double>& Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(value(id).size(), 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  if (!record_) throw ValidationError("backward() called on a graph built without recording");
  if (value(loss.id).size() != 1)
    throw DimensionError("backward() needs a scalar loss, got shape " + shape_string(value(loss.id).shape()));
  if (!nodes_[loss.id].needs_grad) return;
  grad_buffer(loss.id)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param && n.param->requires_grad()) {
      auto dst = n.param->grad();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
    }
  }
}

// ---------------------------------------------------------------------------
// Ops

namespace {

Graph& graph_of(Var a) {
  if (!a.graph) throw ValidationError("operation on a detached Var");
  return *a.graph;
}

void same_graph(Var a, Var b) {
  if (a.graph != b.graph) throw ValidationError("operands belong to different graphs");
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
}

template <typename Fwd, typename Deriv>
Var unary(Var x, OpKind kind, Fwd fwd, Deriv deriv) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  const std::size_t xid = x.id;
  return g.emit(kind, {xid}, std::move(out), [xid, deriv](Graph& g, std::size_t self) {
    const auto& dy = g.grad_buffer(self);
    const Tensor& xv = g.value(xid);
    const Tensor& yv = g.value(self);
    auto& dx = g.grad_buffer(xid);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * deriv(xv[i], yv[i]);
  });
}

std::size_t row_width(const Tensor& t) { return t.size() / t.dim(0); }

}  // namespace

Var matmul(Var a, Var b) {
  same_graph(a, b);
  Graph& g = graph_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    throw DimensionError("matmul: incompatible shapes " + shape_string(av.shape()) + " and " +
                         shape_string(bv.shape()));
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  const double* A = av.data().data();
  const double* B = bv.data().data();
  double* C = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* c = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += aip * brow[j];
    }
  }
  const std::size_t ida = a.id, idb = b.id;
  return g.emit(OpKind::MatMul, {ida, idb}, std::move(out), [ida, idb, m, k, n](Graph& g, std::size_t self) {
    const double* dC = g.grad_buffer(self).data();
    const double* A = g.value(ida).data().data();
    const double* B = g.value(idb).data().data();
    if (g.needs_grad(ida)) {
      double* dA = g.grad_buffer(ida).data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B + p * n;
          const double* dc = dC + i * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += dc[j] * brow[j];
          dA[i * k + p] += acc;
        }
    }
    if (g.needs_grad(idb)) {
      double* dB = g.grad_buffer(idb).data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          const double* dc = dC + i * n;
          double* db = dB + p * n;
          for (std::size_t j = 0; j < n; ++j) db[j] += aip * dc[j];
        }
    }
  });
}

namespace {

Var elementwise(Var a, Var b, OpKind kind) {
  same_graph(a, b);
  Graph& g = graph_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape())
    throw DimensionError(std::string(op_name(kind)) + ": shape mismatch " + shape_string(av.shape()) +
                         " vs " + shape_string(bv.shape()));
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) {
    switch (kind) {
      case OpKind::Add: out[i] = av[i] + bv[i]; break;
      case OpKind::Sub: out[i] = av[i] - bv[i]; break;
      default: out[i] = av[i] * bv[i]; break;
    }
  }
  const std::size_t ida = a.id, idb = b.id;
  return g.emit(kind, {ida, idb}, std::move(out), [ida, idb, kind](Graph& g, std::size_t self) {
    const auto& dy = g.grad_buffer(self);
    if (g.needs_grad(ida)) {
      auto& da = g.grad_buffer(ida);
      if (kind == OpKind::Mul) {
        const Tensor& bv = g.value(idb);
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i] * bv[i];
      } else {
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i];
      }
    }
    if (g.needs_grad(idb)) {
      auto& db = g.grad_buffer(idb);
      if (kind == OpKind::Mul) {
        const Tensor& av = g.value(ida);
        for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[i] * av[i];
      } else if (kind == OpKind::Sub) {
        for (std::size_t i = 0; i < db.size(); ++i) db[i] -= dy[i];
      } else {
        for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[i];
      }
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return elementwise(a, b, OpKind::Add); }
Var sub(Var a, Var b) { return elementwise(a, b, OpKind::Sub); }
Var mul(Var a, Var b) { return elementwise(a, b, OpKind::Mul); }

Var scale(Var a, double factor) {
  return unary(
      a, OpKind::Scale, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Var add_bias(Var x, Var bias) {
  same_graph(x, bias);
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  const std::size_t n = bv.size();
  if (bv.rank() != 1 || xv.shape().back() != n)
    throw DimensionError("add_bias: bias " + shape_string(bv.shape()) + " does not match last axis of " +
                         shape_string(xv.shape()));
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] + bv[i % n];
  const std::size_t idx = x.id, idb = bias.id;
  return g.emit(OpKind::AddBias, {idx, idb}, std::move(out), [idx, idb, n](Graph& g, std::size_t self) {
    const auto& dy = g.grad_buffer(self);
    if (g.needs_grad(idx)) {
      auto& dx = g.grad_buffer(idx);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
    }
    if (g.needs_grad(idb)) {
      auto& db = g.grad_buffer(idb);
      for (std::size_t i = 0; i < dy.size(); ++i) db[i % n] += dy[i];
    }
  });
}

Var relu(Var x) {
  return unary(
      x, OpKind::Relu, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var x) {
  return unary(
      x, OpKind::Tanh, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(
      x, OpKind::Sigmoid,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var softmax(Var x, std::size_t axis) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  if (axis >= xv.rank())
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_string(xv.shape()));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xv.dim(i);
  for (std::size_t i = axis + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
  const std::size_t n = xv.dim(axis);
  Tensor out(xv.shape());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= total;
    }
  const std::size_t idx = x.id;
  return g.emit(OpKind::Softmax, {idx}, std::move(out), [idx, outer, inner, n](Graph& g, std::size_t self) {
    const auto& dy = g.grad_buffer(self);
    const Tensor& y = g.value(self);
    auto& dx = g.grad_buffer(idx);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += y[base + j * inner] * dy[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t p = base + j * inner;
          dx[p] += y[p] * (dy[p] - dot);
        }
      }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double epsilon) {
  same_graph(x, gain);
  same_graph(x, bias);
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  const std::size_t n = xv.shape().back();
  if (gain.value().size() != n || bias.value().size() != n)
    throw DimensionError("layer_norm: gain " + shape_string(gain.value().shape()) + " / bias " +
                         shape_string(bias.value().shape()) + " do not match last axis of " +
                         shape_string(xv.shape()));
  const std::size_t rows = xv.size() / n;
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor out(xv.shape());
  std::vector<double> normed(xv.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data().data() + r * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + epsilon);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mean) * inv;
      normed[r * n + j] = h;
      out[r * n + j] = gv[j] * h + bv[j];
    }
  }
  const std::size_t idx = x.id, idg = gain.id, idb = bias.id;
  return g.emit(OpKind::LayerNorm, {idx, idg, idb}, std::move(out),
                [idx, idg, idb, n, rows, normed = std::move(normed), inv_std = std::move(inv_std)](
                    Graph& g, std::size_t self) {
                  const auto& dy = g.grad_buffer(self);
                  const Tensor& gv = g.value(idg);
                  if (g.needs_grad(idg)) {
                    auto& dg = g.grad_buffer(idg);
                    for (std::size_t i = 0; i < dy.size(); ++i) dg[i % n] += dy[i] * normed[i];
                  }
                  if (g.needs_grad(idb)) {
                    auto& db = g.grad_buffer(idb);
                    for (std::size_t i = 0; i < dy.size(); ++i) db[i % n] += dy[i];
                  }
                  if (g.needs_grad(idx)) {
                    auto& dx = g.grad_buffer(idx);
                    const double inv_n = 1.0 / static_cast<double>(n);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double sum_d = 0.0, sum_dh = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        const double d = dy[r * n + j] * gv[j];
                        sum_d += d;
                        sum_dh += d * normed[r * n + j];
                      }
                      for (std::size_t j = 0; j < n; ++j) {
                        const double d = dy[r * n + j] * gv[j];
                        dx[r * n + j] += inv_std[r] * (d - inv_n * sum_d - normed[r * n + j] * inv_n * sum_dh);
                      }
                    }
                  }
                });
}

namespace {

Var conv1d_impl(Var input, Var kernels, const Var* bias, Conv1dOptions opt) {
  same_graph(input, kernels);
  Graph& g = graph_of(input);
  const Tensor& xv = input.value();
  const Tensor& wv = kernels.value();
  require_rank(xv, 3, "conv1d input");
  require_rank(wv, 3, "conv1d kernels");
  const std::size_t batch = xv.dim(0), len = xv.dim(1), cin = xv.dim(2);
  const std::size_t cout = wv.dim(0), width = wv.dim(2);
  if (wv.dim(1) != cin)
    throw DimensionError("conv1d: kernels " + shape_string(wv.shape()) + " do not match input " +
                         shape_string(xv.shape()));
  if (opt.stride == 0) throw ValidationError("conv1d: stride must be positive");
  if (len + 2 * opt.padding < width)
    throw DimensionError("conv1d: kernel width " + std::to_string(width) + " larger than padded input " +
                         std::to_string(len + 2 * opt.padding));
  if (bias && bias->value().size() != cout)
    throw DimensionError("conv1d: bias " + shape_string(bias->value().shape()) + " does not match " +
                         std::to_string(cout) + " output channels");
  const std::size_t out_len = (len + 2 * opt.padding - width) / opt.stride + 1;

  // wt[k][ci][co] keeps the inner loop contiguous over output channels.
  std::vector<double> wt(width * cin * cout);
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t k = 0; k < width; ++k) wt[(k * cin + ci) * cout + co] = wv[(co * cin + ci) * width + k];

  Tensor out({batch, out_len, cout});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_len; ++o) {
      double* orow = out.data().data() + (b * out_len + o) * cout;
      if (bias)
        for (std::size_t co = 0; co < cout; ++co) orow[co] = bias->value()[co];
      for (std::size_t k = 0; k < width; ++k) {
        const long pos = static_cast<long>(o * opt.stride + k) - static_cast<long>(opt.padding);
        if (pos < 0 || pos >= static_cast<long>(len)) continue;
        const double* xrow = xv.data().data() + (b * len + static_cast<std::size_t>(pos)) * cin;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double xval = xrow[ci];
          const double* w = wt.data() + (k * cin + ci) * cout;
          for (std::size_t co = 0; co < cout; ++co) orow[co] += xval * w[co];
        }
      }
    }

  std::vector<std::size_t> ids{input.id, kernels.id};
  if (bias) ids.push_back(bias->id);
  const std::size_t idx = input.id, idw = kernels.id, idb = bias ? bias->id : 0;
  const bool has_bias = bias != nullptr;
  return g.emit(OpKind::Conv1d, std::move(ids), std::move(out),
                [=](Graph& g, std::size_t self) {
                  const auto& dy = g.grad_buffer(self);
                  const Tensor& xv = g.value(idx);
                  const Tensor& wv = g.value(idw);
                  const bool need_x = g.needs_grad(idx), need_w = g.needs_grad(idw);
                  double* dx = need_x ? g.grad_buffer(idx).data() : nullptr;
                  double* dw = need_w ? g.grad_buffer(idw).data() : nullptr;
                  for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t o = 0; o < out_len; ++o) {
                      const double* drow = dy.data() + (b * out_len + o) * cout;
                      for (std::size_t k = 0; k < width; ++k) {
                        const long pos = static_cast<long>(o * opt.stride + k) - static_cast<long>(opt.padding);
                        if (pos < 0 || pos >= static_cast<long>(len)) continue;
                        const std::size_t xoff = (b * len + static_cast<std::size_t>(pos)) * cin;
                        for (std::size_t co = 0; co < cout; ++co) {
                          const double d = drow[co];
                          if (d == 0.0) continue;
                          for (std::size_t ci = 0; ci < cin; ++ci) {
                            const std::size_t woff = (co * cin + ci) * width + k;
                            if (need_x) dx[xoff + ci] += d * wv[woff];
                            if (need_w) dw[woff] += d * xv[xoff + ci];
                          }
                        }
                      }
                    }
                  if (has_bias && g.needs_grad(idb)) {
                    auto& db = g.grad_buffer(idb);
                    for (std::size_t i = 0; i < dy.size(); ++i) db[i % cout] += dy[i];
                  }
                });
}

Var conv2d_impl(Var input, Var kernels, const Var* bias, Conv2dOptions opt) {
  same_graph(input, kernels);
  Graph& g = graph_of(input);
  const Tensor& xv = input.value();
  const Tensor& wv = kernels.value();
  require_rank(xv, 4, "conv2d input");
  require_rank(wv, 4, "conv2d kernels");
  const std::size_t batch = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const std::size_t cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  if (wv.dim(1) != cin)
    throw DimensionError("conv2d: kernels " + shape_string(wv.shape()) + " do not match input " +
                         shape_string(xv.shape()));
  if (opt.stride_h == 0 || opt.stride_w == 0) throw ValidationError("conv2d: stride must be positive");
  if (h + 2 * opt.pad_h < kh || w + 2 * opt.pad_w < kw)
    throw DimensionError("conv2d: kernel " + shape_string({kh, kw}) + " larger than padded input " +
                         shape_string({h + 2 * opt.pad_h, w + 2 * opt.pad_w}));
  if (bias && bias->value().size() != cout)
    throw DimensionError("conv2d: bias " + shape_string(bias->value().shape()) + " does not match " +
                         std::to_string(cout) + " output channels");
  const std::size_t oh = (h + 2 * opt.pad_h - kh) / opt.stride_h + 1;
  const std::size_t ow = (w + 2 * opt.pad_w - kw) / opt.stride_w + 1;

  Tensor out({batch, cout, oh, ow});
  const double* X = xv.data().data();
  const double* W = wv.data().data();
  double* Y = out.data().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t co = 0; co < cout; ++co) {
      double* yplane = Y + (b * cout + co) * oh * ow;
      if (bias) std::fill(yplane, yplane + oh * ow, bias->value()[co]);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* xplane = X + (b * cin + ci) * h * w;
        for (std::size_t i = 0; i < kh; ++i)
          for (std::size_t j = 0; j < kw; ++j) {
            const double wval = W[((co * cin + ci) * kh + i) * kw + j];
            for (std::size_t y = 0; y < oh; ++y) {
              const long iy = static_cast<long>(y * opt.stride_h + i) - static_cast<long>(opt.pad_h);
              if (iy < 0 || iy >= static_cast<long>(h)) continue;
              const double* xrow = xplane + static_cast<std::size_t>(iy) * w;
              double* yrow = yplane + y * ow;
              for (std::size_t x = 0; x < ow; ++x) {
                const long ix = static_cast<long>(x * opt.stride_w + j) - static_cast<long>(opt.pad_w);
                if (ix < 0 || ix >= static_cast<long>(w)) continue;
                yrow[x] += wval * xrow[ix];
              }
            }
          }
      }
    }

  std::vector<std::size_t> ids{input.id, kernels.id};
  if (bias) ids.push_back(bias->id);
  const std::size_t idx = input.id, idw = kernels.id, idb = bias ? bias->id : 0;
  const bool has_bias = bias != nullptr;
  return g.emit(OpKind::Conv2d, std::move(ids), std::move(out), [=](Graph& g, std::size_t self) {
    const double* dY = g.grad_buffer(self).data();
    const double* X = g.value(idx).data().data();
    const double* W = g.value(idw).data().data();
    const bool need_x = g.needs_grad(idx), need_w = g.needs_grad(idw);
    double* dX = need_x ? g.grad_buffer(idx).data() : nullptr;
    double* dW = need_w ? g.grad_buffer(idw).data() : nullptr;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t co = 0; co < cout; ++co) {
        const double* dplane = dY + (b * cout + co) * oh * ow;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const std::size_t xbase = (b * cin + ci) * h * w;
          for (std::size_t i = 0; i < kh; ++i)
            for (std::size_t j = 0; j < kw; ++j) {
              const std::size_t woff = ((co * cin + ci) * kh + i) * kw + j;
              const double wval = W[woff];
              double acc = 0.0;
              for (std::size_t y = 0; y < oh; ++y) {
                const long iy = static_cast<long>(y * opt.stride_h + i) - static_cast<long>(opt.pad_h);
                if (iy < 0 || iy >= static_cast<long>(h)) continue;
                const std::size_t xrow = xbase + static_cast<std::size_t>(iy) * w;
                const double* drow = dplane + y * ow;
                for (std::size_t x = 0; x < ow; ++x) {
                  const long ix = static_cast<long>(x * opt.stride_w + j) - static_cast<long>(opt.pad_w);
                  if (ix < 0 || ix >= static_cast<long>(w)) continue;
                  acc += drow[x] * X[xrow + static_cast<std::size_t>(ix)];
                  if (need_x) dX[xrow + static_cast<std::size_t>(ix)] += drow[x] * wval;
                }
              }
              if (need_w) dW[woff] += acc;
            }
        }
      }
    if (has_bias && g.needs_grad(idb)) {
      auto& db = g.grad_buffer(idb);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t co = 0; co < cout; ++co) {
          const double* dplane = dY + (b * cout + co) * oh * ow;
          double acc = 0.0;
          for (std::size_t p = 0; p < oh * ow; ++p) acc += dplane[p];
          db[co] += acc;
        }
    }
  });
}

}  // namespace

Var conv1d(Var input, Var kernels, Var bias, Conv1dOptions options) {
  same_graph(input, bias);
  return conv1d_impl(input, kernels, &bias, options);
}
Var conv1d(Var input, Var kernels, Conv1dOptions options) {
  return conv1d_impl(input, kernels, nullptr, options);
}
Var conv2d(Var input, Var kernels, Var bias, Conv2dOptions options) {
  same_graph(input, bias);
  return conv2d_impl(input, kernels, &bias, options);
}
Var conv2d(Var input, Var kernels, Conv2dOptions options) {
  return conv2d_impl(input, kernels, nullptr, options);
}

Var max_pool2d(Var input, std::size_t pool_h, std::size_t pool_w) {
  Graph& g = graph_of(input);
  const Tensor& xv = input.value();
  require_rank(xv, 4, "max_pool2d");
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  if (pool_h == 0 || pool_w == 0 || pool_h > h || pool_w > w)
    throw DimensionError("max_pool2d: pool " + shape_string({pool_h, pool_w}) + " invalid for input " +
                         shape_string(xv.shape()));
  const std::size_t oh = h / pool_h, ow = w / pool_w;
  Tensor out({batch, ch, oh, ow});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t bc = 0; bc < batch * ch; ++bc)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = bc * h * w + (y * pool_h) * w + x * pool_w;
        for (std::size_t i = 0; i < pool_h; ++i)
          for (std::size_t j = 0; j < pool_w; ++j) {
            const std::size_t p = bc * h * w + (y * pool_h + i) * w + x * pool_w + j;
            if (xv[p] > xv[best]) best = p;
          }
        const std::size_t o = (bc * oh + y) * ow + x;
        out[o] = xv[best];
        argmax[o] = best;
      }
  const std::size_t idx = input.id;
  return g.emit(OpKind::MaxPool2d, {idx}, std::move(out), [idx, argmax = std::move(argmax)](Graph& g, std::size_t self) {
    const auto& dy = g.grad_buffer(self);
    auto& dx = g.grad_buffer(idx);
    for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax[o]] += dy[o];
  });
}

Var embedding(Var table, std::span<const std::int64_t> ids) {
  Graph& g = graph_of(table);
  const Tensor& tv = table.value();
  require_rank(tv, 2, "embedding table");
  const std::size_t vocab = tv.dim(0), d = tv.dim(1);
  if (ids.empty()) throw DimensionError("embedding: empty id list");
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab)
      throw DimensionError("embedding: id " + std::to_string(ids[i]) + " outside table of " +
                           std::to_string(vocab) + " rows");
    rows[i] = static_cast<std::size_t>(ids[i]);
  }
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(tv.data().data() + rows[i] * d, d, out.data().data() + i * d);
  const std::size_t idt = table.id;
  return g.emit(OpKind::Embedding, {idt}, std::move(out), [idt, d, rows = std::move(rows)](Graph& g, std::size_t self) {
    const auto& dy = g.grad_buffer(self);
    auto& dt = g.grad_buffer(idt);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) dt[rows[i] * d + j] += dy[i * d + j];
  });
}

Var select_rows(Var x, std::span<const std::size_t> rows) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  const std::size_t n = xv.dim(0), width = row_width(xv);
  if (rows.empty()) throw DimensionError("select_rows: empty row list");
  for (auto r : rows)
    if (r >= n)
      throw DimensionError("select_rows: row " + std::to_string(r) + " outside " + shape_string(xv.shape()));
  Shape shape = xv.shape();
  shape[0] = rows.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(xv.data().data() + rows[i] * width, width, out.data().data() + i * width);
  const std::size_t idx = x.id;
  std::vector<std::size_t> picked(rows.begin(), rows.end());
  return g.emit(OpKind::SelectRows, {idx}, std::move(out), [idx, width, picked = std::move(picked)](Graph& g, std::size_t self) {
    const auto& dy = g.grad_buffer(self);
    auto& dx = g.grad_buffer(idx);
    for (std::size_t i = 0; i < picked.size(); ++i)
      for (std::size_t j = 0; j < width; ++j) dx[picked[i] * width + j] += dy[i * width + j];
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  Graph& g = graph_of(parts[0]);
  const std::size_t rows = parts[0].value().dim(0);
  std::vector<std::size_t> widths, ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    same_graph(parts[0], p);
    const Tensor& v = p.value();
    if (v.rank() != 2 || v.dim(0) != rows)
      throw DimensionError("concat_cols: part " + shape_string(v.shape()) + " does not have " +
                           std::to_string(rows) + " rows");
    widths.push_back(v.dim(1));
    ids.push_back(p.id);
    total += v.dim(1);
  }
  Tensor out({rows, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.data().data() + r * widths[k], widths[k], out.data().data() + r * total + offset);
    offset += widths[k];
  }
  std::vector<std::size_t> in_ids = ids;
  return g.emit(OpKind::ConcatCols, std::move(in_ids), std::move(out),
                [ids = std::move(ids), widths = std::move(widths), rows, total](Graph& g, std::size_t self) {
                  const auto& dy = g.grad_buffer(self);
                  std::size_t offset = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    if (g.needs_grad(ids[k])) {
                      auto& dx = g.grad_buffer(ids[k]);
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < widths[k]; ++j)
                          dx[r * widths[k] + j] += dy[r * total + offset + j];
                    }
                    offset += widths[k];
                  }
                });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  require_rank(xv, 2, "slice_cols");
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  if (begin >= end || end > cols)
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for " + shape_string(xv.shape()));
  const std::size_t width = end - begin;
  Tensor out({rows, width});
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(xv.data().data() + r * cols + begin, width, out.data().data() + r * width);
  const std::size_t idx = x.id;
  return g.emit(OpKind::SliceCols, {idx}, std::move(out), [=](Graph& g, std::size_t self) {
    const auto& dy = g.grad_buffer(self);
    auto& dx = g.grad_buffer(idx);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < width; ++j) dx[r * cols + begin + j] += dy[r * width + j];
  });
}

Var reshape(Var x, Shape shape) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  if (shape_product(shape) != xv.size())
    throw DimensionError("reshape: cannot view " + shape_string(xv.shape()) + " as " + shape_string(shape));
  Tensor out(std::move(shape), std::vector<double>(xv.data().begin(), xv.data().end()));
  const std::size_t idx = x.id;
  return g.emit(OpKind::Reshape, {idx}, std::move(out), [idx](Graph& g, std::size_t self) {
    const auto& dy = g.grad_buffer(self);
    auto& dx = g.grad_buffer(idx);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
  });
}

Var sum(Var x) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  double total = 0.0;
  for (double v : xv.data()) total += v;
  const std::size_t idx = x.id;
  return g.emit(OpKind::Sum, {idx}, Tensor::scalar(total), [idx](Graph& g, std::size_t self) {
    const double d = g.grad_buffer(self)[0];
    auto& dx = g.grad_buffer(idx);
    for (auto& v : dx) v += d;
  });
}

Var cross_entropy(Var logits, std::span<const std::size_t> targets) {
  Graph& g = graph_of(logits);
  const Tensor& lv = logits.value();
  require_rank(lv, 2, "cross_entropy logits");
  const std::size_t batch = lv.dim(0), classes = lv.dim(1);
  if (targets.size() != batch)
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(batch) + " rows");
  std::vector<double> probs(lv.size());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (targets[b] >= classes)
      throw ValidationError("cross_entropy: target " + std::to_string(targets[b]) + " out of range [0," +
                            std::to_string(classes) + ")");
    const double* row = lv.data().data() + b * classes;
    const double mx = *std::max_element(row, row + classes);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs[b * classes + c] = std::exp(row[c] - mx);
      total += probs[b * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) probs[b * classes + c] /= total;
    loss += (mx + std::log(total)) - row[targets[b]];
  }
  loss /= static_cast<double>(batch);
  const std::size_t idl = logits.id;
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return g.emit(OpKind::CrossEntropy, {idl}, Tensor::scalar(loss),
                [idl, batch, classes, probs = std::move(probs), tg = std::move(tg)](Graph& g, std::size_t self) {
                  const double d = g.grad_buffer(self)[0] / static_cast<double>(batch);
                  auto& dl = g.grad_buffer(idl);
                  for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t c = 0; c < classes; ++c) {
                      const double onehot = c == tg[b] ? 1.0 : 0.0;
                      dl[b * classes + c] += d * (probs[b * classes + c] - onehot);
                    }
                });
}

Var attention(Var queries, Var keys, Var values, std::span<const std::uint8_t> key_mask, AttentionShape s) {
  same_graph(queries, keys);
  same_graph(queries, values);
  Graph& g = graph_of(queries);
  const Tensor& qv = queries.value();
  const Tensor& kv = keys.value();
  const Tensor& vv = values.value();
  require_rank(qv, 2, "attention queries");
  require_rank(kv, 2, "attention keys");
  require_rank(vv, 2, "attention values");
  const std::size_t d = qv.dim(1);
  if (s.heads == 0 || d % s.heads != 0)
    throw DimensionError("attention: model width " + std::to_string(d) + " not divisible by " +
                         std::to_string(s.heads) + " heads");
  if (qv.dim(0) != s.batch * s.query_len || kv.dim(0) != s.batch * s.key_len || vv.shape() != kv.shape() ||
      kv.dim(1) != d)
    throw DimensionError("attention: shapes q" + shape_string(qv.shape()) + " k" + shape_string(kv.shape()) +
                         " v" + shape_string(vv.shape()) + " inconsistent with batch " +
                         std::to_string(s.batch));
  if (key_mask.size() != s.batch * s.key_len)
    throw DimensionError("attention: key mask has " + std::to_string(key_mask.size()) + " entries, expected " +
                         std::to_string(s.batch * s.key_len));
  const std::size_t dh = d / s.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> probs(s.batch * s.heads * s.query_len * s.key_len, 0.0);
  std::vector<std::uint8_t> mask(key_mask.begin(), key_mask.end());
  Tensor out({s.batch * s.query_len, d});
  const double* Q = qv.data().data();
  const double* K = kv.data().data();
  const double* V = vv.data().data();
  for (std::size_t b = 0; b < s.batch; ++b)
    for (std::size_t h = 0; h < s.heads; ++h)
      for (std::size_t i = 0; i < s.query_len; ++i) {
        double* p = probs.data() + ((b * s.heads + h) * s.query_len + i) * s.key_len;
        const double* q = Q + (b * s.query_len + i) * d + h * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < s.key_len; ++j) {
          if (!mask[b * s.key_len + j]) continue;
          const double* k = K + (b * s.key_len + j) * d + h * dh;
          double dot = 0.0;
          for (std::size_t c = 0; c < dh; ++c) dot += q[c] * k[c];
          p[j] = dot * inv_sqrt;
          mx = std::max(mx, p[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < s.key_len; ++j) {
          if (!mask[b * s.key_len + j]) continue;
          p[j] = std::exp(p[j] - mx);
          total += p[j];
        }
        double* o = out.data().data() + (b * s.query_len + i) * d + h * dh;
        for (std::size_t j = 0; j < s.key_len; ++j) {
          if (!mask[b * s.key_len + j]) continue;
          p[j] /= total;
          const double* v = V + (b * s.key_len + j) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) o[c] += p[j] * v[c];
        }
      }
  const std::size_t idq = queries.id, idk = keys.id, idv = values.id;
  return g.emit(OpKind::Attention, {idq, idk, idv}, std::move(out),
                [=, probs = std::move(probs), mask = std::move(mask)](Graph& g, std::size_t self) {
                  const double* dO = g.grad_buffer(self).data();
                  const double* Q = g.value(idq).data().data();
                  const double* K = g.value(idk).data().data();
                  const double* V = g.value(idv).data().data();
                  double* dQ = g.needs_grad(idq) ? g.grad_buffer(idq).data() : nullptr;
                  double* dK = g.needs_grad(idk) ? g.grad_buffer(idk).data() : nullptr;
                  double* dV = g.needs_grad(idv) ? g.grad_buffer(idv).data() : nullptr;
                  std::vector<double> dscore(s.key_len);
                  for (std::size_t b = 0; b < s.batch; ++b)
                    for (std::size_t h = 0; h < s.heads; ++h)
                      for (std::size_t i = 0; i < s.query_len; ++i) {
                        const double* p = probs.data() + ((b * s.heads + h) * s.query_len + i) * s.key_len;
                        const double* dout = dO + (b * s.query_len + i) * d + h * dh;
                        double weighted = 0.0;
                        for (std::size_t j = 0; j < s.key_len; ++j) {
                          dscore[j] = 0.0;
                          if (!mask[b * s.key_len + j]) continue;
                          const double* v = V + (b * s.key_len + j) * d + h * dh;
                          double dp = 0.0;
                          for (std::size_t c = 0; c < dh; ++c) dp += dout[c] * v[c];
                          dscore[j] = dp;
                          weighted += p[j] * dp;
                          if (dV) {
                            double* dv = dV + (b * s.key_len + j) * d + h * dh;
                            for (std::size_t c = 0; c < dh; ++c) dv[c] += p[j] * dout[c];
                          }
                        }
                        const double* q = Q + (b * s.query_len + i) * d + h * dh;
                        double* dq = dQ ? dQ + (b * s.query_len + i) * d + h * dh : nullptr;
                        for (std::size_t j = 0; j < s.key_len; ++j) {
                          if (!mask[b * s.key_len + j]) continue;
                          const double ds = p[j] * (dscore[j] - weighted) * inv_sqrt;
                          const double* k = K + (b * s.key_len + j) * d + h * dh;
                          if (dq)
                            for (std::size_t c = 0; c < dh; ++c) dq[c] += ds * k[c];
                          if (dK) {
                            double* dk = dK + (b * s.key_len + j) * d + h * dh;
                            for (std::size_t c = 0; c < dh; ++c) dk[c] += ds * q[c];
                          }
                        }
                      }
                });
}

// ---------------------------------------------------------------------------
// Optimizers

void adam_step(std::span<Tensor* const> params, AdamState& state, const AdamOptions& opt) {
  if (state.first_moment.empty()) {
    for (Tensor* p : params) {
      state.first_moment.emplace_back(p->size(), 0.0);
      state.second_moment.emplace_back(p->size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size())
    throw DimensionError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                         " tensors, got " + std::to_string(params.size()));
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(opt.beta1, t);
  const double correct2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    if (m.size() != p.size() || !p.requires_grad())
      throw DimensionError("adam_step: state/gradient for tensor " + std::to_string(k) + " does not match " +
                           shape_string(p.shape()));
    auto grad = p.grad();
    auto data = p.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = grad[i];
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * gi;
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * gi * gi;
      const double mhat = m[i] / correct1;
      const double vhat = v[i] / correct2;
      data[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.epsilon);
    }
  }
}

void sgd_step(std::span<Tensor* const> params, double lr) {
  for (Tensor* p : params) {
    auto grad = p->grad();
    auto data = p->data();
    for (std::size_t i = 0; i < grad.size(); ++i) data[i] -= lr * grad[i];
  }
}

}  // namespace punct
