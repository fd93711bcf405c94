#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dio/tensor.hpp"

namespace dio {

class Graph;

/// Handle to a node recorded on a Graph.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  Graph& graph() const;
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Single-use reverse-mode tape.
///
/// Nodes are appended in creation order, which is a topological order, and
/// backward() walks them in exact reverse. Leaves created from tensors with
/// requires_grad() set receive their gradient into Tensor::grad(), summed
/// with whatever is already there. A graph can be differentiated once; any
/// further backward() or new node raises GradError.
class Graph {
 public:
  using BackwardFn =
      std::function<void(std::span<const double> grad_out, Graph& graph)>;

  Graph() = default;
  /// With tracking off, leaves never require gradients, so no backward
  /// closures are recorded. Used for inference-only forwards.
  explicit Graph(bool track_gradients) : tracking_(track_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Records a leaf. The tensor's storage is shared, not copied.
  Var leaf(const Tensor& t);
  /// Records a leaf that never receives a gradient.
  Var constant(Tensor t);
  /// Records a leaf that always receives a gradient, even with tracking
  /// off. With Graph(false) this differentiates w.r.t. t alone, e.g. an
  /// attack's input, leaving model parameters untouched.
  Var variable(const Tensor& t);

  void backward(Var loss);
  bool consumed() const noexcept { return consumed_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  /// Total backward() calls made by any graph in this thread. Used to check
  /// that query-only attacks never differentiate.
  static std::size_t backward_calls() noexcept;

  // Primitive plumbing; ops use these to register themselves.
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::span<double> grad_buffer(std::size_t id);
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Tensor leaf;
    bool needs_grad = false;
  };

  void ensure_open() const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
  bool tracking_ = true;
};

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Elementwise, same shape.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var relu(Var a);
Var abs(Var a);
Var tanh(Var a);
Var sqrt(Var a);
Var clamp(Var a, double lo, double hi);

// Linear algebra.
Var matmul(Var a, Var b);  // (n,k) x (k,m)
Var transpose(Var a);      // 2-D
/// (n,k) + (k) row broadcast, or (n,c,h,w) + (c) channel broadcast.
Var add_bias(Var a, Var bias);
/// x (n,c,h,w), w (o,c,kh,kw) -> (n,o,h',w'). Direct loops.
Var conv2d(Var x, Var w, Conv2dOptions opts = {});
Var reshape(Var a, Shape shape);

// Reductions to a scalar of shape [1].
Var sum(Var a);
Var mean(Var a);
Var l2_norm(Var a);
Var dot(Var a, Var b);
/// Ties resolve to the lowest flat index.
Var max(Var a);
Var min(Var a);

// Axis reductions on 2-D inputs.
Var sum_rows(Var a);  // (n,k) -> (k): column sums
Var row_sum(Var a);   // (n,k) -> (n)
Var row_max(Var a);   // ties -> lowest column
Var row_min(Var a);   // ties -> lowest column

/// Picks a[indices[i]] by flat index; output shape `shape` (default 1-D).
Var gather(Var a, std::vector<std::size_t> indices, Shape shape = {});

/// Batch-mean softmax cross-entropy, logits (n,K), labels in [0,K).
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

}  // namespace dio
