#pragma once

// Reverse-mode differentiation over a recorded tape of dense-matrix ops.
//
// Each op appends a node holding its forward value and a closure that, given
// the node's accumulated gradient, adds the adjoint contributions into its
// inputs. Tape::backward seeds a 1x1 loss with 1 and runs the closures in
// reverse order. Nodes that cannot reach a parameter or grad-requiring leaf
// carry no closure and no gradient buffer.

#include "magna/common.hpp"
#include "magna/graph.hpp"

#include <deque>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace magna {

struct Param;

namespace ad {

class Tape;

// Handle to a tape node. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  // With grad disabled no node records a closure, so params act as constants.
  explicit Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // A leaf whose gradient is kept on the tape (read it with grad()).
  Var leaf(Matrix value, bool requires_grad = true);
  // A leaf bound to a parameter; backward() adds its gradient into param.grad.
  Var param(Param& param);

  // Appends an op node. The finite check runs here, so every op fails at the
  // point where a NaN/Inf first appears.
  Var record(std::string_view op, Matrix value, std::initializer_list<Var> inputs,
             BackwardFn backward);
  Var record(std::string_view op, Matrix value, std::span<const Var> inputs, BackwardFn backward);

  void backward(Var loss);

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  // Gradient accumulator of a node, allocated as zeros on first use.
  Matrix& grad_buffer(int id);
  const Matrix& grad(Var v);

  std::size_t size() const { return nodes_.size(); }
  std::size_t count_ops(std::string_view op) const;
  bool grad_enabled() const { return grad_enabled_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    bool has_grad = false;
    std::string_view op;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
  bool grad_enabled_ = true;
};

using Rng = std::mt19937_64;

// Dense algebra.
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var add_bias(Var a, Var bias);  // bias is 1 x cols, broadcast over rows
Var lincomb(double ca, Var a, double cb, Var b);
Var scale(Var a, double c);
Var hadamard(Var a, Var b);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count);
Var sum(Var a);

// Elementwise nonlinearities.
constexpr double kLeakySlope = 0.2;
Var leaky_relu(Var a, double slope = kLeakySlope);
Var tanh(Var a);
Var relu(Var a);
Var elu(Var a);

// Inverted dropout: kept entries are scaled by 1/(1-p). Identity when !train or p == 0.
Var dropout(Var a, double p, bool train, Rng& rng);

constexpr double kLayerNormEps = 1e-5;
// Row-wise normalization with per-feature affine (gamma, beta are 1 x cols).
Var layer_norm(Var x, Var gamma, Var beta, double eps = kLayerNormEps);

Var gather_rows(Var a, std::span<const std::int32_t> index);
Var scatter_add_rows(Var a, std::span<const std::int32_t> index, Eigen::Index out_rows);

// Softmax over each segment [offsets[s], offsets[s+1]) of a per-edge column.
Var segment_softmax(Var scores, std::span<const std::size_t> offsets);

// out[i] = sum over edges (j -> i) of att[e] * h[j].
Var edge_spmm(Var att, Var h, const Graph& graph);

}  // namespace ad
}  // namespace magna
