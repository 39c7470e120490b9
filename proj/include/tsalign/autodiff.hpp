#pragma once

// Minimal tape-based reverse-mode differentiation over dense matrices.
//
// Every forward pass records its operations on a Tape. Leaves are either
// constants (no gradient requested) or Parameters (gradient accumulated into
// Parameter::grad on backward). Gradients still propagate *through*
// constants-derived operations into upstream parameters, which is how the
// frozen backbone is trained around without being updated.

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "tsalign/tensor.hpp"

namespace tsalign::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool needs_grad() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// References an external matrix that must outlive the tape.
  Var constant_ref(const Matrix& value);
  Var parameter(const Parameter& p);

  /// Records an op result. `fn` receives d(loss)/d(output) and must call
  /// accumulate() for each input that needs a gradient.
  Var push(Matrix value, bool needs_grad, BackwardFn fn);

  /// Runs the reverse sweep from a 1x1 node, then adds leaf gradients into
  /// their Parameters.
  void backward(Var loss, double seed = 1.0);

  void accumulate(Var v, const Matrix& g);

  const Matrix& value(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id]->needs_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool needs_grad = false;
    const Parameter* param = nullptr;
    BackwardFn backward;
  };
  std::vector<std::unique_ptr<Node>> nodes_;
};

// Linear algebra.
Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// a (R x C) + b (1 x C) broadcast over rows.
Var add_row(Var a, Var b);
Var scale(Var a, double s);
/// a * s + c with scalar constants.
Var affine(Var a, double s, double c);

// Nonlinearities and normalization.
Var gelu(Var a);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

/// Multi-head scaled dot-product attention. q is [Sq x D], k and v are
/// [Sk x D]; D is split into `heads` contiguous column blocks. When
/// `probs_out` is non-null it receives one [Sq x Sk] probability matrix per
/// head.
Var attention(Var q, Var k, Var v, int heads, bool causal,
              std::vector<Matrix>* probs_out = nullptr);

// Shape manipulation.
Var slice_rows(Var a, Eigen::Index first, Eigen::Index count);
Var concat_rows(const std::vector<Var>& parts);
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);

/// Mean squared error against a constant target, as a 1x1 node.
Var mse(Var pred, const Matrix& target);

}  // namespace tsalign::ad
