#pragma once

// Reverse-mode gradient tape over a closed set of matrix operations.
//
// Nodes are appended in evaluation order, so a node's parents always have
// smaller ids and reverse id order is a valid reverse topological order.
// A tape is single-writer: one training step owns one tape.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "hydg/matrix.hpp"

namespace hydg {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while its
// tape is alive.
class Var {
 public:
  Var() = default;

  const DenseMatrix& value() const;
  const DenseMatrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Receives the gradient flowing into the node's output and pushes it to
  // the parents through Tape::grad_slot.
  using Backward = std::function<void(Tape& tape, const DenseMatrix& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Gradient-bearing leaf.
  Var variable(DenseMatrix value);
  Var constant(DenseMatrix value);
  // Records an op whose output depends on `parents`. Used by the built-in
  // ops and available for custom ops.
  Var record(DenseMatrix value, std::span<const Var> parents, Backward backward);

  const DenseMatrix& value(Var v) const;
  const DenseMatrix& grad(Var v) const;
  bool requires_grad(Var v) const;
  // Gradient accumulator for `v`, or nullptr when no gradient flows to it.
  DenseMatrix* grad_slot(Var v);

  // Populates gradients of every tracked value w.r.t. the 1x1 `loss`.
  // Throws ContractError if `loss` is not a scalar on this tape.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  // Number of backward closures executed by the last backward() call.
  std::size_t backward_visits() const noexcept { return visits_; }

 private:
  struct Node {
    DenseMatrix value;
    DenseMatrix grad;
    Backward backward;
    bool requires_grad = false;
    bool has_grad = false;
  };

  void check_owned(Var v) const;

  std::vector<Node> nodes_;
  std::size_t visits_ = 0;
};

// Differentiable ops. All operands must live on the same tape.
namespace ag {

Var matmul(Var a, Var b);
// Sparse structure is constant data; only the dense operand is differentiated.
Var spmm(std::shared_ptr<const SparseMatrix> s, Var d);
Var spmm(const SparseMatrix& s, Var d);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double factor);
Var hadamard(Var a, Var b);
Var relu(Var a);
Var transpose(Var a);
Var softmax_rows(Var a);
Var row_gather(Var a, std::vector<std::size_t> rows);
Var concat_rows(std::span<const Var> parts);
// Multiplies row i by factors[i].
Var row_scale(Var a, std::vector<double> factors);
// Adds the 1 x cols `bias` to every row of `a`.
Var add_row_bias(Var a, Var bias);
Var sum(Var a);
Var mean(Var a);
// Mean cross-entropy of row-wise softmax(logits) against integer labels.
// Rows with a negative label are ignored. Throws ContractError when no row
// is labelled.
Var cross_entropy(Var logits, std::span<const int> labels);
// out(r, c) = a(source(r, c), c): routes each output element to one input
// element of the same column (used for max/min pooling with fixed argmax).
Var pick_by_column(Var a, std::size_t out_rows, std::vector<std::size_t> source);

}  // namespace ag

}  // namespace hydg
