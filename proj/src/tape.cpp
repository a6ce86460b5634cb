#include "hydg/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hydg/error.hpp"
#include "hydg/kernels.hpp"

namespace hydg {

const DenseMatrix& Var::value() const { return tape_->value(*this); }
const DenseMatrix& Var::grad() const { return tape_->grad(*this); }

Var Tape::variable(DenseMatrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(DenseMatrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(DenseMatrix value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  for (const Var& p : parents) {
    check_owned(p);
    needs = needs || nodes_[p.id_].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs,
                        false});
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw ContractError("Var does not belong to this tape");
  }
}

const DenseMatrix& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id_].value;
}

const DenseMatrix& Tape::grad(Var v) const {
  check_owned(v);
  const Node& n = nodes_[v.id_];
  if (!n.has_grad) throw ContractError("gradient not populated; call backward() first");
  return n.grad;
}

bool Tape::requires_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id_].requires_grad;
}

DenseMatrix* Tape::grad_slot(Var v) {
  check_owned(v);
  Node& n = nodes_[v.id_];
  return n.has_grad ? &n.grad : nullptr;
}

void Tape::backward(Var loss) {
  check_owned(loss);
  const DenseMatrix& lv = nodes_[loss.id_].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("backward: loss must be 1x1, got " + std::to_string(lv.rows()) + "x" +
                        std::to_string(lv.cols()));
  }
  for (std::size_t i = 0; i <= loss.id_; ++i) {
    Node& n = nodes_[i];
    n.has_grad = n.requires_grad;
    if (n.has_grad) {
      n.grad = DenseMatrix(n.value.rows(), n.value.cols());
    } else {
      n.grad = DenseMatrix();
    }
  }
  visits_ = 0;
  if (!nodes_[loss.id_].requires_grad) return;
  nodes_[loss.id_].grad(0, 0) = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward) {
      n.backward(*this, n.grad);
      ++visits_;
    }
  }
}

namespace ag {
namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("operation on an unbound Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() != b.tape()) throw ContractError("operands live on different tapes");
  return tape_of(a);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  DenseMatrix out = hydg::matmul(a.value(), b.value());
  const Var parents[] = {a, b};
  return t.record(std::move(out), parents, [a, b](Tape& tp, const DenseMatrix& g) {
    if (auto* ga = tp.grad_slot(a)) add_in_place(*ga, matmul_nt(g, tp.value(b)));
    if (auto* gb = tp.grad_slot(b)) add_in_place(*gb, matmul_tn(tp.value(a), g));
  });
}

Var spmm(std::shared_ptr<const SparseMatrix> s, Var d) {
  Tape& t = tape_of(d);
  DenseMatrix out = hydg::spmm(*s, d.value());
  const Var parents[] = {d};
  return t.record(std::move(out), parents, [s = std::move(s), d](Tape& tp, const DenseMatrix& g) {
    if (auto* gd = tp.grad_slot(d)) add_in_place(*gd, spmm_tn(*s, g));
  });
}

Var spmm(const SparseMatrix& s, Var d) { return spmm(std::make_shared<const SparseMatrix>(s), d); }

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Var parents[] = {a, b};
  return t.record(hydg::add(a.value(), b.value()), parents,
                  [a, b](Tape& tp, const DenseMatrix& g) {
                    if (auto* ga = tp.grad_slot(a)) add_in_place(*ga, g);
                    if (auto* gb = tp.grad_slot(b)) add_in_place(*gb, g);
                  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Var parents[] = {a, b};
  return t.record(hydg::sub(a.value(), b.value()), parents,
                  [a, b](Tape& tp, const DenseMatrix& g) {
                    if (auto* ga = tp.grad_slot(a)) add_in_place(*ga, g);
                    if (auto* gb = tp.grad_slot(b)) add_in_place(*gb, hydg::scale(g, -1.0));
                  });
}

Var scale(Var a, double factor) {
  Tape& t = tape_of(a);
  const Var parents[] = {a};
  return t.record(hydg::scale(a.value(), factor), parents,
                  [a, factor](Tape& tp, const DenseMatrix& g) {
                    if (auto* ga = tp.grad_slot(a)) add_in_place(*ga, hydg::scale(g, factor));
                  });
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Var parents[] = {a, b};
  return t.record(hydg::hadamard(a.value(), b.value()), parents,
                  [a, b](Tape& tp, const DenseMatrix& g) {
                    if (auto* ga = tp.grad_slot(a)) add_in_place(*ga, hydg::hadamard(g, tp.value(b)));
                    if (auto* gb = tp.grad_slot(b)) add_in_place(*gb, hydg::hadamard(g, tp.value(a)));
                  });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  const Var parents[] = {a};
  return t.record(hydg::relu(a.value()), parents, [a](Tape& tp, const DenseMatrix& g) {
    auto* ga = tp.grad_slot(a);
    if (ga == nullptr) return;
    const auto x = tp.value(a).data();
    const auto gi = g.data();
    auto go = ga->data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > 0.0) go[i] += gi[i];
    }
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const Var parents[] = {a};
  return t.record(hydg::transpose(a.value()), parents, [a](Tape& tp, const DenseMatrix& g) {
    if (auto* ga = tp.grad_slot(a)) add_in_place(*ga, hydg::transpose(g));
  });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Var parents[] = {a};
  return t.record(hydg::softmax_rows(a.value()), parents, [a](Tape& tp, const DenseMatrix& g) {
    auto* ga = tp.grad_slot(a);
    if (ga == nullptr) return;
    const DenseMatrix s = hydg::softmax_rows(tp.value(a));
    for (std::size_t i = 0; i < s.rows(); ++i) {
      const double inner = kernels::dot(s.row(i), g.row(i));
      for (std::size_t j = 0; j < s.cols(); ++j) (*ga)(i, j) += s(i, j) * (g(i, j) - inner);
    }
  });
}

Var row_gather(Var a, std::vector<std::size_t> rows) {
  Tape& t = tape_of(a);
  const Var parents[] = {a};
  DenseMatrix out = hydg::row_gather(a.value(), rows);
  return t.record(std::move(out), parents,
                  [a, rows = std::move(rows)](Tape& tp, const DenseMatrix& g) {
                    auto* ga = tp.grad_slot(a);
                    if (ga == nullptr) return;
                    for (std::size_t i = 0; i < rows.size(); ++i) {
                      kernels::axpy(1.0, g.row(i), ga->row(rows[i]));
                    }
                  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  Tape& t = tape_of(parts.front());
  std::vector<DenseMatrix> values;
  values.reserve(parts.size());
  for (const Var& p : parts) values.push_back(tape_of(parts.front(), p).value(p));
  std::vector<Var> owned(parts.begin(), parts.end());
  return t.record(hydg::concat_rows(values), parts,
                  [owned](Tape& tp, const DenseMatrix& g) {
                    std::size_t offset = 0;
                    for (const Var& p : owned) {
                      const std::size_t r = tp.value(p).rows();
                      if (auto* gp = tp.grad_slot(p)) {
                        for (std::size_t i = 0; i < r; ++i) {
                          kernels::axpy(1.0, g.row(offset + i), gp->row(i));
                        }
                      }
                      offset += r;
                    }
                  });
}

Var row_scale(Var a, std::vector<double> factors) {
  Tape& t = tape_of(a);
  if (factors.size() != a.rows()) throw ShapeError("row_scale: factor count != rows");
  DenseMatrix out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (double& v : out.row(i)) v *= factors[i];
  }
  const Var parents[] = {a};
  return t.record(std::move(out), parents,
                  [a, factors = std::move(factors)](Tape& tp, const DenseMatrix& g) {
                    auto* ga = tp.grad_slot(a);
                    if (ga == nullptr) return;
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                      kernels::axpy(factors[i], g.row(i), ga->row(i));
                    }
                  });
}

Var add_row_bias(Var a, Var bias) {
  Tape& t = tape_of(a, bias);
  const DenseMatrix& b = bias.value();
  if (b.rows() != 1 || b.cols() != a.cols()) throw ShapeError("add_row_bias: bias must be 1 x cols");
  DenseMatrix out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i) kernels::axpy(1.0, b.row(0), out.row(i));
  const Var parents[] = {a, bias};
  return t.record(std::move(out), parents, [a, bias](Tape& tp, const DenseMatrix& g) {
    if (auto* ga = tp.grad_slot(a)) add_in_place(*ga, g);
    if (auto* gb = tp.grad_slot(bias)) {
      for (std::size_t i = 0; i < g.rows(); ++i) kernels::axpy(1.0, g.row(i), gb->row(0));
    }
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const Var parents[] = {a};
  return t.record(DenseMatrix(1, 1, total), parents, [a](Tape& tp, const DenseMatrix& g) {
    if (auto* ga = tp.grad_slot(a)) {
      for (double& v : ga->data()) v += g(0, 0);
    }
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ContractError("mean of an empty matrix");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  Tape& t = tape_of(logits);
  const DenseMatrix& z = logits.value();
  if (labels.size() != z.rows()) throw ShapeError("cross_entropy: label count != rows");
  std::vector<int> owned(labels.begin(), labels.end());
  std::size_t counted = 0;
  double total = 0.0;
  const DenseMatrix probs = hydg::softmax_rows(z);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    if (owned[i] < 0) continue;
    if (static_cast<std::size_t>(owned[i]) >= z.cols()) {
      throw ContractError("cross_entropy: label " + std::to_string(owned[i]) + " >= class count");
    }
    const auto row = z.row(i);
    const double peak = *std::max_element(row.begin(), row.end());
    double lse = 0.0;
    for (double v : row) lse += std::exp(v - peak);
    total += (std::log(lse) + peak) - row[static_cast<std::size_t>(owned[i])];
    ++counted;
  }
  if (counted == 0) throw ContractError("cross_entropy: no labelled rows");
  const double inv = 1.0 / static_cast<double>(counted);
  const Var parents[] = {logits};
  return t.record(DenseMatrix(1, 1, total * inv), parents,
                  [logits, owned = std::move(owned), probs, inv](Tape& tp, const DenseMatrix& g) {
                    auto* gl = tp.grad_slot(logits);
                    if (gl == nullptr) return;
                    const double s = g(0, 0) * inv;
                    for (std::size_t i = 0; i < probs.rows(); ++i) {
                      if (owned[i] < 0) continue;
                      for (std::size_t j = 0; j < probs.cols(); ++j) {
                        (*gl)(i, j) += s * probs(i, j);
                      }
                      (*gl)(i, static_cast<std::size_t>(owned[i])) -= s;
                    }
                  });
}

Var pick_by_column(Var a, std::size_t out_rows, std::vector<std::size_t> source) {
  Tape& t = tape_of(a);
  const DenseMatrix& in = a.value();
  const std::size_t cols = in.cols();
  if (source.size() != out_rows * cols) throw ShapeError("pick_by_column: source size mismatch");
  DenseMatrix out(out_rows, cols);
  for (std::size_t r = 0; r < out_rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t src = source[r * cols + c];
      if (src >= in.rows()) throw ShapeError("pick_by_column: source row out of range");
      out(r, c) = in(src, c);
    }
  }
  const Var parents[] = {a};
  return t.record(std::move(out), parents,
                  [a, cols, source = std::move(source)](Tape& tp, const DenseMatrix& g) {
                    auto* ga = tp.grad_slot(a);
                    if (ga == nullptr) return;
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      for (std::size_t c = 0; c < cols; ++c) (*ga)(source[r * cols + c], c) += g(r, c);
                    }
                  });
}

}  // namespace ag
}  // namespace hydg
