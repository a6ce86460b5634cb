#include "hydg/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hydg/error.hpp"
#include "hydg/kernels.hpp"

namespace hydg {
namespace {

std::string dims(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": " + dims(a.rows(), a.cols()) + " vs " +
                     dims(b.rows(), b.cols()));
  }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("DenseMatrix: " + std::to_string(data_.size()) + " values for " +
                     dims(rows, cols));
  }
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("DenseMatrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void DenseMatrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      throw ShapeError("SparseMatrix: entry (" + std::to_string(t.row) + "," +
                       std::to_string(t.col) + ") outside " + dims(rows, cols));
    }
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix s(rows, cols);
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    if (!s.col_index_.empty() && i > 0 && triplets[i - 1].row == t.row &&
        triplets[i - 1].col == t.col) {
      s.values_.back() += t.value;
      continue;
    }
    s.col_index_.push_back(t.col);
    s.values_.push_back(t.value);
    ++s.row_ptr_[t.row + 1];
  }
  std::partial_sum(s.row_ptr_.begin(), s.row_ptr_.end(), s.row_ptr_.begin());
  return s;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<Triplet> t;
  t.reserve(n);
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(t));
}

SparseMatrix SparseMatrix::diagonal(std::span<const double> values) {
  std::vector<Triplet> t;
  t.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) t.push_back({i, i, values[i]});
  return from_triplets(values.size(), values.size(), std::move(t));
}

std::vector<Triplet> SparseMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      out.push_back({r, col_index_[k], values_[k]});
    }
  }
  return out;
}

DenseMatrix SparseMatrix::densify() const {
  DenseMatrix d(rows_, cols_);
  for (const auto& t : triplets()) d(t.row, t.col) = t.value;
  return d;
}

SparseMatrix SparseMatrix::transposed() const {
  auto t = triplets();
  for (auto& e : t) std::swap(e.row, e.col);
  return from_triplets(cols_, rows_, std::move(t));
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + dims(a.rows(), a.cols()) + " x " + dims(b.rows(), b.cols()));
  }
  const auto& k = kernels::active();
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out = c.row(i).data();
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double v = a(i, p);
      if (v != 0.0) k.axpy(v, b.row(p).data(), out, b.cols());
    }
  }
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + dims(a.rows(), a.cols()) + " x " +
                     dims(b.rows(), b.cols()) + "^T");
  }
  const auto& k = kernels::active();
  DenseMatrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      c(i, j) = k.dot(a.row(i).data(), b.row(j).data(), a.cols());
    }
  }
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: " + dims(a.rows(), a.cols()) + "^T x " +
                     dims(b.rows(), b.cols()));
  }
  const auto& k = kernels::active();
  DenseMatrix c(a.cols(), b.cols());
  for (std::size_t p = 0; p < a.rows(); ++p) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double v = a(p, i);
      if (v != 0.0) k.axpy(v, b.row(p).data(), c.row(i).data(), b.cols());
    }
  }
  return c;
}

DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d) {
  if (s.cols() != d.rows()) {
    throw ShapeError("spmm: " + dims(s.rows(), s.cols()) + " x " + dims(d.rows(), d.cols()));
  }
  const auto& k = kernels::active();
  DenseMatrix out(s.rows(), d.cols());
  const auto rp = s.row_ptr();
  const auto ci = s.col_index();
  const auto vals = s.values();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    double* dst = out.row(r).data();
    for (std::size_t e = rp[r]; e < rp[r + 1]; ++e) {
      k.axpy(vals[e], d.row(ci[e]).data(), dst, d.cols());
    }
  }
  return out;
}

DenseMatrix spmm_tn(const SparseMatrix& s, const DenseMatrix& d) {
  if (s.rows() != d.rows()) {
    throw ShapeError("spmm_tn: " + dims(s.rows(), s.cols()) + "^T x " +
                     dims(d.rows(), d.cols()));
  }
  const auto& k = kernels::active();
  DenseMatrix out(s.cols(), d.cols());
  const auto rp = s.row_ptr();
  const auto ci = s.col_index();
  const auto vals = s.values();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const double* src = d.row(r).data();
    for (std::size_t e = rp[r]; e < rp[r + 1]; ++e) {
      k.axpy(vals[e], src, out.row(ci[e]).data(), d.cols());
    }
  }
  return out;
}

DenseMatrix transpose(const DenseMatrix& m) {
  DenseMatrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  }
  return t;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "add");
  DenseMatrix c = a;
  add_in_place(c, b);
  return c;
}

DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "sub");
  DenseMatrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
  return c;
}

DenseMatrix scale(const DenseMatrix& m, double factor) {
  DenseMatrix c = m;
  for (double& v : c.data()) v *= factor;
  return c;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "hadamard");
  DenseMatrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] *= bd[i];
  return c;
}

DenseMatrix relu(const DenseMatrix& m) {
  DenseMatrix c = m;
  for (double& v : c.data()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
  return c;
}

DenseMatrix softmax_rows(const DenseMatrix& m) {
  DenseMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto in = m.row(i);
    auto dst = out.row(i);
    if (in.empty()) continue;
    const double peak = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      dst[j] = std::exp(in[j] - peak);
      total += dst[j];
    }
    for (double& v : dst) v /= total;
  }
  return out;
}

DenseMatrix row_gather(const DenseMatrix& m, std::span<const std::size_t> rows) {
  DenseMatrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows()) {
      throw ShapeError("row_gather: row " + std::to_string(rows[i]) + " of " +
                       std::to_string(m.rows()));
    }
    std::copy_n(m.row(rows[i]).begin(), m.cols(), out.row(i).begin());
  }
  return out;
}

DenseMatrix concat_rows(std::span<const DenseMatrix> parts) {
  if (parts.empty()) return {};
  const std::size_t cols = parts.front().cols();
  std::vector<double> data;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    data.insert(data.end(), p.data().begin(), p.data().end());
    rows += p.rows();
  }
  return DenseMatrix(rows, cols, std::move(data));
}

void add_in_place(DenseMatrix& target, const DenseMatrix& other) {
  require_same_shape(target, other, "add_in_place");
  auto td = target.data();
  auto od = other.data();
  for (std::size_t i = 0; i < td.size(); ++i) td[i] += od[i];
}

double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "max_abs_difference");
  return kernels::max_abs_diff(a.data(), b.data());
}

}  // namespace hydg
