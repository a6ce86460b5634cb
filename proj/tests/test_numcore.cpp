#include <cmath>
#include <vector>

#include "doctest.h"
#include "hydg/error.hpp"
#include "hydg/gradcheck.hpp"
#include "hydg/matrix.hpp"
#include "hydg/rng.hpp"
#include "hydg/tape.hpp"

using namespace hydg;

namespace {

// Triple-loop product, independent of the kernel layer.
DenseMatrix naive_product(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      c(i, j) = acc;
    }
  return c;
}

SparseMatrix random_sparse(std::size_t rows, std::size_t cols, double density, Rng& rng) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      if (rng.bernoulli(density)) t.push_back({i, j, rng.normal()});
  return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

}  // namespace

TEST_CASE("matmul examples") {
  const DenseMatrix m = DenseMatrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(matmul(DenseMatrix::identity(2), m) == m);
  CHECK(matmul(DenseMatrix::from_rows({{1, 2}, {3, 4}}), DenseMatrix::from_rows({{1}, {1}})) ==
        DenseMatrix::from_rows({{3}, {7}}));
  CHECK(matmul(DenseMatrix(4, 2), m) == DenseMatrix(4, 3));
  CHECK_THROWS_AS(matmul(m, m), ShapeError);
}

TEST_CASE("transposed products match explicit transposes") {
  Rng rng(5);
  const DenseMatrix a = rng.normal_matrix(4, 7);
  const DenseMatrix b = rng.normal_matrix(5, 7);
  const DenseMatrix c = rng.normal_matrix(4, 3);
  CHECK(max_abs_difference(matmul_nt(a, b), naive_product(a, transpose(b))) < 1e-12);
  CHECK(max_abs_difference(matmul_tn(a, c), naive_product(transpose(a), c)) < 1e-12);
}

TEST_CASE("spmm examples") {
  Rng rng(1);
  const DenseMatrix m = rng.normal_matrix(5, 3);
  CHECK(spmm(SparseMatrix::identity(5), m) == m);
  CHECK(spmm(SparseMatrix(4, 5), m) == DenseMatrix(4, 3));
  CHECK_THROWS_AS(spmm(SparseMatrix(4, 4), m), ShapeError);

  const SparseMatrix s = random_sparse(6, 6, 0.3, rng);
  const DenseMatrix d = rng.normal_matrix(6, 4);
  CHECK(max_abs_difference(spmm(s, d), naive_product(s.densify(), d)) <= 1e-12);
}

TEST_CASE("property: spmm equals the densified product on random instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t r = 1 + rng.index(12), k = 1 + rng.index(12), c = 1 + rng.index(9);
    const SparseMatrix s = random_sparse(r, k, rng.uniform(0.0, 0.6), rng);
    const DenseMatrix d = rng.normal_matrix(k, c);
    REQUIRE(max_abs_difference(spmm(s, d), naive_product(s.densify(), d)) <= 1e-12);
    REQUIRE(max_abs_difference(spmm_tn(s, naive_product(s.densify(), d)),
                               naive_product(transpose(s.densify()), naive_product(s.densify(), d))) <= 1e-10);
  }
}

TEST_CASE("sparse triplets are canonicalised and duplicates summed") {
  const SparseMatrix s = SparseMatrix::from_triplets(
      3, 3, {{2, 1, 1.0}, {0, 2, 2.0}, {0, 0, 3.0}, {2, 1, 4.0}});
  const auto t = s.triplets();
  REQUIRE(t.size() == 3);
  CHECK(t[0].row == 0);
  CHECK(t[0].col == 0);
  CHECK(t[1].col == 2);
  CHECK(t[2].value == 5.0);
  CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), ShapeError);
  CHECK(s.transposed().transposed() == s);
}

TEST_CASE("softmax_rows examples") {
  const DenseMatrix p = softmax_rows(
      DenseMatrix::from_rows({{0, 0}, {std::log(1.0), std::log(3.0)}, {1000, 1000}}));
  CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p(1, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(p(1, 1) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(p(2, 0) == 0.5);
  CHECK(p(2, 1) == 0.5);
}

TEST_CASE("property: softmax rows sum to one and ignore row shifts") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    DenseMatrix m = rng.normal_matrix(1 + rng.index(6), 1 + rng.index(6), 5.0);
    const DenseMatrix p = softmax_rows(m);
    DenseMatrix shifted = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const double c = rng.uniform(-50, 50);
      for (double& v : shifted.row(i)) v += c;
    }
    const DenseMatrix q = softmax_rows(shifted);
    for (std::size_t i = 0; i < p.rows(); ++i) {
      double total = 0.0;
      for (double v : p.row(i)) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::fabs(total - 1.0) <= 1e-12);
    }
    CHECK(max_abs_difference(p, q) <= 1e-12);
  }
}

TEST_CASE("elementwise helpers") {
  CHECK(relu(DenseMatrix::from_rows({{-1, 2}})) == DenseMatrix::from_rows({{0, 2}}));
  CHECK(std::isnan(relu(DenseMatrix::from_rows({{std::nan("")}}))(0, 0)));
  Rng rng(4);
  const DenseMatrix m = rng.normal_matrix(3, 5);
  CHECK(transpose(transpose(m)) == m);
  CHECK(add(m, DenseMatrix(3, 5)) == m);
  CHECK_THROWS_AS(add(m, DenseMatrix(5, 3)), ShapeError);
  const std::size_t rows[] = {2, 0};
  CHECK(row_gather(m, rows).row(0)[1] == m(2, 1));
}

TEST_CASE("Rng: identical seeds reproduce identical streams") {
  Rng a(42), b(42), c(43);
  const DenseMatrix ma = a.normal_matrix(4, 4), mb = b.normal_matrix(4, 4), mc = c.normal_matrix(4, 4);
  CHECK(ma == mb);
  CHECK_FALSE(ma == mc);
  // Named substreams do not depend on draws taken from the parent.
  Rng p(1), q(1);
  (void)q.normal();
  CHECK(p.substream("init").normal_matrix(2, 2) == q.substream("init").normal_matrix(2, 2));
  CHECK_FALSE(p.substream("init").next() == p.substream("sbm").next());
}

TEST_CASE("backward examples") {
  Rng rng(8);
  const DenseMatrix m = rng.normal_matrix(3, 4);
  {
    Tape tape;
    const Var x = tape.variable(m);
    tape.backward(ag::sum(x));
    CHECK(x.grad() == DenseMatrix(3, 4, 1.0));
  }
  {
    Tape tape;
    const Var x = tape.variable(m);
    tape.backward(ag::sum(ag::hadamard(x, x)));
    CHECK(max_abs_difference(x.grad(), scale(m, 2.0)) < 1e-15);
  }
  {
    Tape tape;
    const Var x = tape.variable(m);
    CHECK_THROWS_AS(tape.backward(x), ContractError);
  }
}

TEST_CASE("backward visits each recorded op exactly once") {
  Tape tape;
  const Var x = tape.variable(DenseMatrix::from_rows({{1, -2}, {3, 4}}));
  const Var w = tape.variable(DenseMatrix::from_rows({{0.5}, {0.25}}));
  const Var h = ag::relu(ag::matmul(x, w));   // 2 ops
  const Var y = ag::add(h, h);                // shared parent
  const Var loss = ag::sum(ag::scale(y, 3));  // 2 ops
  tape.backward(loss);
  CHECK(tape.backward_visits() == 5);
}

TEST_CASE("grad_check: quadratic is exact up to roundoff") {
  Rng rng(3);
  const DenseMatrix a = rng.normal_matrix(3, 3);
  const ScalarFunction f = [&](Tape& t, std::span<const Var> p) {
    const Var x = p[0];
    return ag::sum(ag::hadamard(ag::matmul(t.constant(a), x), x));
  };
  const DenseMatrix x0[] = {rng.normal_matrix(3, 2)};
  CHECK(grad_check(f, x0).max_relative_error < 1e-8);
}

TEST_CASE("grad_check: every differentiable op against central differences") {
  Rng rng(17);
  const std::vector<DenseMatrix> params = {rng.normal_matrix(4, 3), rng.normal_matrix(3, 5),
                                           rng.normal_matrix(1, 5), rng.normal_matrix(4, 5)};
  const auto sparse = std::make_shared<const SparseMatrix>(
      SparseMatrix::from_triplets(4, 4, {{0, 1, 0.5}, {1, 0, 0.5}, {2, 3, 1.5}, {3, 3, -0.7}}));
  const int labels[] = {0, -1, 4, 2};
  const std::vector<std::size_t> pick = {3, 0, 1, 2, 2, 1, 0, 3, 3, 1};

  const ScalarFunction f = [&](Tape&, std::span<const Var> p) {
    Var h = ag::matmul(p[0], p[1]);                                // 4x5
    h = ag::add_row_bias(h, p[2]);
    h = ag::spmm(sparse, h);
    h = ag::sub(ag::hadamard(h, p[3]), ag::scale(p[3], 0.3));
    h = ag::relu(h);
    h = ag::add(h, ag::transpose(ag::transpose(p[3])));
    h = ag::row_scale(h, {1.0, 0.5, 2.0, -1.0});
    const Var g = ag::row_gather(h, {3, 1, 1, 0});
    const Var both[] = {g, h};
    const Var stacked = ag::concat_rows(both);
    const Var picked = ag::pick_by_column(stacked, 2, pick);
    const Var probs = ag::softmax_rows(stacked);
    return ag::add(ag::add(ag::cross_entropy(h, labels), ag::mean(ag::hadamard(probs, stacked))),
                   ag::scale(ag::sum(picked), 0.1));
  };
  const auto report = grad_check(f, params);
  CHECK(report.entries_checked == 12 + 15 + 5 + 20);
  CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("grad_check: random three-layer composite") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const DenseMatrix x = rng.normal_matrix(6, 4);
    const std::vector<DenseMatrix> params = {rng.normal_matrix(4, 5), rng.normal_matrix(5, 5),
                                             rng.normal_matrix(5, 3)};
    const int labels[] = {0, 1, 2, 0, 1, 2};
    const ScalarFunction f = [&](Tape& t, std::span<const Var> p) {
      Var h = ag::relu(ag::matmul(t.constant(x), p[0]));
      h = ag::relu(ag::matmul(h, p[1]));
      return ag::cross_entropy(ag::matmul(h, p[2]), labels);
    };
    CHECK(grad_check(f, params).max_relative_error < 1e-4);
  }
}

TEST_CASE("grad_check: a broken gradient is caught") {
  Rng rng(21);
  const DenseMatrix params[] = {rng.normal_matrix(3, 3)};
  // tanh-like op whose backward drops a factor.
  const ScalarFunction f = [](Tape& t, std::span<const Var> p) {
    const Var x = p[0];
    DenseMatrix out = x.value();
    for (double& v : out.data()) v = v * v * v;
    const Var parents[] = {x};
    const Var cube = t.record(std::move(out), parents, [x](Tape& tp, const DenseMatrix& g) {
      auto* gx = tp.grad_slot(x);
      if (gx == nullptr) return;
      const auto xv = tp.value(x).data();
      for (std::size_t i = 0; i < xv.size(); ++i) gx->data()[i] += g.data()[i] * 2.0 * xv[i] * xv[i];
    });
    return ag::sum(cube);
  };
  CHECK(grad_check(f, params).max_relative_error > 1e-2);
}

TEST_CASE("grad_check reports non-finite evaluations") {
  const DenseMatrix params[] = {DenseMatrix(1, 1, 1.0)};
  const ScalarFunction f = [](Tape&, std::span<const Var> p) {
    return ag::scale(ag::sum(p[0]), std::numeric_limits<double>::infinity());
  };
  CHECK_THROWS_AS(grad_check(f, params), NumericError);
}
