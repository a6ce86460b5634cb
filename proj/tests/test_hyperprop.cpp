#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "hydg/error.hpp"
#include "hydg/gradcheck.hpp"
#include "hydg/hyperprop.hpp"

using namespace hydg;
using namespace hydg::oracle;

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

// Scalar recomputation of one message-passing round.
DenseMatrix message_round_oracle(const Hypergraph& hg, const DenseMatrix& theta) {
  const DenseMatrix& z = hg.features;
  std::vector<double> d;
  for (const auto& e : hg.edges)
    for (std::size_t i = 1; i < e.members.size(); ++i)
      d.push_back(std::sqrt(sq_dist(z.row(e.anchor), z.row(e.members[i]))));
  std::sort(d.begin(), d.end());
  double sigma = d.size() % 2 ? d[d.size() / 2] : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
  sigma = std::max(sigma, 1e-8);

  DenseMatrix agg(z.rows(), z.cols());
  for (std::size_t v = 0; v < z.rows(); ++v) {
    std::vector<std::vector<double>> msgs;
    for (const auto& e : hg.edges) {
      if (e.members.size() < 2 || std::ranges::find(e.members, v) == e.members.end()) continue;
      std::vector<double> p(z.cols(), 0.0);
      for (std::size_t j : e.members) {
        if (j == v) continue;
        const double w = std::exp(-sq_dist(z.row(v), z.row(j)) / (sigma * sigma));
        for (std::size_t c = 0; c < z.cols(); ++c) p[c] += w * z(j, c);
      }
      msgs.push_back(p);
    }
    if (msgs.empty()) {
      for (std::size_t c = 0; c < z.cols(); ++c) agg(v, c) = z(v, c);
      continue;
    }
    std::vector<double> s;
    for (const auto& p : msgs) {
      double ab = 0, aa = 0, bb = 0;
      for (std::size_t c = 0; c < z.cols(); ++c) {
        ab += z(v, c) * p[c];
        aa += z(v, c) * z(v, c);
        bb += p[c] * p[c];
      }
      s.push_back(aa > 0 && bb > 0 ? ab / std::sqrt(aa * bb) : 0.0);
    }
    double total = 0;
    for (double x : s) total += std::exp(x);
    for (std::size_t k = 0; k < msgs.size(); ++k)
      for (std::size_t c = 0; c < z.cols(); ++c) agg(v, c) += std::exp(s[k]) / total * msgs[k][c];
  }
  DenseMatrix out = naive_mul(agg, theta);
  for (double& x : out.data()) x = std::max(x, 0.0);
  return out;
}

}  // namespace

TEST_CASE("incidence examples") {
  SUBCASE("single edge") {
    const IncidenceMatrix inc = incidence(make_hg(2, {{0, 1}}));
    CHECK(inc.h.densify() == DenseMatrix::from_rows({{1}, {1}}));
    CHECK(inc.edge_degree == std::vector<double>{2});
  }
  SUBCASE("no edges") {
    const IncidenceMatrix inc = incidence(make_hg(3, {}));
    CHECK(inc.h.rows() == 3);
    CHECK(inc.h.cols() == 0);
    CHECK(inc.vertex_degree == std::vector<double>{0, 0, 0});
  }
  SUBCASE("two overlapping edges") {
    const IncidenceMatrix inc = incidence(make_hg(4, {{0, 1, 2}, {1, 3}}));
    CHECK(inc.edge_degree == std::vector<double>{3, 2});
    CHECK(inc.vertex_degree == std::vector<double>{1, 2, 1, 1});
    CHECK(inc.h.nnz() == 5);
  }
  SUBCASE("weighted vertex degrees") {
    const std::vector<double> w{0.5, 2.0};
    const IncidenceMatrix inc = incidence(make_hg(4, {{0, 1, 2}, {1, 3}}), w);
    CHECK(inc.vertex_degree == std::vector<double>{0.5, 2.5, 0.5, 2.0});
  }
  SUBCASE("unknown vertex") {
    CHECK_THROWS_AS(incidence(make_hg(2, {{0, 5}})), ContractError);
  }
}

TEST_CASE("sigma bandwidth and pair weights") {
  SUBCASE("equal distances") {
    const Hypergraph hg = make_hg(3, {{0, 1}, {1, 2}}, DenseMatrix(3, 1, {0, 2, 4}));
    CHECK(sigma_bandwidth(hg, Metric::euclidean) == doctest::Approx(2.0));
  }
  SUBCASE("odd count median") {
    const Hypergraph hg = make_hg(4, {{0, 1, 2, 3}}, DenseMatrix(4, 1, {0, 1, 2, 3}));
    CHECK(sigma_bandwidth(hg, Metric::euclidean) == doctest::Approx(2.0));
  }
  SUBCASE("identical embeddings hit the floor") {
    const Hypergraph hg = make_hg(3, {{0, 1, 2}}, DenseMatrix(3, 2, 1.5));
    const double s = sigma_bandwidth(hg, Metric::euclidean);
    CHECK(s == kSigmaFloor);
    const PairWeightTable t = pair_weights(hg, Metric::euclidean, s);
    for (double w : t.weights[0]) CHECK(w == 1.0);
  }
  SUBCASE("no pairs") {
    CHECK_THROWS_AS(sigma_bandwidth(make_hg(2, {{0}, {1}}), Metric::euclidean), ContractError);
  }
  SUBCASE("hand weights") {
    CHECK(gaussian_weight(0.0, 0.7) == 1.0);
    CHECK(gaussian_weight(0.7, 0.7) == doctest::Approx(0.367879441171).epsilon(1e-11));
    const Hypergraph hg = make_hg(3, {{0, 1, 2}}, DenseMatrix(3, 2, {0, 0, 3, 4, 1, 0}));
    const PairWeightTable t = pair_weights(hg, Metric::euclidean, 2.0);
    REQUIRE(t.weights[0].size() == 3);
    CHECK(t.weights[0][0] == 1.0);
    CHECK(t.weights[0][1] == doctest::Approx(std::exp(-25.0 / 4.0)));
    CHECK(t.weights[0][2] == doctest::Approx(std::exp(-1.0 / 4.0)));
    CHECK_THROWS_AS(pair_weights(hg, Metric::euclidean, 0.0), ParameterError);
  }
  SUBCASE("weights lie in (0, 1] and fall with distance") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const Hypergraph hg = random_hg(10, 5, 3, rng);
      std::vector<std::pair<double, double>> dw;
      double sigma = 1.0;
      try {
        sigma = sigma_bandwidth(hg, Metric::euclidean);
      } catch (const ContractError&) {
        continue;
      }
      const PairWeightTable t = pair_weights(hg, Metric::euclidean, sigma);
      for (std::size_t e = 0; e < hg.edges.size(); ++e) {
        for (std::size_t i = 0; i < hg.edges[e].members.size(); ++i) {
          const double d = metric_distance(Metric::euclidean, hg.features.row(hg.edges[e].anchor),
                                           hg.features.row(hg.edges[e].members[i]));
          const double w = t.weights[e][i];
          CHECK(w > 0.0);
          CHECK(w <= 1.0);
          dw.emplace_back(d, w);
        }
      }
      std::sort(dw.begin(), dw.end());
      for (std::size_t i = 1; i < dw.size(); ++i) CHECK(dw[i].second <= dw[i - 1].second);
    }
  }
}

TEST_CASE("spectral layer") {
  SUBCASE("one edge over every vertex averages") {
    const DenseMatrix z = DenseMatrix::from_rows({{1, 2}, {3, 4}, {5, 9}});
    const Hypergraph hg = make_hg(3, {{0, 1, 2}});
    const DenseMatrix out = hgnn_spectral_layer(incidence(hg), z, DenseMatrix::identity(2));
    for (std::size_t v = 0; v < 3; ++v) {
      CHECK(out(v, 0) == doctest::Approx(3.0));
      CHECK(out(v, 1) == doctest::Approx(5.0));
    }
  }
  SUBCASE("isolated vertices") {
    const DenseMatrix z = DenseMatrix::from_rows({{1, -2}, {3, 4}});
    const DenseMatrix theta = DenseMatrix::from_rows({{1, 0}, {0, 2}});
    const IncidenceMatrix inc = incidence(make_hg(2, {}));
    CHECK(hgnn_spectral_layer(inc, z, theta, false) == DenseMatrix(2, 2));
    CHECK(hgnn_spectral_layer(inc, z, theta, true) == relu(matmul(z, theta)));
  }
  SUBCASE("dense oracle on random hypergraphs") {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t nv = 1 + rng.index(20), ne = rng.index(9);
      const Hypergraph hg = random_hg(nv, ne, 3, rng);
      const DenseMatrix z = rng.normal_matrix(nv, 4);
      const DenseMatrix theta = rng.normal_matrix(4, 3);
      const DenseMatrix got = hgnn_spectral_layer(incidence(hg), z, theta);
      REQUIRE(max_abs_difference(got, spectral_oracle(hg, z, theta)) <= 1e-10);
    }
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(hgnn_spectral_layer(incidence(make_hg(2, {{0, 1}})), DenseMatrix(3, 2),
                                        DenseMatrix(2, 2)),
                    ShapeError);
  }
}

TEST_CASE("edge messages") {
  const DenseMatrix z = DenseMatrix::from_rows({{9, 9}, {1, 0}, {0, 2}});
  const Hyperedge single{0, {0}, Scale::short_term};
  CHECK(edge_message(0, single, z, std::vector<double>{1.0}) == std::vector<double>{0, 0});
  const Hyperedge pair{0, {0, 1}, Scale::short_term};
  CHECK(edge_message(0, pair, z, std::vector<double>{1.0, 1.0}) == std::vector<double>{1, 0});
  const Hyperedge three{0, {0, 1, 2}, Scale::mid_term};
  CHECK(edge_message(0, three, z, std::vector<double>{1.0, 0.5, 0.25}) ==
        std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(edge_message(2, pair, z, std::vector<double>{1.0, 1.0}), ContractError);
}

TEST_CASE("attention aggregation") {
  const std::vector<double> anchor{1.0, 0.0};
  SUBCASE("one message") {
    const auto r = attention_aggregate(anchor, DenseMatrix::from_rows({{2, 3}}));
    CHECK(r.output == std::vector<double>{2, 3});
    CHECK(r.weights == std::vector<double>{1.0});
  }
  SUBCASE("equal similarity") {
    const auto r = attention_aggregate(anchor, DenseMatrix::from_rows({{1, 1}, {1, -1}}));
    CHECK(r.output[0] == doctest::Approx(1.0));
    CHECK(r.output[1] == doctest::Approx(0.0));
  }
  SUBCASE("scores 0 and ln 3") {
    const std::vector<double> s{0.0, std::log(3.0)};
    const auto w = attention_weights(s);
    CHECK(w[0] == doctest::Approx(0.25));
    CHECK(w[1] == doctest::Approx(0.75));
  }
  SUBCASE("zero norms score 0") {
    CHECK(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 2}) == 0.0);
    const auto r = attention_aggregate(std::vector<double>{0, 0},
                                       DenseMatrix::from_rows({{1, 0}, {0, 3}}));
    CHECK(r.weights[0] == doctest::Approx(0.5));
  }
  SUBCASE("empty") {
    CHECK_THROWS_AS(attention_aggregate(anchor, DenseMatrix(0, 2)), ContractError);
  }
  SUBCASE("normalised and shift invariant") {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t k = 1 + rng.index(8);
      std::vector<double> s(k);
      for (double& x : s) x = rng.uniform(-1.0, 1.0);
      const auto w = attention_weights(s);
      CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) <= 1e-12);
      const double c = rng.uniform(-50.0, 50.0);
      for (double& x : s) x += c;
      const auto w2 = attention_weights(s);
      for (std::size_t i = 0; i < k; ++i) CHECK(std::abs(w[i] - w2[i]) <= 1e-12);
    }
  }
}

TEST_CASE("propagate") {
  Rng rng(9);
  SUBCASE("zero layers") {
    const Hypergraph hg = random_hg(5, 3, 2, rng);
    CHECK(propagate(hg, HgnnParams{}) == hg.features);
  }
  SUBCASE("singleton edges take the self path") {
    const Hypergraph hg = make_hg(3, {{0}, {1}, {2}}, rng.normal_matrix(3, 2));
    const HgnnParams p{{rng.normal_matrix(2, 2)}};
    CHECK(propagate(hg, p) == relu(matmul(hg.features, p.theta[0])));
  }
  SUBCASE("six-vertex toy matches the scalar trace") {
    const Hypergraph hg = make_hg(6, {{0, 1, 2}, {1, 3}, {2, 4, 5, 0}, {3}, {4, 1}},
                                  rng.normal_matrix(6, 3));
    const HgnnParams p{{rng.normal_matrix(3, 3)}};
    CHECK(max_abs_difference(propagate(hg, p), message_round_oracle(hg, p.theta[0])) <= 1e-12);
  }
  SUBCASE("permutation equivariance") {
    for (int trial = 0; trial < 20; ++trial) {
      const Hypergraph hg = random_hg(8, 5, 3, rng);
      const HgnnParams p{{rng.normal_matrix(3, 3), rng.normal_matrix(3, 3)}};
      std::vector<std::size_t> perm(8);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = 7; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
      Hypergraph q = hg;
      for (std::size_t v = 0; v < 8; ++v) {
        q.vertices[perm[v]] = hg.vertices[v];
        std::ranges::copy(hg.features.row(v), q.features.row(perm[v]).begin());
      }
      for (auto& e : q.edges) {
        e.anchor = perm[e.anchor];
        for (auto& m : e.members) m = perm[m];
      }
      for (PropMode mode : {PropMode::message, PropMode::spectral}) {
        const DenseMatrix a = propagate(hg, p, mode);
        const DenseMatrix b = propagate(q, p, mode);
        for (std::size_t v = 0; v < 8; ++v)
          for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(a(v, c) - b(perm[v], c)) <= 1e-12);
      }
    }
  }
  SUBCASE("prop mode parsing") {
    CHECK(parse_prop_mode("spectral") == PropMode::spectral);
    CHECK_THROWS_AS(parse_prop_mode("diffusion"), ParameterError);
  }
}

TEST_CASE("tape propagation matches values and passes grad_check") {
  Rng rng(31);
  for (PropMode mode : {PropMode::message, PropMode::spectral}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Hypergraph hg = random_hg(9, 6, 3, rng);
      const PropagationPlan plan = make_plan(hg, mode, Metric::euclidean);
      const HgnnParams p{{rng.normal_matrix(3, 3), rng.normal_matrix(3, 3)}};
      const DenseMatrix probe = rng.normal_matrix(9, 3);
      {
        Tape tape;
        std::vector<Var> th{tape.variable(p.theta[0]), tape.variable(p.theta[1])};
        const Var out = propagate(plan, tape.variable(hg.features), th);
        CHECK(max_abs_difference(out.value(), propagate(plan, hg.features, p)) <= 1e-13);
      }
      const ScalarFunction f = [&](Tape& tape, std::span<const Var> v) {
        const Var out = propagate(plan, v[0], v.subspan(1));
        return ag::sum(ag::hadamard(out, tape.constant(probe)));
      };
      const std::vector<DenseMatrix> params{hg.features, p.theta[0], p.theta[1]};
      CHECK(grad_check(f, params).max_relative_error < 1e-4);
    }
  }
}
