#pragma once

// Brute-force reference implementations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <span>
#include <tuple>
#include <vector>

#include "hydg/hypergraph.hpp"
#include "hydg/matrix.hpp"
#include "hydg/rng.hpp"

namespace hydg::oracle {

inline VertexTable grid_table(std::size_t n, std::size_t slices, std::size_t dim, Rng& rng,
                              double absent_rate = 0.0) {
  VertexTable t;
  std::vector<double> rows;
  for (std::size_t s = 0; s < slices; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.bernoulli(absent_rate)) continue;
      t.ids.push_back({static_cast<std::int32_t>(i), static_cast<std::int32_t>(s), -1});
      for (std::size_t j = 0; j < dim; ++j) rows.push_back(static_cast<double>(rng.index(4)));
    }
  }
  t.features = DenseMatrix(t.ids.size(), dim, std::move(rows));
  return t;
}

inline double oracle_distance(Metric m, std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  switch (m) {
    case Metric::euclidean:
      for (std::size_t j = 0; j < a.size(); ++j) acc += (a[j] - b[j]) * (a[j] - b[j]);
      return std::sqrt(acc);
    case Metric::chebyshev:
      for (std::size_t j = 0; j < a.size(); ++j) acc = std::max(acc, std::abs(a[j] - b[j]));
      return acc;
    case Metric::cosine: {
      double ab = 0, aa = 0, bb = 0;
      for (std::size_t j = 0; j < a.size(); ++j) {
        ab += a[j] * b[j];
        aa += a[j] * a[j];
        bb += b[j] * b[j];
      }
      return (aa == 0 || bb == 0) ? 1.0 : 1.0 - ab / std::sqrt(aa * bb);
    }
  }
  return 0;
}

// Exhaustive sort over every (node, slice) pair, true (unsquared) distance.
inline std::vector<std::size_t> knn_oracle(const VertexTable& t, std::size_t anchor,
                                           std::size_t k, std::size_t tau, Metric m) {
  const VertexId a = t.ids[anchor];
  std::vector<std::tuple<double, int, int, int, std::size_t>> all;
  for (std::size_t j = 0; j < t.ids.size(); ++j) {
    const int dt = std::abs(t.ids[j].slice - a.slice);
    if (dt == 0 || dt > static_cast<int>(tau)) continue;
    all.emplace_back(oracle_distance(m, t.features.row(anchor), t.features.row(j)), dt,
                     t.ids[j].slice, t.ids[j].node, j);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out{anchor};
  for (std::size_t r = 0; r < std::min(k, all.size()); ++r) out.push_back(std::get<4>(all[r]));
  return out;
}

inline Hypergraph make_hg(std::size_t nv, std::vector<std::vector<std::size_t>> edges,
                          DenseMatrix features = {}) {
  Hypergraph hg;
  for (std::size_t v = 0; v < nv; ++v) hg.vertices.push_back({static_cast<int>(v), 0, -1});
  for (auto& m : edges) hg.edges.push_back({m.front(), std::move(m), Scale::short_term});
  hg.features = features.empty() ? DenseMatrix(nv, 1) : std::move(features);
  return hg;
}

inline Hypergraph random_hg(std::size_t nv, std::size_t ne, std::size_t dim, Rng& rng) {
  std::vector<std::vector<std::size_t>> edges;
  for (std::size_t e = 0; e < ne; ++e) {
    std::vector<std::size_t> m{rng.index(nv)};
    const std::size_t extra = rng.index(4);
    for (std::size_t i = 0; i < extra; ++i) {
      const std::size_t v = rng.index(nv);
      if (std::ranges::find(m, v) == m.end()) m.push_back(v);
    }
    edges.push_back(std::move(m));
  }
  return make_hg(nv, std::move(edges), rng.normal_matrix(nv, dim));
}

inline DenseMatrix naive_mul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

inline DenseMatrix naive_transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// Dense D_v^-1/2 H W D_e^-1 H^T D_v^-1/2 Z theta, with W = I and isolated
// vertices mapped to themselves.
inline DenseMatrix spectral_oracle(const Hypergraph& hg, const DenseMatrix& z,
                                   const DenseMatrix& theta) {
  const std::size_t nv = hg.vertices.size(), ne = hg.edges.size();
  DenseMatrix h(nv, ne);
  for (std::size_t e = 0; e < ne; ++e)
    for (std::size_t v : hg.edges[e].members) h(v, e) = 1.0;
  DenseMatrix dv(nv, nv), de(ne, ne);
  for (std::size_t v = 0; v < nv; ++v) {
    double d = 0;
    for (std::size_t e = 0; e < ne; ++e) d += h(v, e);
    dv(v, v) = d > 0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  for (std::size_t e = 0; e < ne; ++e) {
    double d = 0;
    for (std::size_t v = 0; v < nv; ++v) d += h(v, e);
    de(e, e) = 1.0 / d;
  }
  DenseMatrix p = naive_mul(naive_mul(naive_mul(naive_mul(dv, h), de), naive_transpose(h)), dv);
  for (std::size_t v = 0; v < nv; ++v)
    if (dv(v, v) == 0.0) p(v, v) = 1.0;
  DenseMatrix out = naive_mul(naive_mul(p, z), theta);
  for (double& x : out.data()) x = std::max(x, 0.0);
  return out;
}

// Exhaustive pair counting, ties 0.5.
inline double auc_oracle(const DenseMatrix& probs, const std::vector<int>& truth) {
  double total = 0;
  int used = 0;
  for (std::size_t c = 0; c < probs.cols(); ++c) {
    double num = 0, pairs = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] != static_cast<int>(c)) continue;
      for (std::size_t j = 0; j < truth.size(); ++j) {
        if (truth[j] == static_cast<int>(c)) continue;
        pairs += 1;
        if (probs(i, c) > probs(j, c)) num += 1;
        if (probs(i, c) == probs(j, c)) num += 0.5;
      }
    }
    if (pairs == 0) continue;
    total += num / pairs;
    ++used;
  }
  return total / used;
}

}  // namespace hydg::oracle
