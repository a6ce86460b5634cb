#include "hydg/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hydg/error.hpp"

namespace hydg {
namespace {

std::vector<bool> all_present(std::size_t n, const std::vector<bool>& presence) {
  if (presence.empty()) return std::vector<bool>(n, true);
  if (presence.size() != n) throw ShapeError("presence mask length != node count");
  return presence;
}

std::vector<double> mask_of(const std::vector<bool>& presence) {
  std::vector<double> m(presence.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = presence[i] ? 1.0 : 0.0;
  return m;
}

void zero_absent(DenseMatrix& z, const std::vector<bool>& presence) {
  for (std::size_t i = 0; i < z.rows(); ++i) {
    if (!presence[i]) std::ranges::fill(z.row(i), 0.0);
  }
}

void check_square(const SparseMatrix& a, const DenseMatrix& z) {
  if (a.rows() != a.cols() || a.cols() != z.rows()) {
    throw ShapeError("backbone layer: adjacency " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs features with " + std::to_string(z.rows()) +
                     " rows");
  }
}

}  // namespace

std::string_view name(BackboneKind kind) { return kind == BackboneKind::gcn ? "gcn" : "sage"; }

BackboneKind parse_backbone(std::string_view text) {
  if (text == "gcn") return BackboneKind::gcn;
  if (text == "sage") return BackboneKind::sage;
  throw ParameterError("unknown backbone '" + std::string(text) + "'");
}

BackboneParams init_backbone(BackboneKind kind, std::size_t input_dim, std::size_t hidden_dim,
                             Rng& rng) {
  BackboneParams p;
  p.kind = kind;
  if (kind == BackboneKind::gcn) {
    p.weights.push_back(glorot_uniform(input_dim, hidden_dim, rng));
    p.weights.push_back(glorot_uniform(hidden_dim, hidden_dim, rng));
  } else {
    p.weights.push_back(glorot_uniform(input_dim, hidden_dim, rng));
    p.weights.push_back(glorot_uniform(input_dim, hidden_dim, rng));
    p.weights.push_back(glorot_uniform(hidden_dim, hidden_dim, rng));
    p.weights.push_back(glorot_uniform(hidden_dim, hidden_dim, rng));
  }
  return p;
}

SparseMatrix gcn_operator(const SparseMatrix& adjacency, const std::vector<bool>& presence) {
  const std::size_t n = adjacency.rows();
  const auto present = all_present(n, presence);
  const auto rp = adjacency.row_ptr();
  const auto ci = adjacency.col_index();
  const auto vals = adjacency.values();

  std::vector<double> degree(n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    if (!present[u]) continue;
    degree[u] = 1.0;  // self-loop
    for (std::size_t e = rp[u]; e < rp[u + 1]; ++e) {
      if (present[ci[e]]) degree[u] += vals[e];
    }
  }
  std::vector<Triplet> t;
  t.reserve(adjacency.nnz() + n);
  for (std::size_t u = 0; u < n; ++u) {
    if (!present[u]) continue;
    const double du = 1.0 / std::sqrt(degree[u]);
    t.push_back({u, u, du * du});
    for (std::size_t e = rp[u]; e < rp[u + 1]; ++e) {
      const std::size_t v = ci[e];
      if (present[v]) t.push_back({u, v, vals[e] * du / std::sqrt(degree[v])});
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

SparseMatrix mean_neighbor_operator(const SparseMatrix& adjacency,
                                    const std::vector<bool>& presence) {
  const std::size_t n = adjacency.rows();
  const auto present = all_present(n, presence);
  const auto rp = adjacency.row_ptr();
  const auto ci = adjacency.col_index();
  std::vector<Triplet> t;
  t.reserve(adjacency.nnz());
  for (std::size_t u = 0; u < n; ++u) {
    if (!present[u]) continue;
    std::size_t count = 0;
    for (std::size_t e = rp[u]; e < rp[u + 1]; ++e) count += present[ci[e]] ? 1 : 0;
    if (count == 0) continue;
    const double w = 1.0 / static_cast<double>(count);
    for (std::size_t e = rp[u]; e < rp[u + 1]; ++e) {
      if (present[ci[e]]) t.push_back({u, ci[e], w});
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

DenseMatrix gcn_layer(const SparseMatrix& adjacency, const DenseMatrix& z,
                      const DenseMatrix& theta, const std::vector<bool>& presence) {
  check_square(adjacency, z);
  const auto present = all_present(z.rows(), presence);
  DenseMatrix in = z;
  zero_absent(in, present);
  DenseMatrix out = relu(matmul(spmm(gcn_operator(adjacency, present), in), theta));
  zero_absent(out, present);
  return out;
}

DenseMatrix sage_layer(const SparseMatrix& adjacency, const DenseMatrix& z,
                       const DenseMatrix& theta_self, const DenseMatrix& theta_nbr,
                       const std::vector<bool>& presence) {
  check_square(adjacency, z);
  const auto present = all_present(z.rows(), presence);
  DenseMatrix in = z;
  zero_absent(in, present);
  const DenseMatrix nbr = spmm(mean_neighbor_operator(adjacency, present), in);
  DenseMatrix out = relu(add(matmul(in, theta_self), matmul(nbr, theta_nbr)));
  zero_absent(out, present);
  return out;
}

EmbeddingTable embed_snapshots(const DynamicGraph& g, const BackboneParams& params,
                               std::span<const std::size_t> slices) {
  if (params.weights.empty() || params.input_dim() != g.attributes()) {
    throw ShapeError("embed_snapshots: backbone input dim does not match graph attributes");
  }
  std::vector<std::size_t> order(slices.begin(), slices.end());
  if (order.empty()) {
    for (std::size_t t = 0; t < g.slices(); ++t) order.push_back(t);
  }
  EmbeddingTable table;
  for (std::size_t t : order) {
    const SnapshotGraph& s = g.snapshot(t);
    DenseMatrix z;
    if (params.kind == BackboneKind::gcn) {
      z = gcn_layer(s.adjacency, s.features, params.weights[0], s.presence);
      z = gcn_layer(s.adjacency, z, params.weights[1], s.presence);
    } else {
      z = sage_layer(s.adjacency, s.features, params.weights[0], params.weights[1], s.presence);
      z = sage_layer(s.adjacency, z, params.weights[2], params.weights[3], s.presence);
    }
    table.slice_ids.push_back(t);
    table.z.push_back(std::move(z));
    table.presence.push_back(s.presence);
  }
  return table;
}

std::vector<SliceOperators> build_slice_operators(const DynamicGraph& g) {
  std::vector<SliceOperators> ops;
  ops.reserve(g.slices());
  for (const auto& s : g.snapshots()) {
    ops.push_back({std::make_shared<const SparseMatrix>(gcn_operator(s.adjacency, s.presence)),
                   std::make_shared<const SparseMatrix>(
                       mean_neighbor_operator(s.adjacency, s.presence)),
                   mask_of(s.presence)});
  }
  return ops;
}

Var backbone_forward(BackboneKind kind, const SliceOperators& ops, Var features,
                     std::span<const Var> weights) {
  Var z = ag::row_scale(features, ops.mask);
  if (kind == BackboneKind::gcn) {
    if (weights.size() != 2) throw ShapeError("gcn backbone expects 2 weight matrices");
    for (std::size_t l = 0; l < 2; ++l) {
      z = ag::row_scale(ag::relu(ag::matmul(ag::spmm(ops.gcn, z), weights[l])), ops.mask);
    }
  } else {
    if (weights.size() != 4) throw ShapeError("sage backbone expects 4 weight matrices");
    for (std::size_t l = 0; l < 2; ++l) {
      const Var self = ag::matmul(z, weights[2 * l]);
      const Var nbr = ag::matmul(ag::spmm(ops.mean_nbr, z), weights[2 * l + 1]);
      z = ag::row_scale(ag::relu(ag::add(self, nbr)), ops.mask);
    }
  }
  return z;
}

}  // namespace hydg
