#pragma once

// Per-snapshot GNN feature extraction: two stacked GCN or GraphSAGE
// (mean aggregator) layers, one parameter set shared by every slice.

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "hydg/dyngraph.hpp"
#include "hydg/matrix.hpp"
#include "hydg/rng.hpp"
#include "hydg/tape.hpp"

namespace hydg {

enum class BackboneKind { gcn, sage };

std::string_view name(BackboneKind kind);
BackboneKind parse_backbone(std::string_view text);

struct BackboneParams {
  BackboneKind kind = BackboneKind::gcn;
  // gcn:  {theta1 (d x h), theta2 (h x h)}
  // sage: {self1 (d x h), nbr1 (d x h), self2 (h x h), nbr2 (h x h)}
  std::vector<DenseMatrix> weights;

  std::size_t input_dim() const { return weights.front().rows(); }
  std::size_t hidden_dim() const { return weights.back().cols(); }
};

// Glorot-uniform initialisation.
BackboneParams init_backbone(BackboneKind kind, std::size_t input_dim, std::size_t hidden_dim,
                             Rng& rng);

// D^-1/2 (A + I) D^-1/2 over present nodes; rows/cols of absent nodes are empty.
SparseMatrix gcn_operator(const SparseMatrix& adjacency, const std::vector<bool>& presence);
// Row-normalised neighbour mean over present nodes; isolated rows are empty.
SparseMatrix mean_neighbor_operator(const SparseMatrix& adjacency,
                                    const std::vector<bool>& presence);

// relu(D^-1/2 (A+I) D^-1/2 z theta). An empty presence vector means all present.
DenseMatrix gcn_layer(const SparseMatrix& adjacency, const DenseMatrix& z,
                      const DenseMatrix& theta, const std::vector<bool>& presence = {});
// relu(z theta_self + mean_neighbours(z) theta_nbr).
DenseMatrix sage_layer(const SparseMatrix& adjacency, const DenseMatrix& z,
                       const DenseMatrix& theta_self, const DenseMatrix& theta_nbr,
                       const std::vector<bool>& presence = {});

struct EmbeddingTable {
  std::vector<std::size_t> slice_ids;       // slice index t of each entry
  std::vector<DenseMatrix> z;               // n x h per entry; absent rows are zero
  std::vector<std::vector<bool>> presence;  // copied from the snapshot
};

// Applies the two-layer backbone to each requested slice independently.
// An empty `slices` list means every slice of g.
EmbeddingTable embed_snapshots(const DynamicGraph& g, const BackboneParams& params,
                               std::span<const std::size_t> slices = {});

// Constant per-slice propagation data for the differentiable path.
struct SliceOperators {
  std::shared_ptr<const SparseMatrix> gcn;
  std::shared_ptr<const SparseMatrix> mean_nbr;
  std::vector<double> mask;  // 1 for present nodes, 0 otherwise
};

std::vector<SliceOperators> build_slice_operators(const DynamicGraph& g);

// Differentiable two-layer forward for one slice. `weights` are the tape
// handles of BackboneParams::weights in the same order.
Var backbone_forward(BackboneKind kind, const SliceOperators& ops, Var features,
                     std::span<const Var> weights);

}  // namespace hydg
