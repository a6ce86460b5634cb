#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hydg/matrix.hpp"

namespace hydg {

inline constexpr int kUnknownLabel = -1;

// One time slice over the shared node universe.
struct SnapshotGraph {
  std::size_t t = 0;
  SparseMatrix adjacency;        // n x n, symmetric, 0/1
  DenseMatrix features;          // n x d
  std::vector<int> labels;       // class id or kUnknownLabel
  std::vector<bool> presence;    // node exists in this slice

  std::size_t edge_count() const { return adjacency.nnz() / 2; }
  std::size_t present_count() const;

  bool operator==(const SnapshotGraph&) const = default;
};

// Builds a symmetric 0/1 adjacency from an undirected edge list. Duplicate
// edges (in either orientation) collapse; self-loops are dropped.
SparseMatrix adjacency_from_edges(std::size_t n,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& edges);

struct DatasetStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;  // summed over slices
  std::size_t time_steps = 0;
  std::size_t classes = 0;
  std::size_t attributes = 0;

  bool operator==(const DatasetStats&) const = default;
};

std::string format_stats(const DatasetStats& s);

class DynamicGraph {
 public:
  DynamicGraph() = default;
  // Validates every snapshot; throws SchemaError on any inconsistency.
  DynamicGraph(std::size_t nodes, std::size_t attributes, std::size_t classes,
               std::vector<SnapshotGraph> snapshots);

  std::size_t nodes() const noexcept { return nodes_; }
  std::size_t attributes() const noexcept { return attributes_; }
  std::size_t classes() const noexcept { return classes_; }
  std::size_t slices() const noexcept { return snapshots_.size(); }

  const SnapshotGraph& snapshot(std::size_t t) const { return snapshots_.at(t); }
  const std::vector<SnapshotGraph>& snapshots() const noexcept { return snapshots_; }

  DatasetStats stats() const;

  bool operator==(const DynamicGraph&) const = default;

 private:
  std::size_t nodes_ = 0;
  std::size_t attributes_ = 0;
  std::size_t classes_ = 0;
  std::vector<SnapshotGraph> snapshots_;
};

// Train slices [0, last_train], test slices (last_train, slices).
struct SplitSpec {
  std::size_t last_train = 0;
  std::size_t slices = 0;

  bool is_train(std::size_t t) const noexcept { return t <= last_train; }
  bool is_test(std::size_t t) const noexcept { return t > last_train && t < slices; }
  std::vector<std::size_t> train_slices() const;
  std::vector<std::size_t> test_slices() const;
};

// Throws ParameterError unless 0 <= t <= T-2.
SplitSpec split(const DynamicGraph& g, std::size_t t);

// Copy of g with every test-slice label replaced by kUnknownLabel.
DynamicGraph mask_test_labels(const DynamicGraph& g, const SplitSpec& s);

// ---------------------------------------------------------------------------
// Dataset directory format
//
//   meta              "n d C T"  (d may be "-" or 0: features synthesised)
//   edges_<t>.txt     one "u v" per line
//   feat_<t>.csv      n rows of d comma-separated reals   (optional)
//   labels_<t>.txt    one class id or "?" per node
//   presence_<t>.txt  one 0/1 per node                    (optional)
// ---------------------------------------------------------------------------

struct LoadOptions {
  // Width of the one-hot degree encoding used when no feature files exist.
  std::size_t degree_buckets = 16;
};

DynamicGraph load_dataset(const std::filesystem::path& dir, const LoadOptions& options = {});
void save_dataset(const DynamicGraph& g, const std::filesystem::path& dir);

// One-hot degree features; degrees at or above buckets-1 share the last bucket.
DenseMatrix degree_bucket_features(const SparseMatrix& adjacency, std::size_t buckets);

// ---------------------------------------------------------------------------
// Drifting stochastic block model
// ---------------------------------------------------------------------------

struct SbmSpec {
  std::size_t nodes = 200;
  std::size_t slices = 8;
  std::size_t classes = 3;
  double p_in = 0.1;
  double p_out = 0.01;
  double drift_rate = 0.1;
  double feature_noise = 1.0;
  std::size_t feature_dim = 16;
  std::uint64_t seed = 0;
};

// Slice 0 assigns blocks uniformly at random; each later slice moves every
// node to a different, uniformly chosen block with probability drift_rate.
// Edges are Bernoulli(p_in) inside a block and Bernoulli(p_out) across.
// Features are the block's mean vector (1 on coordinates j with j % C == c)
// plus independent N(0, feature_noise^2) noise. Labels are the current block.
DynamicGraph generate_sbm(const SbmSpec& spec);

}  // namespace hydg
