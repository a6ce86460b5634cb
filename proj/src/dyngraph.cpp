#include "hydg/dyngraph.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "hydg/error.hpp"

namespace hydg {

std::size_t SnapshotGraph::present_count() const {
  return static_cast<std::size_t>(std::count(presence.begin(), presence.end(), true));
}

SparseMatrix adjacency_from_edges(std::size_t n,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::set<std::pair<std::size_t, std::size_t>> unique;
  for (auto [u, v] : edges) {
    if (u >= n || v >= n) {
      throw SchemaError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                        ") outside node universe of " + std::to_string(n));
    }
    if (u == v) continue;
    unique.insert({std::min(u, v), std::max(u, v)});
  }
  std::vector<Triplet> t;
  t.reserve(2 * unique.size());
  for (auto [u, v] : unique) {
    t.push_back({u, v, 1.0});
    t.push_back({v, u, 1.0});
  }
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

std::string format_stats(const DatasetStats& s) {
  std::ostringstream out;
  out << "nodes=" << s.nodes << " edges=" << s.edges << " time_steps=" << s.time_steps
      << " classes=" << s.classes << " attributes=" << s.attributes;
  return out.str();
}

DynamicGraph::DynamicGraph(std::size_t nodes, std::size_t attributes, std::size_t classes,
                           std::vector<SnapshotGraph> snapshots)
    : nodes_(nodes), attributes_(attributes), classes_(classes), snapshots_(std::move(snapshots)) {
  if (snapshots_.empty()) throw SchemaError("dynamic graph has no slices");
  if (classes_ == 0) throw SchemaError("class count must be positive");
  for (std::size_t t = 0; t < snapshots_.size(); ++t) {
    const SnapshotGraph& s = snapshots_[t];
    const std::string where = "slice " + std::to_string(t) + ": ";
    if (s.t != t) throw SchemaError(where + "slice index " + std::to_string(s.t) + " out of order");
    if (s.adjacency.rows() != nodes_ || s.adjacency.cols() != nodes_) {
      throw SchemaError(where + "adjacency is not n x n");
    }
    if (s.features.rows() != nodes_ || s.features.cols() != attributes_) {
      throw SchemaError(where + "features are not n x d");
    }
    if (s.labels.size() != nodes_) throw SchemaError(where + "label count != n");
    if (s.presence.size() != nodes_) throw SchemaError(where + "presence count != n");
    for (int y : s.labels) {
      if (y != kUnknownLabel && (y < 0 || static_cast<std::size_t>(y) >= classes_)) {
        throw SchemaError(where + "label " + std::to_string(y) + " outside [0, C)");
      }
    }
    const auto rp = s.adjacency.row_ptr();
    const auto ci = s.adjacency.col_index();
    const auto vals = s.adjacency.values();
    if (!(s.adjacency.transposed() == s.adjacency)) {
      throw SchemaError(where + "adjacency is not symmetric");
    }
    for (std::size_t u = 0; u < nodes_; ++u) {
      for (std::size_t e = rp[u]; e < rp[u + 1]; ++e) {
        if (vals[e] < 0.0) throw SchemaError(where + "negative edge weight");
        if (!s.presence[u] || !s.presence[ci[e]]) {
          throw SchemaError(where + "edge (" + std::to_string(u) + "," + std::to_string(ci[e]) +
                            ") touches an absent node");
        }
      }
    }
  }
}

DatasetStats DynamicGraph::stats() const {
  DatasetStats s{nodes_, 0, snapshots_.size(), classes_, attributes_};
  for (const auto& snap : snapshots_) s.edges += snap.edge_count();
  return s;
}

std::vector<std::size_t> SplitSpec::train_slices() const {
  std::vector<std::size_t> out(last_train + 1);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

std::vector<std::size_t> SplitSpec::test_slices() const {
  std::vector<std::size_t> out;
  for (std::size_t t = last_train + 1; t < slices; ++t) out.push_back(t);
  return out;
}

SplitSpec split(const DynamicGraph& g, std::size_t t) {
  const std::size_t T = g.slices();
  if (T < 2 || t + 2 > T) {
    throw ParameterError("split: t=" + std::to_string(t) + " leaves no test slice (T=" +
                         std::to_string(T) + ", need t <= T-2)");
  }
  return SplitSpec{t, T};
}

DynamicGraph mask_test_labels(const DynamicGraph& g, const SplitSpec& s) {
  std::vector<SnapshotGraph> snaps = g.snapshots();
  for (auto& snap : snaps) {
    if (s.is_test(snap.t)) std::fill(snap.labels.begin(), snap.labels.end(), kUnknownLabel);
  }
  return DynamicGraph(g.nodes(), g.attributes(), g.classes(), std::move(snaps));
}

DenseMatrix degree_bucket_features(const SparseMatrix& adjacency, std::size_t buckets) {
  if (buckets == 0) throw ParameterError("degree bucket count must be positive");
  DenseMatrix f(adjacency.rows(), buckets);
  const auto rp = adjacency.row_ptr();
  for (std::size_t u = 0; u < adjacency.rows(); ++u) {
    const std::size_t degree = rp[u + 1] - rp[u];
    f(u, std::min(degree, buckets - 1)) = 1.0;
  }
  return f;
}

}  // namespace hydg
