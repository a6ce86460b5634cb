#pragma once

// Temporal KNN hypergraphs over (node, slice) vertices and over per-class
// group prototypes.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hydg/backbone.hpp"
#include "hydg/matrix.hpp"

namespace hydg {

// Individual vertex: (node, slice), group_class = -1.
// Group vertex: node holds the cluster index m, group_class holds c.
struct VertexId {
  std::int32_t node = 0;
  std::int32_t slice = 0;
  std::int32_t group_class = -1;

  bool is_group() const noexcept { return group_class >= 0; }
  auto operator<=>(const VertexId&) const = default;
};

std::string to_string(const VertexId& v);

enum class Scale : std::uint8_t { short_term, mid_term, long_term };
inline constexpr Scale kScales[] = {Scale::short_term, Scale::mid_term, Scale::long_term};

std::string_view name(Scale s);

struct TemporalScales {
  std::size_t short_term = 1;
  std::size_t mid_term = 1;
  std::size_t long_term = 1;

  std::size_t operator[](Scale s) const noexcept;
  bool operator==(const TemporalScales&) const = default;
};

// {1, ceil(T/3), T-1}, each clamped to T-1.
TemporalScales default_scales(std::size_t slices);

enum class Metric { euclidean, cosine, chebyshev };

std::string_view name(Metric m);
Metric parse_metric(std::string_view text);

// True distance d(a, b).
double metric_distance(Metric m, std::span<const double> a, std::span<const double> b);
// Monotone transform of metric_distance used for ranking (squared for
// Euclidean). Cosine distance of a zero vector is 1.
double rank_distance(Metric m, std::span<const double> a, std::span<const double> b);

// Indices refer to Hypergraph::vertices. The anchor is members.front(); the
// rest follow in KNN rank order.
struct Hyperedge {
  std::size_t anchor = 0;
  std::vector<std::size_t> members;
  Scale scale = Scale::short_term;

  bool operator==(const Hyperedge&) const = default;
};

// Vertices paired with their feature rows.
struct VertexTable {
  std::vector<VertexId> ids;
  DenseMatrix features;  // ids.size() x h
};

// Present (node, slice) pairs in table order (entry-major, node-minor).
VertexTable present_vertices(const EmbeddingTable& table);

struct Hypergraph {
  std::vector<VertexId> vertices;
  DenseMatrix features;  // one row per vertex, detached
  std::vector<Hyperedge> edges;
};

// Anchor plus its K nearest vertices in other slices within tau. Ranking is
// by (distance, |dt|, slice, node). Throws ContractError for an unknown anchor.
Hyperedge knn_temporal(const VertexTable& table, std::size_t anchor, std::size_t k,
                       std::size_t tau, Metric metric, Scale scale = Scale::short_term);

// One edge per (vertex, scale), ordered by (anchor, scale). Throws
// ParameterError unless short <= mid <= long.
Hypergraph build_individual(const VertexTable& table, std::size_t k, const TemporalScales& scales,
                            Metric metric);
Hypergraph build_individual(const EmbeddingTable& table, std::size_t k,
                            const TemporalScales& scales, Metric metric);

// ---------------------------------------------------------------------------
// Group level
// ---------------------------------------------------------------------------

struct KMeansResult {
  std::vector<std::size_t> assignment;  // cluster per point
  DenseMatrix centroids;                // M_eff x dim
  double inertia = 0.0;                 // sum of squared distances to centroids
  std::size_t iterations = 0;
};

// k-means++ seeding then Lloyd iterations (at most 100, or until assignments
// stop changing). M_eff = min(M, #distinct points). Throws ContractError on
// empty input and ParameterError when M == 0.
KMeansResult kmeans(const DenseMatrix& points, std::size_t m, std::uint64_t seed);

enum class Aggregation { avg, max, min };

std::string_view name(Aggregation a);
Aggregation parse_aggregation(std::string_view text);

struct GroupPrototype {
  int cls = 0;
  std::size_t cluster = 0;
  std::size_t slice = 0;  // slice index t
  std::vector<double> vector;
  std::vector<std::size_t> members;  // node indices aggregated into this prototype
};

// For each class c and table entry t: cluster the present embeddings labelled
// c and aggregate every cluster. Ordered by (c, t, m). `labels[e]` holds the
// node labels of table entry e.
std::vector<GroupPrototype> group_prototypes(const EmbeddingTable& table,
                                             std::span<const std::vector<int>> labels,
                                             std::size_t classes, std::size_t m,
                                             Aggregation agg, std::uint64_t seed);

// KNN hypergraph over the prototypes of a single class. Throws ContractError
// when `prototypes` is empty or mixes classes.
Hypergraph build_group(std::span<const GroupPrototype> prototypes, std::size_t k,
                       const TemporalScales& scales, Metric metric);

// Builds one hypergraph per class present in `prototypes` and concatenates
// them. Vertices are grouped by ascending class, prototype order within a class.
Hypergraph build_group_union(std::span<const GroupPrototype> prototypes, std::size_t k,
                             const TemporalScales& scales, Metric metric);

// One line per edge: "scale anchor: member member ...".
std::string dump(const Hypergraph& hg);

}  // namespace hydg
