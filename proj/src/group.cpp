#include <algorithm>
#include <limits>
#include <map>
#include <numeric>

#include "hydg/error.hpp"
#include "hydg/hypergraph.hpp"
#include "hydg/kernels.hpp"
#include "hydg/rng.hpp"

namespace hydg {
namespace {

std::size_t distinct_rows(const DenseMatrix& points) {
  std::vector<std::size_t> order(points.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto less = [&](std::size_t a, std::size_t b) {
    return std::ranges::lexicographical_compare(points.row(a), points.row(b));
  };
  std::sort(order.begin(), order.end(), less);
  std::size_t count = order.empty() ? 0 : 1;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (less(order[i - 1], order[i])) ++count;
  }
  return count;
}

std::size_t nearest(const DenseMatrix& centroids, std::span<const double> x, double* dist) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = kernels::squared_l2(centroids.row(c), x);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist != nullptr) *dist = best_d;
  return best;
}

DenseMatrix seed_plus_plus(const DenseMatrix& points, std::size_t m, Rng& rng) {
  const std::size_t n = points.rows();
  DenseMatrix centroids(m, points.cols());
  std::ranges::copy(points.row(rng.index(n)), centroids.row(0).begin());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < m; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], kernels::squared_l2(points.row(i), centroids.row(c - 1)));
      total += d2[i];
    }
    const double target = rng.uniform(0.0, total);
    std::size_t pick = n;
    double cumulative = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] == 0.0) continue;
      cumulative += d2[i];
      pick = i;
      if (cumulative > target) break;
    }
    std::ranges::copy(points.row(pick), centroids.row(c).begin());
  }
  return centroids;
}

std::vector<double> aggregate(const DenseMatrix& points, std::span<const std::size_t> rows,
                              Aggregation agg) {
  std::vector<double> out(points.row(rows.front()).begin(), points.row(rows.front()).end());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto x = points.row(rows[r]);
    for (std::size_t j = 0; j < out.size(); ++j) {
      switch (agg) {
        case Aggregation::avg:
          out[j] += x[j];
          break;
        case Aggregation::max:
          out[j] = std::max(out[j], x[j]);
          break;
        case Aggregation::min:
          out[j] = std::min(out[j], x[j]);
          break;
      }
    }
  }
  if (agg == Aggregation::avg) {
    for (double& v : out) v /= static_cast<double>(rows.size());
  }
  return out;
}

}  // namespace

KMeansResult kmeans(const DenseMatrix& points, std::size_t m, std::uint64_t seed) {
  if (points.rows() == 0) throw ContractError("kmeans: no points");
  if (m == 0) throw ParameterError("kmeans: cluster count must be positive");
  const std::size_t n = points.rows();
  const std::size_t k = std::min(m, distinct_rows(points));

  Rng rng(seed);
  KMeansResult res;
  res.centroids = seed_plus_plus(points, k, rng);
  res.assignment.assign(n, k);
  for (res.iterations = 0; res.iterations < 100; ++res.iterations) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest(res.centroids, points.row(i), nullptr);
      changed = changed || c != res.assignment[i];
      res.assignment[i] = c;
    }
    if (!changed) break;
    DenseMatrix sums(k, points.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      kernels::axpy(1.0, points.row(i), sums.row(res.assignment[i]));
      ++counts[res.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      const auto src = sums.row(c);
      auto dst = res.centroids.row(c);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = src[j] / static_cast<double>(counts[c]);
    }
  }
  res.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    res.inertia += kernels::squared_l2(points.row(i), res.centroids.row(res.assignment[i]));
  }
  return res;
}

std::string_view name(Aggregation a) {
  switch (a) {
    case Aggregation::avg:
      return "avg";
    case Aggregation::max:
      return "max";
    case Aggregation::min:
      return "min";
  }
  return "?";
}

Aggregation parse_aggregation(std::string_view text) {
  if (text == "avg") return Aggregation::avg;
  if (text == "max") return Aggregation::max;
  if (text == "min") return Aggregation::min;
  throw ParameterError("unknown aggregation '" + std::string(text) + "'");
}

std::vector<GroupPrototype> group_prototypes(const EmbeddingTable& table,
                                             std::span<const std::vector<int>> labels,
                                             std::size_t classes, std::size_t m,
                                             Aggregation agg, std::uint64_t seed) {
  if (labels.size() != table.z.size()) {
    throw ShapeError("group_prototypes: one label vector per table entry expected");
  }
  const Rng root = Rng(seed).substream("kmeans");
  std::vector<GroupPrototype> out;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t e = 0; e < table.z.size(); ++e) {
      const DenseMatrix& z = table.z[e];
      if (labels[e].size() != z.rows()) throw ShapeError("group_prototypes: label count != rows");
      std::vector<std::size_t> nodes;
      for (std::size_t i = 0; i < z.rows(); ++i) {
        if (table.presence[e][i] && labels[e][i] == static_cast<int>(c)) nodes.push_back(i);
      }
      if (nodes.empty()) continue;
      const DenseMatrix points = row_gather(z, nodes);
      const std::size_t t = table.slice_ids[e];
      const KMeansResult km = kmeans(points, m, root.substream(c).substream(t).next());
      for (std::size_t k = 0; k < km.centroids.rows(); ++k) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
          if (km.assignment[i] == k) rows.push_back(i);
        }
        if (rows.empty()) continue;
        GroupPrototype p;
        p.cls = static_cast<int>(c);
        p.cluster = k;
        p.slice = t;
        p.vector = aggregate(points, rows, agg);
        for (std::size_t r : rows) p.members.push_back(nodes[r]);
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

Hypergraph build_group(std::span<const GroupPrototype> prototypes, std::size_t k,
                       const TemporalScales& scales, Metric metric) {
  if (prototypes.empty()) throw ContractError("build_group: no prototypes");
  const int cls = prototypes.front().cls;
  VertexTable table;
  table.features = DenseMatrix(prototypes.size(), prototypes.front().vector.size());
  for (std::size_t i = 0; i < prototypes.size(); ++i) {
    const GroupPrototype& p = prototypes[i];
    if (p.cls != cls) throw ContractError("build_group: prototypes of several classes");
    if (p.vector.size() != table.features.cols()) {
      throw ShapeError("build_group: prototype vectors differ in length");
    }
    table.ids.push_back({static_cast<std::int32_t>(p.cluster), static_cast<std::int32_t>(p.slice),
                         cls});
    std::ranges::copy(p.vector, table.features.row(i).begin());
  }
  return build_individual(table, k, scales, metric);
}

Hypergraph build_group_union(std::span<const GroupPrototype> prototypes, std::size_t k,
                             const TemporalScales& scales, Metric metric) {
  if (prototypes.empty()) throw ContractError("build_group_union: no prototypes");
  std::map<int, std::vector<GroupPrototype>> by_class;
  for (const auto& p : prototypes) by_class[p.cls].push_back(p);

  Hypergraph out;
  std::vector<DenseMatrix> feature_parts;
  for (const auto& [cls, protos] : by_class) {
    Hypergraph part = build_group(protos, k, scales, metric);
    const std::size_t offset = out.vertices.size();
    out.vertices.insert(out.vertices.end(), part.vertices.begin(), part.vertices.end());
    for (Hyperedge& e : part.edges) {
      e.anchor += offset;
      for (auto& v : e.members) v += offset;
      out.edges.push_back(std::move(e));
    }
    feature_parts.push_back(std::move(part.features));
  }
  out.features = concat_rows(feature_parts);
  return out;
}

}  // namespace hydg
