#include "hydg/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "hydg/error.hpp"
#include "hydg/kernels.hpp"
#include "internal/parallel.hpp"

namespace hydg {
namespace {

struct Candidate {
  double dist;
  std::size_t dt;
  std::int32_t slice;
  std::int32_t node;
  std::size_t index;

  bool operator<(const Candidate& o) const {
    return std::tie(dist, dt, slice, node) < std::tie(o.dist, o.dt, o.slice, o.node);
  }
};

std::size_t slice_gap(std::int32_t a, std::int32_t b) {
  return static_cast<std::size_t>(a > b ? a - b : b - a);
}

// Every candidate within `max_tau` of the anchor, sorted by rank key.
std::vector<Candidate> ranked_candidates(const VertexTable& table, std::size_t anchor,
                                         std::size_t max_tau, Metric metric) {
  const VertexId& a = table.ids[anchor];
  const auto za = table.features.row(anchor);
  std::vector<Candidate> out;
  for (std::size_t j = 0; j < table.ids.size(); ++j) {
    const VertexId& v = table.ids[j];
    const std::size_t dt = slice_gap(a.slice, v.slice);
    if (dt == 0 || dt > max_tau) continue;
    out.push_back({rank_distance(metric, za, table.features.row(j)), dt, v.slice, v.node, j});
  }
  std::sort(out.begin(), out.end());
  return out;
}

Hyperedge take_first(const std::vector<Candidate>& ranked, std::size_t anchor, std::size_t k,
                     std::size_t tau, Scale scale) {
  Hyperedge e{anchor, {anchor}, scale};
  for (const Candidate& c : ranked) {
    if (e.members.size() == k + 1) break;
    if (c.dt <= tau) e.members.push_back(c.index);
  }
  return e;
}

void check_table(const VertexTable& table) {
  if (table.features.rows() != table.ids.size()) {
    throw ShapeError("vertex table: " + std::to_string(table.ids.size()) + " ids but " +
                     std::to_string(table.features.rows()) + " feature rows");
  }
}

}  // namespace

std::string to_string(const VertexId& v) {
  std::string s;
  if (v.is_group()) {
    s = "c" + std::to_string(v.group_class) + "m" + std::to_string(v.node);
  } else {
    s = "v" + std::to_string(v.node);
  }
  return s + "@" + std::to_string(v.slice);
}

std::string_view name(Scale s) {
  switch (s) {
    case Scale::short_term:
      return "short";
    case Scale::mid_term:
      return "mid";
    case Scale::long_term:
      return "long";
  }
  return "?";
}

std::size_t TemporalScales::operator[](Scale s) const noexcept {
  switch (s) {
    case Scale::short_term:
      return short_term;
    case Scale::mid_term:
      return mid_term;
    case Scale::long_term:
      return long_term;
  }
  return 0;
}

TemporalScales default_scales(std::size_t slices) {
  const std::size_t cap = slices == 0 ? 0 : slices - 1;
  return {std::min<std::size_t>(1, cap), std::min((slices + 2) / 3, cap), cap};
}

std::string_view name(Metric m) {
  switch (m) {
    case Metric::euclidean:
      return "euclidean";
    case Metric::cosine:
      return "cosine";
    case Metric::chebyshev:
      return "chebyshev";
  }
  return "?";
}

Metric parse_metric(std::string_view text) {
  if (text == "euclidean") return Metric::euclidean;
  if (text == "cosine") return Metric::cosine;
  if (text == "chebyshev") return Metric::chebyshev;
  throw ParameterError("unknown metric '" + std::string(text) + "'");
}

double rank_distance(Metric m, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("distance between vectors of different length");
  switch (m) {
    case Metric::euclidean:
      return kernels::squared_l2(a, b);
    case Metric::chebyshev:
      return kernels::max_abs_diff(a, b);
    case Metric::cosine: {
      const double na = kernels::dot(a, a);
      const double nb = kernels::dot(b, b);
      if (na == 0.0 || nb == 0.0) return 1.0;
      return 1.0 - kernels::dot(a, b) / std::sqrt(na * nb);
    }
  }
  return 0.0;
}

double metric_distance(Metric m, std::span<const double> a, std::span<const double> b) {
  const double r = rank_distance(m, a, b);
  return m == Metric::euclidean ? std::sqrt(r) : r;
}

VertexTable present_vertices(const EmbeddingTable& table) {
  VertexTable out;
  std::size_t count = 0;
  std::size_t dim = 0;
  for (std::size_t e = 0; e < table.z.size(); ++e) {
    count += static_cast<std::size_t>(std::count(table.presence[e].begin(),
                                                 table.presence[e].end(), true));
    dim = table.z[e].cols();
  }
  out.ids.reserve(count);
  out.features = DenseMatrix(count, dim);
  std::size_t r = 0;
  for (std::size_t e = 0; e < table.z.size(); ++e) {
    for (std::size_t i = 0; i < table.z[e].rows(); ++i) {
      if (!table.presence[e][i]) continue;
      out.ids.push_back({static_cast<std::int32_t>(i), static_cast<std::int32_t>(table.slice_ids[e]),
                         -1});
      std::ranges::copy(table.z[e].row(i), out.features.row(r).begin());
      ++r;
    }
  }
  return out;
}

Hyperedge knn_temporal(const VertexTable& table, std::size_t anchor, std::size_t k,
                       std::size_t tau, Metric metric, Scale scale) {
  check_table(table);
  if (anchor >= table.ids.size()) {
    throw ContractError("knn_temporal: anchor " + std::to_string(anchor) +
                        " is not a present vertex");
  }
  return take_first(ranked_candidates(table, anchor, tau, metric), anchor, k, tau, scale);
}

Hypergraph build_individual(const VertexTable& table, std::size_t k, const TemporalScales& scales,
                            Metric metric) {
  check_table(table);
  if (!(scales.short_term <= scales.mid_term && scales.mid_term <= scales.long_term)) {
    throw ParameterError("tau scales must satisfy short <= mid <= long (got " +
                         std::to_string(scales.short_term) + "," +
                         std::to_string(scales.mid_term) + "," +
                         std::to_string(scales.long_term) + ")");
  }
  const std::size_t n = table.ids.size();
  Hypergraph hg;
  hg.vertices = table.ids;
  hg.features = table.features;
  hg.edges.resize(3 * n);
  detail::parallel_for(n, [&](std::size_t a) {
    const auto ranked = ranked_candidates(table, a, scales.long_term, metric);
    for (std::size_t s = 0; s < 3; ++s) {
      hg.edges[3 * a + s] = take_first(ranked, a, k, scales[kScales[s]], kScales[s]);
    }
  });
  return hg;
}

Hypergraph build_individual(const EmbeddingTable& table, std::size_t k,
                            const TemporalScales& scales, Metric metric) {
  return build_individual(present_vertices(table), k, scales, metric);
}

std::string dump(const Hypergraph& hg) {
  std::ostringstream out;
  for (const Hyperedge& e : hg.edges) {
    out << name(e.scale) << ' ' << to_string(hg.vertices[e.anchor]) << ':';
    for (std::size_t i = 1; i < e.members.size(); ++i) {
      out << ' ' << to_string(hg.vertices[e.members[i]]);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace hydg
