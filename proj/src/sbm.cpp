#include <string>

#include "hydg/dyngraph.hpp"
#include "hydg/error.hpp"
#include "hydg/rng.hpp"

namespace hydg {

DynamicGraph generate_sbm(const SbmSpec& spec) {
  if (!(spec.p_out >= 0.0 && spec.p_out < spec.p_in && spec.p_in <= 1.0)) {
    throw ParameterError("generate_sbm: need 0 <= p_out < p_in <= 1");
  }
  if (!(spec.drift_rate >= 0.0 && spec.drift_rate <= 1.0)) {
    throw ParameterError("generate_sbm: drift_rate must lie in [0, 1]");
  }
  if (!(spec.feature_noise >= 0.0)) throw ParameterError("generate_sbm: feature_noise < 0");
  if (spec.nodes == 0 || spec.slices == 0 || spec.classes == 0 || spec.feature_dim == 0) {
    throw ParameterError("generate_sbm: n, T, C and feature_dim must be positive");
  }

  const Rng root(spec.seed);
  Rng blocks_rng = root.substream("sbm/blocks");
  const std::size_t n = spec.nodes;
  const std::size_t C = spec.classes;

  std::vector<int> block(n);
  for (auto& b : block) b = static_cast<int>(blocks_rng.index(C));

  std::vector<SnapshotGraph> snaps;
  snaps.reserve(spec.slices);
  for (std::size_t t = 0; t < spec.slices; ++t) {
    if (t > 0 && C > 1) {
      for (auto& b : block) {
        if (blocks_rng.bernoulli(spec.drift_rate)) {
          // Uniform over the other C-1 blocks.
          const auto shift = 1 + static_cast<int>(blocks_rng.index(C - 1));
          b = (b + shift) % static_cast<int>(C);
        }
      }
    }

    Rng edge_rng = root.substream("sbm/edges").substream(t);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = u + 1; v < n; ++v) {
        const double p = block[u] == block[v] ? spec.p_in : spec.p_out;
        if (edge_rng.bernoulli(p)) edges.emplace_back(u, v);
      }
    }

    Rng feat_rng = root.substream("sbm/features").substream(t);
    DenseMatrix features(n, spec.feature_dim);
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t j = 0; j < spec.feature_dim; ++j) {
        const double mean = (j % C) == static_cast<std::size_t>(block[u]) ? 1.0 : 0.0;
        features(u, j) =
            mean + (spec.feature_noise > 0.0 ? feat_rng.normal(0.0, spec.feature_noise) : 0.0);
      }
    }

    SnapshotGraph s;
    s.t = t;
    s.adjacency = adjacency_from_edges(n, edges);
    s.features = std::move(features);
    s.labels = block;
    s.presence.assign(n, true);
    snaps.push_back(std::move(s));
  }
  return DynamicGraph(n, spec.feature_dim, C, std::move(snaps));
}

}  // namespace hydg
