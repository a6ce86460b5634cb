#pragma once

// Joint training of backbone, hypergraph kernels and classifier head, plus
// inference, the backbone-only baseline and parameter persistence.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hydg/backbone.hpp"
#include "hydg/dyngraph.hpp"
#include "hydg/hypergraph.hpp"
#include "hydg/hyperprop.hpp"
#include "hydg/metrics.hpp"
#include "hydg/tape.hpp"

namespace hydg {

enum class Ablation { full, individual_only, group_only };

std::string_view name(Ablation a);
Ablation parse_ablation(std::string_view text);

struct TrainConfig {
  std::size_t k = 5;
  std::optional<TemporalScales> scales;  // unset: default_scales(T)
  std::optional<std::size_t> group_k;    // unset: k
  std::optional<TemporalScales> group_scales;  // unset: scales
  std::size_t m_clusters = 4;
  Aggregation agg = Aggregation::avg;
  Metric metric = Metric::euclidean;
  double alpha = 1.0;
  double beta = 0.5;
  double lr = 0.01;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  std::size_t hidden = 64;
  std::size_t layers = 1;
  std::size_t rebuild_every = 1;
  BackboneKind backbone = BackboneKind::gcn;
  PropMode prop = PropMode::message;
  Ablation ablation = Ablation::full;

  // Throws ParameterError naming the offending field.
  void validate() const;

  TemporalScales individual_scales(std::size_t slices) const;
  TemporalScales group_scales_for(std::size_t slices) const;
  std::size_t group_neighbors() const { return group_k.value_or(k); }
};

struct ModelParams {
  BackboneParams backbone;
  HgnnParams individual;
  HgnnParams group;
  DenseMatrix head;       // h x C
  DenseMatrix head_bias;  // 1 x C

  // Backbone weights, individual kernels, group kernels, head, bias.
  std::vector<DenseMatrix> flatten() const;
  // Inverse of flatten using this object's layout.
  ModelParams with_values(std::span<const DenseMatrix> values) const;

  bool operator==(const ModelParams& o) const { return flatten() == o.flatten(); }
};

ModelParams init_model(const TrainConfig& config, std::size_t input_dim, std::size_t classes);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Mean per-vertex cross-entropy over labelled rows. ContractError if none.
Var individual_loss(Var logits, std::span<const int> labels);
// Mean cross-entropy of prototype logits against their classes. An empty
// prototype set gives a constant 0 and a warning.
Var group_loss(Var logits, std::span<const int> classes);
Var total_loss(Var l_in, Var l_group, double alpha, double beta);
double total_loss(double l_in, double l_group, double alpha, double beta);

// ---------------------------------------------------------------------------
// Objective with a fixed hypergraph topology
// ---------------------------------------------------------------------------

struct LossTerms {
  Var total;
  std::optional<Var> individual;
  std::optional<Var> group;
};

// Training objective over the train slices of one split. rebuild() freezes
// hypergraphs, pair weights and prototype membership from the current
// (detached) embeddings; loss() is then differentiable in every parameter.
class Objective {
 public:
  Objective(const DynamicGraph& g, const SplitSpec& split, TrainConfig config);

  void rebuild(const ModelParams& params, std::size_t epoch);
  // `handles` are bound in ModelParams::flatten order; `layout` supplies shapes.
  LossTerms loss(Tape& tape, std::span<const Var> handles, const ModelParams& layout) const;

  const Hypergraph& individual_graph() const { return individual_; }
  const Hypergraph& group_graph() const { return group_; }
  const std::vector<GroupPrototype>& prototypes() const { return prototypes_; }

 private:
  DynamicGraph graph_;
  SplitSpec split_;
  TrainConfig config_;
  std::vector<std::size_t> train_slices_;
  std::vector<SliceOperators> ops_;
  std::vector<std::vector<std::size_t>> present_;  // per train slice
  std::vector<std::size_t> row_offset_;            // first vertex row of each train slice
  std::vector<int> vertex_labels_;

  Hypergraph individual_;
  PropagationPlan individual_plan_;
  std::vector<GroupPrototype> prototypes_;
  std::shared_ptr<const SparseMatrix> prototype_mean_;  // avg aggregation
  std::vector<std::size_t> prototype_source_;           // max/min aggregation
  std::vector<int> prototype_classes_;
  Hypergraph group_;
  PropagationPlan group_plan_;
};

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<DenseMatrix> params, std::span<const DenseMatrix> grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<DenseMatrix> m_, v_;
};

struct EpochLoss {
  double total = 0.0;
  double individual = 0.0;
  double group = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLoss> history;

  std::vector<double> loss_curve() const;
};

// Throws NumericError naming the epoch when the loss stops being finite.
TrainResult train(const DynamicGraph& g, const SplitSpec& split, const TrainConfig& config);

struct Prediction {
  std::vector<VertexId> vertices;  // every present (node, slice)
  DenseMatrix probabilities;       // |V| x C
  std::vector<int> predicted;
};

struct PredictResult {
  Prediction prediction;
  MetricsReport report;
};

// Embeds every slice, builds one individual hypergraph over all present
// vertices and classifies them. Metrics cover labelled test-slice vertices.
// Test labels are masked before inference and only read for scoring.
PredictResult predict(const DynamicGraph& g, const SplitSpec& split, const ModelParams& params,
                      const TrainConfig& config);

// Scores `prediction` against the labels of g's test slices.
MetricsReport evaluate(const DynamicGraph& g, const SplitSpec& split, const Prediction& prediction);

// ---------------------------------------------------------------------------
// Backbone-only baseline: per-slice GNN and the same head, no hypergraphs.
// ---------------------------------------------------------------------------

TrainResult train_baseline(const DynamicGraph& g, const SplitSpec& split,
                           const TrainConfig& config);
PredictResult predict_baseline(const DynamicGraph& g, const SplitSpec& split,
                               const ModelParams& params);

// ---------------------------------------------------------------------------
// Persistence: "HYDGPRM1" magic, format version, shape manifest, raw doubles.
// ---------------------------------------------------------------------------

void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);
// Throws SchemaError unless `params` has exactly the shapes of `expected`.
void check_same_shapes(const ModelParams& params, const ModelParams& expected);

}  // namespace hydg
