#include "hydg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hydg/error.hpp"
#include "hydg/log.hpp"

namespace hydg {
namespace {

constexpr std::size_t kNoRow = std::numeric_limits<std::size_t>::max();

struct Bound {
  std::span<const Var> backbone;
  std::span<const Var> individual;
  std::span<const Var> group;
  Var head;
  Var bias;
};

Bound bind_handles(std::span<const Var> h, const ModelParams& layout) {
  const std::size_t nb = layout.backbone.weights.size();
  const std::size_t ni = layout.individual.theta.size();
  const std::size_t ng = layout.group.theta.size();
  if (h.size() != nb + ni + ng + 2) throw ShapeError("parameter handle count does not match model");
  return {h.subspan(0, nb), h.subspan(nb, ni), h.subspan(nb + ni, ng), h[nb + ni + ng],
          h[nb + ni + ng + 1]};
}

Var classify(Var z, Var head, Var bias) { return ag::add_row_bias(ag::matmul(z, head), bias); }

DenseMatrix classify(const DenseMatrix& z, const ModelParams& p) {
  DenseMatrix logits = matmul(z, p.head);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += p.head_bias(0, c);
  }
  return logits;
}

std::vector<int> argmax_rows(const DenseMatrix& m) {
  std::vector<int> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

void require_labels(const DynamicGraph& g, const SplitSpec& split) {
  for (std::size_t t : split.train_slices()) {
    const auto& s = g.snapshot(t);
    for (std::size_t i = 0; i < g.nodes(); ++i) {
      if (s.presence[i] && s.labels[i] != kUnknownLabel) return;
    }
  }
  throw ContractError("train: no labelled vertex in the train slices");
}

void check_finite(const EpochLoss& l, std::size_t epoch) {
  if (!std::isfinite(l.total)) {
    throw NumericError("training diverged at epoch " + std::to_string(epoch + 1) +
                       " (loss=" + std::to_string(l.total) + ")");
  }
}

Prediction classify_all(const VertexTable& vt, const DenseMatrix& z, const ModelParams& p) {
  Prediction out;
  out.vertices = vt.ids;
  out.probabilities = softmax_rows(classify(z, p));
  out.predicted = argmax_rows(out.probabilities);
  return out;
}

}  // namespace

std::string_view name(Ablation a) {
  switch (a) {
    case Ablation::full:
      return "full";
    case Ablation::individual_only:
      return "individual_only";
    case Ablation::group_only:
      return "group_only";
  }
  return "?";
}

Ablation parse_ablation(std::string_view text) {
  if (text == "full") return Ablation::full;
  if (text == "individual_only") return Ablation::individual_only;
  if (text == "group_only") return Ablation::group_only;
  throw ParameterError("unknown ablation '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ParameterError(field + ": " + why);
  };
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail("alpha", "must be a finite value >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) fail("beta", "must be a finite value >= 0");
  if (!(alpha + beta > 0.0)) fail("alpha,beta", "alpha + beta must be positive");
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr", "must be positive");
  if (hidden < 1) fail("hidden", "must be >= 1");
  if (m_clusters < 1) fail("m_clusters", "must be >= 1");
  if (rebuild_every < 1) fail("rebuild_every", "must be >= 1");
  auto check_scales = [&](const std::optional<TemporalScales>& s, const std::string& field) {
    if (s && !(s->short_term <= s->mid_term && s->mid_term <= s->long_term)) {
      fail(field, "must satisfy short <= mid <= long");
    }
  };
  check_scales(scales, "tau");
  check_scales(group_scales, "group_tau");
  if (ablation == Ablation::individual_only && alpha == 0.0) {
    fail("alpha", "individual_only ablation needs alpha > 0");
  }
  if (ablation == Ablation::group_only && beta == 0.0) {
    fail("beta", "group_only ablation needs beta > 0");
  }
}

TemporalScales TrainConfig::individual_scales(std::size_t slices) const {
  return scales.value_or(default_scales(slices));
}

TemporalScales TrainConfig::group_scales_for(std::size_t slices) const {
  return group_scales.value_or(individual_scales(slices));
}

std::vector<DenseMatrix> ModelParams::flatten() const {
  std::vector<DenseMatrix> out = backbone.weights;
  out.insert(out.end(), individual.theta.begin(), individual.theta.end());
  out.insert(out.end(), group.theta.begin(), group.theta.end());
  out.push_back(head);
  out.push_back(head_bias);
  return out;
}

ModelParams ModelParams::with_values(std::span<const DenseMatrix> values) const {
  const std::size_t nb = backbone.weights.size();
  const std::size_t ni = individual.theta.size();
  const std::size_t ng = group.theta.size();
  if (values.size() != nb + ni + ng + 2) throw ShapeError("with_values: wrong tensor count");
  ModelParams p;
  p.backbone.kind = backbone.kind;
  p.backbone.weights.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(nb));
  p.individual.theta.assign(values.begin() + static_cast<std::ptrdiff_t>(nb),
                            values.begin() + static_cast<std::ptrdiff_t>(nb + ni));
  p.group.theta.assign(values.begin() + static_cast<std::ptrdiff_t>(nb + ni),
                       values.begin() + static_cast<std::ptrdiff_t>(nb + ni + ng));
  p.head = values[nb + ni + ng];
  p.head_bias = values[nb + ni + ng + 1];
  check_same_shapes(p, *this);
  return p;
}

ModelParams init_model(const TrainConfig& config, std::size_t input_dim, std::size_t classes) {
  const Rng root(config.seed);
  Rng backbone_rng = root.substream("init/backbone");
  Rng individual_rng = root.substream("init/individual");
  Rng group_rng = root.substream("init/group");
  Rng head_rng = root.substream("init/head");
  ModelParams p;
  p.backbone = init_backbone(config.backbone, input_dim, config.hidden, backbone_rng);
  p.individual = init_hgnn(config.hidden, config.layers, individual_rng);
  p.group = init_hgnn(config.hidden, config.layers, group_rng);
  p.head = glorot_uniform(config.hidden, classes, head_rng);
  p.head_bias = DenseMatrix(1, classes);
  return p;
}

Var individual_loss(Var logits, std::span<const int> labels) {
  return ag::cross_entropy(logits, labels);
}

Var group_loss(Var logits, std::span<const int> classes) {
  if (logits.rows() == 0) {
    warn("group loss: no prototypes, group term is 0");
    return logits.tape()->constant(DenseMatrix(1, 1));
  }
  return ag::cross_entropy(logits, classes);
}

Var total_loss(Var l_in, Var l_group, double alpha, double beta) {
  return ag::add(ag::scale(l_in, alpha), ag::scale(l_group, beta));
}

double total_loss(double l_in, double l_group, double alpha, double beta) {
  return alpha * l_in + beta * l_group;
}

// ---------------------------------------------------------------------------

Objective::Objective(const DynamicGraph& g, const SplitSpec& split, TrainConfig config)
    : graph_(mask_test_labels(g, split)),
      split_(split),
      config_(std::move(config)),
      train_slices_(split.train_slices()) {
  config_.validate();
  ops_ = build_slice_operators(graph_);
  std::size_t rows = 0;
  for (std::size_t t : train_slices_) {
    const SnapshotGraph& s = graph_.snapshot(t);
    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < graph_.nodes(); ++i) {
      if (!s.presence[i]) continue;
      present.push_back(i);
      vertex_labels_.push_back(s.labels[i]);
    }
    row_offset_.push_back(rows);
    rows += present.size();
    present_.push_back(std::move(present));
  }
}

void Objective::rebuild(const ModelParams& params, std::size_t epoch) {
  const EmbeddingTable table = embed_snapshots(graph_, params.backbone, train_slices_);
  const VertexTable vt = present_vertices(table);
  const std::size_t T = graph_.slices();

  if (config_.ablation != Ablation::group_only) {
    individual_ = build_individual(vt, config_.k, config_.individual_scales(T), config_.metric);
    individual_plan_ = make_plan(individual_, config_.prop, config_.metric);
  }
  if (config_.ablation == Ablation::individual_only) return;

  std::vector<std::vector<int>> labels;
  for (std::size_t t : train_slices_) labels.push_back(graph_.snapshot(t).labels);
  const std::uint64_t seed = Rng(config_.seed).substream("group").substream(epoch).next();
  prototypes_ = group_prototypes(table, labels, graph_.classes(), config_.m_clusters, config_.agg,
                                 seed);
  prototype_classes_.clear();
  prototype_source_.clear();
  prototype_mean_.reset();
  group_ = Hypergraph{};
  if (prototypes_.empty()) return;

  group_ = build_group_union(prototypes_, config_.group_neighbors(), config_.group_scales_for(T),
                             config_.metric);
  for (std::size_t p = 0; p < prototypes_.size(); ++p) {
    const GroupPrototype& gp = prototypes_[p];
    const VertexId expect{static_cast<std::int32_t>(gp.cluster),
                          static_cast<std::int32_t>(gp.slice), gp.cls};
    if (group_.vertices[p] != expect) throw ContractError("group vertex order diverged");
    prototype_classes_.push_back(gp.cls);
  }
  group_plan_ = make_plan(group_, config_.prop, config_.metric);

  // Row of (entry, node) inside the stacked train embeddings.
  auto row_of = [&](std::size_t slice, std::size_t node) {
    const auto entry = static_cast<std::size_t>(
        std::find(train_slices_.begin(), train_slices_.end(), slice) - train_slices_.begin());
    const auto& present = present_[entry];
    const auto it = std::lower_bound(present.begin(), present.end(), node);
    if (it == present.end() || *it != node) return kNoRow;
    return row_offset_[entry] + static_cast<std::size_t>(it - present.begin());
  };

  const std::size_t h = vt.features.cols();
  if (config_.agg == Aggregation::avg) {
    std::vector<Triplet> t;
    for (std::size_t p = 0; p < prototypes_.size(); ++p) {
      const auto& members = prototypes_[p].members;
      const double w = 1.0 / static_cast<double>(members.size());
      for (std::size_t node : members) t.push_back({p, row_of(prototypes_[p].slice, node), w});
    }
    prototype_mean_ = std::make_shared<const SparseMatrix>(
        SparseMatrix::from_triplets(prototypes_.size(), vt.ids.size(), std::move(t)));
  } else {
    prototype_source_.assign(prototypes_.size() * h, 0);
    for (std::size_t p = 0; p < prototypes_.size(); ++p) {
      for (std::size_t c = 0; c < h; ++c) {
        std::size_t best = kNoRow;
        for (std::size_t node : prototypes_[p].members) {
          const std::size_t r = row_of(prototypes_[p].slice, node);
          if (best == kNoRow) {
            best = r;
            continue;
          }
          const double x = vt.features(r, c), b = vt.features(best, c);
          if (config_.agg == Aggregation::max ? x > b : x < b) best = r;
        }
        prototype_source_[p * h + c] = best;
      }
    }
  }
}

LossTerms Objective::loss(Tape& tape, std::span<const Var> handles,
                          const ModelParams& layout) const {
  const Bound b = bind_handles(handles, layout);
  std::vector<Var> parts;
  for (std::size_t s = 0; s < train_slices_.size(); ++s) {
    const std::size_t t = train_slices_[s];
    const Var feats = tape.constant(graph_.snapshot(t).features);
    const Var z = backbone_forward(layout.backbone.kind, ops_[t], feats, b.backbone);
    parts.push_back(ag::row_gather(z, present_[s]));
  }
  const Var z_all = ag::concat_rows(parts);

  LossTerms out;
  if (config_.ablation != Ablation::group_only) {
    if (individual_.vertices.size() != z_all.rows()) {
      throw ContractError("Objective::loss called before rebuild()");
    }
    const Var zi = propagate(individual_plan_, z_all, b.individual);
    out.individual = individual_loss(classify(zi, b.head, b.bias), vertex_labels_);
  }
  if (config_.ablation != Ablation::individual_only) {
    if (prototypes_.empty()) {
      out.group = group_loss(tape.constant(DenseMatrix(0, layout.head.cols())), {});
    } else {
      const Var z0 = config_.agg == Aggregation::avg
                         ? ag::spmm(prototype_mean_, z_all)
                         : ag::pick_by_column(z_all, prototypes_.size(), prototype_source_);
      const Var zg = propagate(group_plan_, z0, b.group);
      out.group = group_loss(classify(zg, b.head, b.bias), prototype_classes_);
    }
  }
  if (out.individual && out.group) {
    out.total = total_loss(*out.individual, *out.group, config_.alpha, config_.beta);
  } else if (out.individual) {
    out.total = ag::scale(*out.individual, config_.alpha);
  } else {
    out.total = ag::scale(*out.group, config_.beta);
  }
  return out;
}

// ---------------------------------------------------------------------------

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(std::span<DenseMatrix> params, std::span<const DenseMatrix> grads) {
  if (params.size() != grads.size()) throw ShapeError("Adam: params and grads differ in count");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.rows(), p.cols());
      v_.emplace_back(p.rows(), p.cols());
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].data();
    const auto g = grads[k].data();
    auto m = m_[k].data();
    auto v = v_[k].data();
    if (p.size() != g.size() || p.size() != m.size()) throw ShapeError("Adam: shape changed");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

std::vector<double> TrainResult::loss_curve() const {
  std::vector<double> out;
  out.reserve(history.size());
  for (const auto& h : history) out.push_back(h.total);
  return out;
}

TrainResult train(const DynamicGraph& g, const SplitSpec& split, const TrainConfig& config) {
  config.validate();
  require_labels(g, split);
  TrainResult result;
  result.params = init_model(config, g.attributes(), g.classes());
  Objective objective(g, split, config);
  Adam adam(config.lr);
  std::vector<DenseMatrix> values = result.params.flatten();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (epoch % config.rebuild_every == 0) objective.rebuild(result.params, epoch);
    Tape tape;
    std::vector<Var> handles;
    for (const auto& v : values) handles.push_back(tape.variable(v));
    const LossTerms terms = objective.loss(tape, handles, result.params);
    EpochLoss l;
    l.total = terms.total.value()(0, 0);
    l.individual = terms.individual ? terms.individual->value()(0, 0) : 0.0;
    l.group = terms.group ? terms.group->value()(0, 0) : 0.0;
    check_finite(l, epoch);
    tape.backward(terms.total);
    std::vector<DenseMatrix> grads;
    for (const Var& h : handles) grads.push_back(h.grad());
    adam.step(values, grads);
    result.params = result.params.with_values(values);
    result.history.push_back(l);
  }
  return result;
}

MetricsReport evaluate(const DynamicGraph& g, const SplitSpec& split, const Prediction& pred) {
  MetricsReport report;
  std::vector<int> all_pred, all_truth;
  std::vector<std::size_t> all_rows;
  for (std::size_t t : split.test_slices()) {
    std::vector<int> p, y;
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < pred.vertices.size(); ++r) {
      const VertexId& v = pred.vertices[r];
      if (static_cast<std::size_t>(v.slice) != t) continue;
      const int truth = g.snapshot(t).labels[static_cast<std::size_t>(v.node)];
      if (truth == kUnknownLabel) continue;
      p.push_back(pred.predicted[r]);
      y.push_back(truth);
      rows.push_back(r);
    }
    if (y.empty()) continue;
    SliceMetrics s;
    s.slice = t;
    s.evaluated = y.size();
    s.accuracy = accuracy(p, y);
    s.macro_auc = macro_auc(row_gather(pred.probabilities, rows), y);
    report.per_slice.push_back(s);
    all_pred.insert(all_pred.end(), p.begin(), p.end());
    all_truth.insert(all_truth.end(), y.begin(), y.end());
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());
  }
  report.evaluated = all_truth.size();
  if (all_truth.empty()) {
    warn("evaluate: no labelled test vertex; report is empty");
    report.accuracy = std::numeric_limits<double>::quiet_NaN();
    report.macro_auc = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  report.accuracy = accuracy(all_pred, all_truth);
  report.macro_auc = macro_auc(row_gather(pred.probabilities, all_rows), all_truth);
  return report;
}

PredictResult predict(const DynamicGraph& g, const SplitSpec& split, const ModelParams& params,
                      const TrainConfig& config) {
  config.validate();
  const DynamicGraph masked = mask_test_labels(g, split);
  const VertexTable vt = present_vertices(embed_snapshots(masked, params.backbone));
  const Hypergraph hg =
      build_individual(vt, config.k, config.individual_scales(g.slices()), config.metric);
  const HgnnParams& kernels =
      config.ablation == Ablation::group_only ? params.group : params.individual;
  const DenseMatrix z = propagate(make_plan(hg, config.prop, config.metric), vt.features, kernels);
  PredictResult out;
  out.prediction = classify_all(vt, z, params);
  out.report = evaluate(g, split, out.prediction);
  return out;
}

TrainResult train_baseline(const DynamicGraph& g, const SplitSpec& split,
                           const TrainConfig& config) {
  config.validate();
  require_labels(g, split);
  const DynamicGraph masked = mask_test_labels(g, split);
  const auto ops = build_slice_operators(masked);
  const auto slices = split.train_slices();
  std::vector<int> labels;
  std::vector<std::vector<std::size_t>> present(slices.size());
  for (std::size_t s = 0; s < slices.size(); ++s) {
    const auto& snap = masked.snapshot(slices[s]);
    for (std::size_t i = 0; i < g.nodes(); ++i) {
      if (!snap.presence[i]) continue;
      present[s].push_back(i);
      labels.push_back(snap.labels[i]);
    }
  }

  TrainResult result;
  result.params = init_model(config, g.attributes(), g.classes());
  Adam adam(config.lr);
  std::vector<DenseMatrix> values = result.params.flatten();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Tape tape;
    std::vector<Var> handles;
    for (const auto& v : values) handles.push_back(tape.variable(v));
    const Bound b = bind_handles(handles, result.params);
    std::vector<Var> parts;
    for (std::size_t s = 0; s < slices.size(); ++s) {
      const Var feats = tape.constant(masked.snapshot(slices[s]).features);
      const Var z = backbone_forward(result.params.backbone.kind, ops[slices[s]], feats,
                                     b.backbone);
      parts.push_back(ag::row_gather(z, present[s]));
    }
    const Var loss = individual_loss(classify(ag::concat_rows(parts), b.head, b.bias), labels);
    EpochLoss l;
    l.total = l.individual = loss.value()(0, 0);
    check_finite(l, epoch);
    tape.backward(loss);
    std::vector<DenseMatrix> grads;
    for (const Var& h : handles) grads.push_back(h.grad());
    adam.step(values, grads);
    result.params = result.params.with_values(values);
    result.history.push_back(l);
  }
  return result;
}

PredictResult predict_baseline(const DynamicGraph& g, const SplitSpec& split,
                               const ModelParams& params) {
  const DynamicGraph masked = mask_test_labels(g, split);
  const VertexTable vt = present_vertices(embed_snapshots(masked, params.backbone));
  PredictResult out;
  out.prediction = classify_all(vt, vt.features, params);
  out.report = evaluate(g, split, out.prediction);
  return out;
}

}  // namespace hydg
