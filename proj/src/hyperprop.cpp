#include "hydg/hyperprop.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hydg/error.hpp"
#include "hydg/kernels.hpp"

namespace hydg {
namespace {

void check_members(const Hypergraph& hg) {
  for (std::size_t e = 0; e < hg.edges.size(); ++e) {
    for (std::size_t v : hg.edges[e].members) {
      if (v >= hg.vertices.size()) {
        throw ContractError("hyperedge " + std::to_string(e) + " references vertex " +
                            std::to_string(v) + " of " + std::to_string(hg.vertices.size()));
      }
    }
  }
}

double norm(std::span<const double> x) { return std::sqrt(kernels::dot(x, x)); }

// Forward pass of the attention aggregation for one receiver. Writes the
// softmax weights and cosine scores of its messages into alpha / sims.
void attend(std::span<const double> z, const DenseMatrix& msgs, std::size_t lo, std::size_t hi,
            std::vector<double>& sims, std::vector<double>& alpha, std::span<double> out) {
  sims.resize(hi - lo);
  for (std::size_t k = lo; k < hi; ++k) sims[k - lo] = cosine_similarity(z, msgs.row(k));
  alpha = attention_weights(sims);
  std::ranges::fill(out, 0.0);
  for (std::size_t k = lo; k < hi; ++k) kernels::axpy(alpha[k - lo], msgs.row(k), out);
}

DenseMatrix aggregate_values(const std::vector<std::size_t>& offsets, const DenseMatrix& z,
                             const DenseMatrix& msgs) {
  DenseMatrix out(z.rows(), z.cols());
  std::vector<double> sims, alpha;
  for (std::size_t v = 0; v < z.rows(); ++v) {
    const std::size_t lo = offsets[v], hi = offsets[v + 1];
    if (lo == hi) {
      std::ranges::copy(z.row(v), out.row(v).begin());
    } else {
      attend(z.row(v), msgs, lo, hi, sims, alpha, out.row(v));
    }
  }
  return out;
}

void check_plan(const MessagePlan& plan, std::size_t rows) {
  if (plan.vertices() != rows) {
    throw ShapeError("message plan covers " + std::to_string(plan.vertices()) +
                     " vertices, embeddings have " + std::to_string(rows) + " rows");
  }
}

}  // namespace

IncidenceMatrix incidence(const Hypergraph& hg, std::span<const double> edge_weights) {
  check_members(hg);
  const std::size_t nv = hg.vertices.size();
  const std::size_t ne = hg.edges.size();
  if (!edge_weights.empty() && edge_weights.size() != ne) {
    throw ShapeError("incidence: one weight per edge expected");
  }
  IncidenceMatrix inc;
  inc.edge_weight.assign(ne, 1.0);
  if (!edge_weights.empty()) inc.edge_weight.assign(edge_weights.begin(), edge_weights.end());
  inc.vertex_degree.assign(nv, 0.0);
  inc.edge_degree.assign(ne, 0.0);

  std::vector<Triplet> t;
  for (std::size_t e = 0; e < ne; ++e) {
    std::vector<std::size_t> members = hg.edges[e].members;
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    for (std::size_t v : members) {
      t.push_back({v, e, 1.0});
      inc.vertex_degree[v] += inc.edge_weight[e];
    }
    inc.edge_degree[e] = static_cast<double>(members.size());
  }
  inc.h = SparseMatrix::from_triplets(nv, ne, std::move(t));
  return inc;
}

double sigma_bandwidth(const Hypergraph& hg, Metric metric) {
  check_members(hg);
  std::vector<double> d;
  for (const Hyperedge& e : hg.edges) {
    for (std::size_t i = 1; i < e.members.size(); ++i) {
      d.push_back(metric_distance(metric, hg.features.row(e.anchor),
                                  hg.features.row(e.members[i])));
    }
  }
  if (d.empty()) throw ContractError("sigma_bandwidth: no anchor-member pairs");
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double median = d[mid];
  if (d.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return std::max(median, kSigmaFloor);
}

double gaussian_weight(double distance, double sigma) {
  return std::exp(-(distance * distance) / (sigma * sigma));
}

PairWeightTable pair_weights(const Hypergraph& hg, Metric metric, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("pair_weights: sigma must be positive");
  check_members(hg);
  PairWeightTable out;
  out.sigma = sigma;
  out.weights.reserve(hg.edges.size());
  for (const Hyperedge& e : hg.edges) {
    std::vector<double> w(e.members.size(), 1.0);
    for (std::size_t i = 0; i < e.members.size(); ++i) {
      if (e.members[i] == e.anchor) continue;
      w[i] = gaussian_weight(
          metric_distance(metric, hg.features.row(e.anchor), hg.features.row(e.members[i])),
          sigma);
    }
    out.weights.push_back(std::move(w));
  }
  return out;
}

SparseMatrix spectral_operator(const IncidenceMatrix& inc, bool identity_bypass) {
  const std::size_t nv = inc.h.rows();
  std::vector<double> dv_inv_sqrt(nv, 0.0);
  for (std::size_t v = 0; v < nv; ++v) {
    if (inc.vertex_degree[v] > 0.0) dv_inv_sqrt[v] = 1.0 / std::sqrt(inc.vertex_degree[v]);
  }
  // Column-wise view: members of each edge.
  const SparseMatrix ht = inc.h.transposed();
  const auto rp = ht.row_ptr();
  const auto ci = ht.col_index();
  std::vector<Triplet> t;
  for (std::size_t e = 0; e < ht.rows(); ++e) {
    if (inc.edge_degree[e] == 0.0) continue;
    const double scale = inc.edge_weight[e] / inc.edge_degree[e];
    for (std::size_t a = rp[e]; a < rp[e + 1]; ++a) {
      for (std::size_t b = rp[e]; b < rp[e + 1]; ++b) {
        t.push_back({ci[a], ci[b], scale * dv_inv_sqrt[ci[a]] * dv_inv_sqrt[ci[b]]});
      }
    }
  }
  if (identity_bypass) {
    for (std::size_t v = 0; v < nv; ++v) {
      if (inc.vertex_degree[v] == 0.0) t.push_back({v, v, 1.0});
    }
  }
  return SparseMatrix::from_triplets(nv, nv, std::move(t));
}

DenseMatrix hgnn_spectral_layer(const IncidenceMatrix& inc, const DenseMatrix& z,
                                const DenseMatrix& theta, bool identity_bypass) {
  if (z.rows() != inc.h.rows()) {
    throw ShapeError("hgnn_spectral_layer: " + std::to_string(z.rows()) + " rows for " +
                     std::to_string(inc.h.rows()) + " vertices");
  }
  return relu(matmul(spmm(spectral_operator(inc, identity_bypass), z), theta));
}

std::vector<double> edge_message(std::size_t receiver, const Hyperedge& edge,
                                 const DenseMatrix& z_prev, std::span<const double> weights) {
  if (weights.size() != edge.members.size()) {
    throw ShapeError("edge_message: one weight per member expected");
  }
  if (std::ranges::find(edge.members, receiver) == edge.members.end()) {
    throw ContractError("edge_message: receiver " + std::to_string(receiver) +
                        " is not in the edge");
  }
  std::vector<double> p(z_prev.cols(), 0.0);
  for (std::size_t i = 0; i < edge.members.size(); ++i) {
    if (edge.members[i] == receiver) continue;
    kernels::axpy(weights[i], z_prev.row(edge.members[i]), p);
  }
  return p;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return kernels::dot(a, b) / (na * nb);
}

std::vector<double> attention_weights(std::span<const double> scores) {
  if (scores.empty()) return {};
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> w(scores.size());
  double total = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    w[k] = std::exp(scores[k] - top);
    total += w[k];
  }
  for (double& x : w) x /= total;
  return w;
}

AttentionResult attention_aggregate(std::span<const double> anchor, const DenseMatrix& messages) {
  if (messages.rows() == 0) throw ContractError("attention_aggregate: no messages");
  if (messages.cols() != anchor.size()) throw ShapeError("attention_aggregate: width mismatch");
  AttentionResult r;
  r.output.assign(anchor.size(), 0.0);
  std::vector<double> sims;
  attend(anchor, messages, 0, messages.rows(), sims, r.weights, r.output);
  return r;
}

MessagePlan message_plan(const Hypergraph& hg, Metric metric) {
  check_members(hg);
  const std::size_t nv = hg.vertices.size();
  if (hg.features.rows() != nv) throw ShapeError("message_plan: features do not match vertices");

  std::vector<std::vector<std::size_t>> edges_of(nv);
  bool any_pair = false;
  for (std::size_t e = 0; e < hg.edges.size(); ++e) {
    if (hg.edges[e].members.size() < 2) continue;
    any_pair = true;
    for (std::size_t v : hg.edges[e].members) edges_of[v].push_back(e);
  }

  MessagePlan plan;
  plan.sigma = any_pair ? sigma_bandwidth(hg, metric) : 0.0;
  plan.offsets.assign(nv + 1, 0);
  std::vector<Triplet> t;
  std::size_t r = 0;
  for (std::size_t v = 0; v < nv; ++v) {
    plan.offsets[v] = r;
    for (std::size_t e : edges_of[v]) {
      for (std::size_t j : hg.edges[e].members) {
        if (j == v) continue;
        const double d = metric_distance(metric, hg.features.row(v), hg.features.row(j));
        t.push_back({r, j, gaussian_weight(d, plan.sigma)});
      }
      ++r;
    }
  }
  plan.offsets[nv] = r;
  plan.gather = std::make_shared<const SparseMatrix>(SparseMatrix::from_triplets(r, nv, std::move(t)));
  return plan;
}

DenseMatrix aggregate_messages(const MessagePlan& plan, const DenseMatrix& z) {
  check_plan(plan, z.rows());
  return aggregate_values(plan.offsets, z, spmm(*plan.gather, z));
}

std::string_view name(PropMode m) { return m == PropMode::message ? "message" : "spectral"; }

PropMode parse_prop_mode(std::string_view text) {
  if (text == "message") return PropMode::message;
  if (text == "spectral") return PropMode::spectral;
  throw ParameterError("unknown propagation mode '" + std::string(text) + "'");
}

HgnnParams init_hgnn(std::size_t hidden, std::size_t layers, Rng& rng) {
  HgnnParams p;
  for (std::size_t l = 0; l < layers; ++l) p.theta.push_back(glorot_uniform(hidden, hidden, rng));
  return p;
}

PropagationPlan make_plan(const Hypergraph& hg, PropMode mode, Metric metric) {
  PropagationPlan plan;
  plan.mode = mode;
  if (mode == PropMode::message) {
    plan.messages = message_plan(hg, metric);
  } else {
    plan.spectral = std::make_shared<const SparseMatrix>(spectral_operator(incidence(hg)));
  }
  return plan;
}

DenseMatrix propagate(const PropagationPlan& plan, const DenseMatrix& z, const HgnnParams& params) {
  DenseMatrix cur = z;
  for (const DenseMatrix& theta : params.theta) {
    const DenseMatrix agg = plan.mode == PropMode::message ? aggregate_messages(plan.messages, cur)
                                                           : spmm(*plan.spectral, cur);
    cur = relu(matmul(agg, theta));
  }
  return cur;
}

DenseMatrix propagate(const Hypergraph& hg, const HgnnParams& params, PropMode mode,
                      Metric metric) {
  if (params.theta.empty()) return hg.features;
  return propagate(make_plan(hg, mode, metric), hg.features, params);
}

namespace ag {

Var aggregate_messages(const MessagePlan& plan, Var z) {
  check_plan(plan, z.rows());
  const Var msgs = ag::spmm(plan.gather, z);
  DenseMatrix out = aggregate_values(plan.offsets, z.value(), msgs.value());
  const Var parents[] = {z, msgs};
  return z.tape()->record(
      std::move(out), parents,
      [z, msgs, offsets = plan.offsets](Tape& tape, const DenseMatrix& up) {
        const DenseMatrix& zv = tape.value(z);
        const DenseMatrix& mv = tape.value(msgs);
        DenseMatrix* gz = tape.grad_slot(z);
        DenseMatrix* gm = tape.grad_slot(msgs);
        std::vector<double> sims, alpha, scratch(zv.cols());
        for (std::size_t v = 0; v < zv.rows(); ++v) {
          const auto g = up.row(v);
          const std::size_t lo = offsets[v], hi = offsets[v + 1];
          if (lo == hi) {
            if (gz != nullptr) kernels::axpy(1.0, g, gz->row(v));
            continue;
          }
          attend(zv.row(v), mv, lo, hi, sims, alpha, scratch);
          double mean = 0.0;
          std::vector<double> gdot(hi - lo);
          for (std::size_t k = lo; k < hi; ++k) {
            gdot[k - lo] = kernels::dot(g, mv.row(k));
            mean += alpha[k - lo] * gdot[k - lo];
          }
          const auto zr = zv.row(v);
          const double zn = norm(zr);
          for (std::size_t k = lo; k < hi; ++k) {
            const double a = alpha[k - lo];
            if (gm != nullptr) kernels::axpy(a, g, gm->row(k));
            const double mn = norm(mv.row(k));
            if (zn == 0.0 || mn == 0.0) continue;
            const double ds = a * (gdot[k - lo] - mean);
            const double s = sims[k - lo];
            if (gz != nullptr) {
              kernels::axpy(ds / (zn * mn), mv.row(k), gz->row(v));
              kernels::axpy(-ds * s / (zn * zn), zr, gz->row(v));
            }
            if (gm != nullptr) {
              kernels::axpy(ds / (zn * mn), zr, gm->row(k));
              kernels::axpy(-ds * s / (mn * mn), mv.row(k), gm->row(k));
            }
          }
        }
      });
}

}  // namespace ag

Var propagate(const PropagationPlan& plan, Var z, std::span<const Var> theta) {
  Var cur = z;
  for (const Var& t : theta) {
    const Var agg = plan.mode == PropMode::message ? ag::aggregate_messages(plan.messages, cur)
                                                   : ag::spmm(plan.spectral, cur);
    cur = ag::relu(ag::matmul(agg, t));
  }
  return cur;
}

}  // namespace hydg
