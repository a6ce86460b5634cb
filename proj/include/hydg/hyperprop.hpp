#pragma once

// Hypergraph propagation: incidence/degree bookkeeping, the normalised
// spectral layer, and weighted edge messages with cosine attention.

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "hydg/hypergraph.hpp"
#include "hydg/matrix.hpp"
#include "hydg/rng.hpp"
#include "hydg/tape.hpp"

namespace hydg {

struct IncidenceMatrix {
  SparseMatrix h;                     // |V| x |E|, H(v, e) = 1 iff v in e
  std::vector<double> edge_weight;    // diagonal of W
  std::vector<double> vertex_degree;  // row sums of H diag(W)
  std::vector<double> edge_degree;    // column sums of H
};

// Empty `edge_weights` means W = I. Throws ContractError for a member index
// outside the vertex list.
IncidenceMatrix incidence(const Hypergraph& hg, std::span<const double> edge_weights = {});

// Median distance over every (anchor, non-anchor member) pair, floored at
// 1e-8. Throws ContractError when no edge has a second member.
double sigma_bandwidth(const Hypergraph& hg, Metric metric);

inline constexpr double kSigmaFloor = 1e-8;

double gaussian_weight(double distance, double sigma);

struct PairWeightTable {
  double sigma = 0.0;
  // weights[e][i]: weight between edge e's anchor and members[i]; the anchor's
  // own entry is 1.
  std::vector<std::vector<double>> weights;
};

PairWeightTable pair_weights(const Hypergraph& hg, Metric metric, double sigma);

// D_v^-1/2 H W D_e^-1 H^T D_v^-1/2. With identity_bypass, a vertex in no edge
// gets a unit diagonal entry; otherwise its row is empty.
SparseMatrix spectral_operator(const IncidenceMatrix& inc, bool identity_bypass = true);

// relu(spectral_operator(inc) z theta).
DenseMatrix hgnn_spectral_layer(const IncidenceMatrix& inc, const DenseMatrix& z,
                                const DenseMatrix& theta, bool identity_bypass = true);

// Sum over members j != receiver of weights[i] * z_prev[j], where weights is
// aligned with edge.members. Throws ContractError if receiver is not a member.
std::vector<double> edge_message(std::size_t receiver, const Hyperedge& edge,
                                 const DenseMatrix& z_prev, std::span<const double> weights);

// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Softmax of similarity scores.
std::vector<double> attention_weights(std::span<const double> scores);

struct AttentionResult {
  std::vector<double> output;
  std::vector<double> weights;
};

// Softmax over cosine(anchor, message_k); output is the weighted message sum.
// `messages` holds one message per row. Throws ContractError when empty.
AttentionResult attention_aggregate(std::span<const double> anchor, const DenseMatrix& messages);

// Fixed message topology for one hypergraph. Each receiver gets one message
// per edge that contains it and has another member; message rows are
// weighted sums gather * Z with Gaussian weights relative to the receiver.
struct MessagePlan {
  std::shared_ptr<const SparseMatrix> gather;  // R x |V|
  std::vector<std::size_t> offsets;            // |V| + 1
  double sigma = 0.0;

  std::size_t vertices() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

// Weights are computed from hg.features. Hypergraphs with no multi-member
// edge yield a plan without messages.
MessagePlan message_plan(const Hypergraph& hg, Metric metric);

// Attention over each receiver's messages; receivers with none pass z through.
DenseMatrix aggregate_messages(const MessagePlan& plan, const DenseMatrix& z);

enum class PropMode { message, spectral };

std::string_view name(PropMode m);
PropMode parse_prop_mode(std::string_view text);

struct HgnnParams {
  std::vector<DenseMatrix> theta;  // one h x h kernel per layer
};

HgnnParams init_hgnn(std::size_t hidden, std::size_t layers, Rng& rng);

struct PropagationPlan {
  PropMode mode = PropMode::message;
  MessagePlan messages;
  std::shared_ptr<const SparseMatrix> spectral;
};

PropagationPlan make_plan(const Hypergraph& hg, PropMode mode, Metric metric);

// One round per theta: relu(aggregate(z) theta).
DenseMatrix propagate(const PropagationPlan& plan, const DenseMatrix& z, const HgnnParams& params);
DenseMatrix propagate(const Hypergraph& hg, const HgnnParams& params,
                      PropMode mode = PropMode::message, Metric metric = Metric::euclidean);

namespace ag {
// Differentiable attention aggregation over plan.gather * z.
Var aggregate_messages(const MessagePlan& plan, Var z);
}  // namespace ag

Var propagate(const PropagationPlan& plan, Var z, std::span<const Var> theta);

}  // namespace hydg
