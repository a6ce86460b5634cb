#include "hydg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "hydg/error.hpp"
#include "hydg/log.hpp"

namespace hydg {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw ShapeError("accuracy: length mismatch");
  if (truth.empty()) throw ContractError("accuracy: nothing to evaluate");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

double class_auc(std::span<const double> scores, std::span<const int> truth, int cls) {
  if (scores.size() != truth.size()) throw ShapeError("class_auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Sum of 1-based mid-ranks of the positives.
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (truth[order[k]] == cls) {
        rank_sum += mid;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::numeric_limits<double>::quiet_NaN();
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double macro_auc(const DenseMatrix& probs, std::span<const int> truth) {
  if (truth.empty()) throw ContractError("macro_auc: nothing to evaluate");
  if (probs.rows() != truth.size()) throw ShapeError("macro_auc: score rows != labels");
  std::vector<double> column(probs.rows());
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < probs.cols(); ++c) {
    for (std::size_t i = 0; i < probs.rows(); ++i) column[i] = probs(i, c);
    const double auc = class_auc(column, truth, static_cast<int>(c));
    if (std::isnan(auc)) {
      warn("macro_auc: class " + std::to_string(c) + " has no positives or no negatives; skipped");
      continue;
    }
    total += auc;
    ++used;
  }
  if (used == 0) return std::numeric_limits<double>::quiet_NaN();
  return total / static_cast<double>(used);
}

std::string format_metrics_csv(const MetricsReport& r) {
  std::string out = "slice,evaluated,accuracy,macro_auc\n";
  for (const auto& s : r.per_slice) {
    out += std::to_string(s.slice) + "," + std::to_string(s.evaluated) + "," + fmt(s.accuracy) +
           "," + fmt(s.macro_auc) + "\n";
  }
  out += "all," + std::to_string(r.evaluated) + "," + fmt(r.accuracy) + "," + fmt(r.macro_auc) +
         "\n";
  return out;
}

std::string format_loss_csv(std::span<const double> losses) {
  std::string out = "epoch,train_loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e) {
    out += std::to_string(e + 1) + "," + fmt(losses[e]) + "\n";
  }
  return out;
}

}  // namespace hydg
