#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hydg/matrix.hpp"

namespace hydg {

// Exact-match rate. Throws ContractError on empty input, ShapeError on
// length mismatch.
double accuracy(std::span<const int> predicted, std::span<const int> truth);

// One-vs-rest rank AUC of `scores` for class `cls`; tied pairs count 0.5.
// NaN when truth has no positive or no negative for the class.
double class_auc(std::span<const double> scores, std::span<const int> truth, int cls);

// Unweighted mean of class_auc over the columns of `probs`. Classes missing
// from truth (or covering all of it) are skipped with a warning; NaN if every
// class is skipped.
double macro_auc(const DenseMatrix& probs, std::span<const int> truth);

struct SliceMetrics {
  std::size_t slice = 0;
  std::size_t evaluated = 0;
  double accuracy = 0.0;
  double macro_auc = 0.0;
};

struct MetricsReport {
  std::size_t evaluated = 0;
  double accuracy = 0.0;
  double macro_auc = 0.0;
  std::vector<SliceMetrics> per_slice;
  std::vector<double> loss_curve;
};

// "slice,evaluated,accuracy,macro_auc" rows (per slice, then "all"), values
// printed with 17 significant digits.
std::string format_metrics_csv(const MetricsReport& report);
// "epoch,train_loss" rows.
std::string format_loss_csv(std::span<const double> losses);

}  // namespace hydg
