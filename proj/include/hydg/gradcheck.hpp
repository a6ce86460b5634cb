#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hydg/matrix.hpp"
#include "hydg/tape.hpp"

namespace hydg {

// Builds a scalar on `tape` from the tracked parameter handles.
using ScalarFunction = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_entry = 0;
  std::size_t entries_checked = 0;
};

// Compares tape gradients against central differences. The error of one
// entry is |analytic - numeric| / max(1, |numeric|); the report carries the
// maximum. Throws NumericError if any evaluation is non-finite.
GradCheckReport grad_check(const ScalarFunction& f, std::span<const DenseMatrix> params,
                           double eps = 1e-5);

// Value of f at params without recording gradients.
double evaluate(const ScalarFunction& f, std::span<const DenseMatrix> params);

}  // namespace hydg
