#include "hydg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hydg/error.hpp"

namespace hydg {
namespace {

double checked(double v, const char* where) {
  if (!std::isfinite(v)) throw NumericError(std::string("grad_check: non-finite value at ") + where);
  return v;
}

}  // namespace

double evaluate(const ScalarFunction& f, std::span<const DenseMatrix> params) {
  Tape tape;
  std::vector<Var> handles;
  handles.reserve(params.size());
  for (const auto& p : params) handles.push_back(tape.constant(p));
  const Var out = f(tape, handles);
  if (out.rows() != 1 || out.cols() != 1) throw ContractError("grad_check: function is not scalar");
  return out.value()(0, 0);
}

GradCheckReport grad_check(const ScalarFunction& f, std::span<const DenseMatrix> params,
                           double eps) {
  Tape tape;
  std::vector<Var> handles;
  handles.reserve(params.size());
  for (const auto& p : params) handles.push_back(tape.variable(p));
  const Var loss = f(tape, handles);
  checked(loss.value()(0, 0), "base point");
  tape.backward(loss);

  GradCheckReport report;
  std::vector<DenseMatrix> probe(params.begin(), params.end());
  for (std::size_t p = 0; p < probe.size(); ++p) {
    const DenseMatrix& analytic = handles[p].grad();
    auto entries = probe[p].data();
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const double saved = entries[e];
      entries[e] = saved + eps;
      const double plus = checked(evaluate(f, probe), "+eps");
      entries[e] = saved - eps;
      const double minus = checked(evaluate(f, probe), "-eps");
      entries[e] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double err =
          std::fabs(analytic.data()[e] - numeric) / std::max(1.0, std::fabs(numeric));
      ++report.entries_checked;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_param = p;
        report.worst_entry = e;
      }
    }
  }
  return report;
}

}  // namespace hydg
