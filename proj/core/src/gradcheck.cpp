#include "moelab/gradcheck.hpp"

#include <cmath>

namespace moelab {

GradCheckReport check_gradient(const std::function<Value()>& loss_fn,
                               std::vector<Parameter>& params, double eps, double tol) {
  GradCheckReport report;
  report.tolerance = tol;

  for (auto& p : params) p.zero_grad();
  Value loss = loss_fn();
  loss.backward();

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad());

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = params[pi];
    GradCheckEntry entry;
    entry.param = p.name();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.tensor()[i];
      p.tensor()[i] = saved + eps;
      const double up = loss_fn().val().item();
      p.tensor()[i] = saved - eps;
      const double down = loss_fn().val().item();
      p.tensor()[i] = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double bp = analytic[pi][i];
      const double denom = std::max({std::fabs(fd), std::fabs(bp), 1e-6});
      const double rel = std::fabs(fd - bp) / denom;
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    entry.pass = entry.max_rel_err <= tol;
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace moelab
