#include "fsu/numgrad/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace fsu::numgrad {

double loss_and_grads(const LossBuilder& build,
                      const std::vector<Tensor>& params,
                      std::vector<Tensor>* grads) {
  Graph g;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(g.param(p));
  const Var root = build(g, leaves);
  const double value = g.value(root).item();
  if (grads != nullptr) {
    g.backward(root);
    grads->clear();
    for (Var v : leaves) grads->push_back(g.grad(v));
  }
  return value;
}

GradCheckReport grad_check(const LossBuilder& build,
                           const std::vector<Tensor>& params, double h,
                           double tol, const GradientTamper& tamper) {
  if (!(h > 0.0)) throw usage_error("grad_check: step h must be positive");

  std::vector<Tensor> analytic;
  loss_and_grads(build, params, &analytic);
  if (tamper) tamper(analytic);

  GradCheckReport report;
  report.tolerance = tol;
  std::vector<Tensor> probe = params;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    for (std::size_t i = 0; i < probe[p].size(); ++i) {
      const double saved = probe[p][i];
      probe[p][i] = saved + h;
      const double up = loss_and_grads(build, probe, nullptr);
      probe[p][i] = saved - h;
      const double down = loss_and_grads(build, probe, nullptr);
      probe[p][i] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p][i];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coordinates;
      if (rel > report.max_rel_error || report.coordinates == 1) {
        report.max_rel_error = rel;
        report.worst_param = p;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace fsu::numgrad
