#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fsu/numgrad/graph.hpp"

namespace fsu::numgrad {

// Builds a scalar loss from parameter leaves already added to `g`.
// Must be deterministic for a given set of parameter values.
using LossBuilder = std::function<Var(Graph& g, std::span<const Var> params)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
  double tolerance = 0.0;
  bool passed = false;
};

// Optional hook that perturbs the analytic gradients before comparison;
// used to confirm that the checker flags a broken backward pass.
using GradientTamper = std::function<void(std::vector<Tensor>& grads)>;

// Compares reverse-mode gradients against central differences
// (L(p+h) - L(p-h)) / 2h for every coordinate of every parameter.
// Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
GradCheckReport grad_check(const LossBuilder& build,
                           const std::vector<Tensor>& params, double h,
                           double tol, const GradientTamper& tamper = {});

// Analytic loss value and gradients for one parameter set.
double loss_and_grads(const LossBuilder& build,
                      const std::vector<Tensor>& params,
                      std::vector<Tensor>* grads);

}  // namespace fsu::numgrad
