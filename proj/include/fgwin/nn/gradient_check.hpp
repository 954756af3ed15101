#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>

#include "fgwin/data.hpp"
#include "fgwin/nn/classifier.hpp"
#include "fgwin/nn/params.hpp"
#include "fgwin/tensor.hpp"

namespace fgwin::nn {

struct GradCheckOptions {
  double eps = 1e-5;
  // Denominator floor of the relative error. Central differences of an O(1)
  // loss carry ~1e-11 of rounding noise, so gradients below the floor (some
  // are exactly zero, e.g. attention key biases) are compared absolutely.
  double floor = 1e-4;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Relative error |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Compares the gradients left in `params` by `populate_grads` (which must
/// zero and then fill them) against central differences of `loss`,
/// (L(theta + eps) - L(theta - eps)) / 2 eps, one scalar at a time.
GradCheckResult gradient_check(ParamSet& params, const std::function<double()>& loss,
                               const std::function<void()>& populate_grads, const GradCheckOptions& options = {});

/// Scalar loss of a logit vector and its gradient.
using LogitLoss = std::function<std::pair<double, Tensor>(const Tensor& logits)>;

/// Whole-model check. Throws ContractError when the model is stochastic
/// (training mode with dropout), since finite differences need a
/// deterministic forward map.
GradCheckResult gradient_check(SequenceClassifier& model, const RoundBatch& batch, const LogitLoss& loss,
                               const GradCheckOptions& options = {});

}  // namespace fgwin::nn
