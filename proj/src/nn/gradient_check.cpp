#include "fgwin/nn/gradient_check.hpp"

#include <algorithm>
#include <cmath>

#include "fgwin/error.hpp"

namespace fgwin::nn {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult gradient_check(ParamSet& params, const std::function<double()>& loss,
                               const std::function<void()>& populate_grads, const GradCheckOptions& options) {
  populate_grads();
  GradCheckResult result;
  for (auto& p : params) {
    const Tensor analytic = p.grad;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + options.eps;
      const double up = loss();
      p.value[i] = saved - options.eps;
      const double down = loss();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double err = relative_error(analytic[i], numeric, options.floor);
      ++result.checked;
      if (err > result.max_rel_error || result.worst_parameter.empty()) {
        result.max_rel_error = std::max(err, result.max_rel_error);
        result.worst_parameter = p.name;
        result.worst_index = i;
        result.worst_analytic = analytic[i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

GradCheckResult gradient_check(SequenceClassifier& model, const RoundBatch& batch, const LogitLoss& loss,
                               const GradCheckOptions& options) {
  if (model.stochastic()) {
    throw ContractError("gradient check needs a deterministic model; switch off training mode or dropout");
  }
  auto eval = [&] { return loss(model.forward(batch, nullptr, false).logits).first; };
  auto populate = [&] {
    model.params().zero_grad();
    auto pass = model.forward(batch, nullptr, true);
    const auto [value, grad] = loss(pass.logits);
    model.backward(*pass.cache, grad);
  };
  return gradient_check(model.params(), eval, populate, options);
}

}  // namespace fgwin::nn
