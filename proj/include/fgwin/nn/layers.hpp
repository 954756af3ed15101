#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fgwin/nn/params.hpp"
#include "fgwin/rng.hpp"
#include "fgwin/tensor.hpp"

namespace fgwin::nn {

/// y = x W + b over the last axis; W is [in x out].
struct Linear {
  std::size_t in = 0;
  std::size_t out = 0;
  ParamSet::Index weight = 0;
  ParamSet::Index bias = 0;

  static Linear create(ParamSet& params, const std::string& name, std::size_t in, std::size_t out,
                       SeededRng& rng);

  Tensor forward(const ParamSet& params, const Tensor& x) const;
  /// Accumulates dW and db; returns dL/dx.
  Tensor backward(ParamSet& params, const Tensor& x, const Tensor& grad_y) const;
};

/// Normalizes over the last axis, then applies a learned scale and shift.
struct LayerNorm {
  struct Cache {
    Tensor normalized;
    std::vector<double> inv_std;
  };

  std::size_t dim = 0;
  double eps = 1e-5;
  ParamSet::Index scale = 0;
  ParamSet::Index shift = 0;

  static LayerNorm create(ParamSet& params, const std::string& name, std::size_t dim);

  Tensor forward(const ParamSet& params, const Tensor& x, Cache* cache) const;
  Tensor backward(ParamSet& params, const Cache& cache, const Tensor& grad_y) const;
};

/// Per-element multipliers applied by a dropout call: 0 for dropped
/// elements, 1/(1-p) for survivors. Empty when dropout was an identity.
struct DropoutMask {
  Tensor scale;
  bool active() const noexcept { return !scale.empty(); }
};

/// Inverted dropout. Identity when `training` is false or p == 0.
/// Throws ParameterError unless p is in [0, 1).
Tensor dropout(const Tensor& x, double p, SeededRng* rng, bool training, DropoutMask* mask = nullptr);
Tensor dropout_backward(const DropoutMask& mask, const Tensor& grad_y);

/// Mean of x [B x T x d] over mask-true timesteps -> [B x d]. A row with no
/// valid step raises DataError.
Tensor masked_mean_pool(const Tensor& x, const Mask& mask);
Tensor masked_mean_pool_backward(const Mask& mask, const Tensor& grad_y, std::size_t steps);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad_y);

/// Sinusoidal table: PE[pos, 2i] = sin(pos / 10000^(2i/d)),
/// PE[pos, 2i+1] = cos(pos / 10000^(2i/d)). d must be even.
Tensor positional_encoding(std::size_t max_positions, std::size_t d_model);

}  // namespace fgwin::nn
