#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fgwin/nn/params.hpp"
#include "fgwin/rng.hpp"
#include "fgwin/tensor.hpp"

namespace fgwin::nn {

/// Single-layer unidirectional LSTM. Gate blocks are laid out
/// [input | forget | cell candidate | output] along the 4*hidden axis.
///
///   z_t = x_t W + h_{t-1} U + b
///   i, f, o = sigmoid(z_i, z_f, z_o);  g = tanh(z_g)
///   c_t = f * c_{t-1} + i * g;         h_t = o * tanh(c_t)
///
/// with h_0 = c_0 = 0. The recurrence runs over all T steps; outputs past a
/// sample's length are left for the pooling mask to discard.
struct LstmLayer {
  std::size_t input_dim = 2;
  std::size_t hidden_dim = 8;
  ParamSet::Index input_weight = 0;      // W [input_dim x 4H]
  ParamSet::Index recurrent_weight = 0;  // U [H x 4H]
  ParamSet::Index bias = 0;              // b [4H]

  static LstmLayer create(ParamSet& params, const std::string& name, std::size_t input_dim,
                          std::size_t hidden_dim, SeededRng& rng);
};

struct LstmCache {
  Tensor input;      // [B x T x D]
  Tensor gates;      // [B x T x 4H], post-activation
  Tensor cell;       // [B x T x H]
  Tensor cell_tanh;  // [B x T x H]
  Tensor hidden;     // [B x T x H]
};

/// x: [B x T x input_dim] -> hidden states [B x T x hidden_dim].
Tensor lstm_forward(const LstmLayer& layer, const ParamSet& params, const Tensor& x,
                    std::span<const std::size_t> lengths, LstmCache* cache);

/// Backpropagation through time. Accumulates parameter gradients and
/// returns dL/dx.
Tensor lstm_backward(const LstmLayer& layer, ParamSet& params, const LstmCache& cache, const Tensor& grad_out);

}  // namespace fgwin::nn
