#pragma once

#include <cstddef>
#include <string>

#include "fgwin/nn/layers.hpp"
#include "fgwin/nn/params.hpp"
#include "fgwin/rng.hpp"
#include "fgwin/tensor.hpp"

namespace fgwin::nn {

/// Scaled dot-product self-attention split across `heads` slices of the
/// model width. Padded keys (mask false) receive exactly zero weight.
struct MultiHeadAttention {
  struct Cache {
    Tensor input;    // [B x T x D]
    Tensor query;    // [B x T x D]
    Tensor key;      // [B x T x D]
    Tensor value;    // [B x T x D]
    Tensor weights;  // [B x H x T x T]
    Tensor context;  // [B x T x D], heads concatenated
    Mask mask;
  };

  std::size_t d_model = 8;
  std::size_t heads = 4;
  Linear query;
  Linear key;
  Linear value;
  Linear output;

  static MultiHeadAttention create(ParamSet& params, const std::string& name, std::size_t d_model,
                                   std::size_t heads, SeededRng& rng);

  Tensor forward(const ParamSet& params, const Tensor& x, const Mask& mask, Cache* cache) const;
  Tensor backward(ParamSet& params, const Cache& cache, const Tensor& grad_y) const;
};

/// Post-norm encoder block:
///   y   = LayerNorm(x + Dropout(Attention(x)))
///   out = LayerNorm(y + Dropout(W2 ReLU(W1 y + b1) + b2))
struct EncoderLayer {
  struct Cache {
    MultiHeadAttention::Cache attention;
    DropoutMask attention_dropout;
    LayerNorm::Cache norm1;
    Tensor norm1_out;
    Tensor ffn_hidden;  // pre-activation
    Tensor ffn_active;  // post-ReLU
    DropoutMask ffn_dropout;
    LayerNorm::Cache norm2;
  };

  MultiHeadAttention attention;
  LayerNorm norm1;
  Linear ffn_in;
  Linear ffn_out;
  LayerNorm norm2;
  double dropout = 0.3;

  static EncoderLayer create(ParamSet& params, const std::string& name, std::size_t d_model, std::size_t heads,
                             std::size_t ffn_dim, double dropout, SeededRng& rng);

  Tensor forward(const ParamSet& params, const Tensor& x, const Mask& mask, bool training, SeededRng* rng,
                 Cache* cache) const;
  Tensor backward(ParamSet& params, const Cache& cache, const Tensor& grad_y) const;
};

}  // namespace fgwin::nn
