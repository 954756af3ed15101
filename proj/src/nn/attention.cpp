#include "fgwin/nn/attention.hpp"

#include <cmath>
#include <vector>

#include "fgwin/error.hpp"

namespace fgwin::nn {

MultiHeadAttention MultiHeadAttention::create(ParamSet& params, const std::string& name, std::size_t d_model,
                                              std::size_t heads, SeededRng& rng) {
  if (heads == 0 || d_model % heads != 0) {
    throw DimensionError("attention width " + std::to_string(d_model) + " is not divisible by " +
                         std::to_string(heads) + " heads");
  }
  MultiHeadAttention a;
  a.d_model = d_model;
  a.heads = heads;
  a.query = Linear::create(params, name + ".query", d_model, d_model, rng);
  a.key = Linear::create(params, name + ".key", d_model, d_model, rng);
  a.value = Linear::create(params, name + ".value", d_model, d_model, rng);
  a.output = Linear::create(params, name + ".output", d_model, d_model, rng);
  return a;
}

Tensor MultiHeadAttention::forward(const ParamSet& params, const Tensor& x, const Mask& mask, Cache* cache) const {
  if (heads == 0 || d_model % heads != 0) {
    throw DimensionError("attention width " + std::to_string(d_model) + " is not divisible by " +
                         std::to_string(heads) + " heads");
  }
  if (x.rank() != 3 || x.dim(2) != d_model) {
    throw DimensionError("attention: expected [B x T x " + std::to_string(d_model) + "], got " +
                         shape_string(x.shape()));
  }
  const std::size_t b = x.dim(0), t = x.dim(1), hd = d_model / heads;
  if (mask.shape() != Shape{b, t}) {
    throw DimensionError("attention: mask " + shape_string(mask.shape()) + " does not match input " +
                         shape_string(x.shape()));
  }
  Tensor q = query.forward(params, x);
  Tensor k = key.forward(params, x);
  Tensor v = value.forward(params, x);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

  Tensor weights({b, heads, t, t});
  Tensor context({b, t, d_model});
  for (std::size_t s = 0; s < b; ++s) {
    const auto valid = mask.bits().subspan(s * t, t);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * hd;
      for (std::size_t i = 0; i < t; ++i) {
        double* row = weights.data() + ((s * heads + h) * t + i) * t;
        const double* qi = q.data() + (s * t + i) * d_model + off;
        for (std::size_t j = 0; j < t; ++j) {
          const double* kj = k.data() + (s * t + j) * d_model + off;
          double dot = 0.0;
          for (std::size_t c = 0; c < hd; ++c) dot += qi[c] * kj[c];
          row[j] = dot * inv_sqrt;
        }
        masked_softmax_row(std::span<double>(row, t), valid);
        double* ci = context.data() + (s * t + i) * d_model + off;
        for (std::size_t j = 0; j < t; ++j) {
          const double a = row[j];
          if (a == 0.0) continue;
          const double* vj = v.data() + (s * t + j) * d_model + off;
          for (std::size_t c = 0; c < hd; ++c) ci[c] += a * vj[c];
        }
      }
    }
  }
  Tensor y = output.forward(params, context);
  if (cache) {
    cache->input = x;
    cache->query = std::move(q);
    cache->key = std::move(k);
    cache->value = std::move(v);
    cache->weights = std::move(weights);
    cache->context = std::move(context);
    cache->mask = mask;
  }
  return y;
}

Tensor MultiHeadAttention::backward(ParamSet& params, const Cache& cache, const Tensor& grad_y) const {
  if (grad_y.shape() != cache.input.shape()) {
    throw DimensionError("attention backward: gradient " + shape_string(grad_y.shape()) + " vs input " +
                         shape_string(cache.input.shape()));
  }
  const std::size_t b = grad_y.dim(0), t = grad_y.dim(1), hd = d_model / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  const Tensor d_context = output.backward(params, cache.context, grad_y);

  Tensor dq(cache.query.shape()), dk(cache.key.shape()), dv(cache.value.shape());
  std::vector<double> d_weights(t), d_scores(t);
  for (std::size_t s = 0; s < b; ++s) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * hd;
      for (std::size_t i = 0; i < t; ++i) {
        const double* a = cache.weights.data() + ((s * heads + h) * t + i) * t;
        const double* dci = d_context.data() + (s * t + i) * d_model + off;
        double weighted = 0.0;
        for (std::size_t j = 0; j < t; ++j) {
          const double* vj = cache.value.data() + (s * t + j) * d_model + off;
          double* dvj = dv.data() + (s * t + j) * d_model + off;
          double acc = 0.0;
          for (std::size_t c = 0; c < hd; ++c) {
            acc += dci[c] * vj[c];
            dvj[c] += a[j] * dci[c];
          }
          d_weights[j] = acc;
          weighted += a[j] * acc;
        }
        // Softmax Jacobian; masked entries have a == 0 and stay 0.
        for (std::size_t j = 0; j < t; ++j) d_scores[j] = a[j] * (d_weights[j] - weighted) * inv_sqrt;
        const double* qi = cache.query.data() + (s * t + i) * d_model + off;
        double* dqi = dq.data() + (s * t + i) * d_model + off;
        for (std::size_t j = 0; j < t; ++j) {
          if (d_scores[j] == 0.0) continue;
          const double* kj = cache.key.data() + (s * t + j) * d_model + off;
          double* dkj = dk.data() + (s * t + j) * d_model + off;
          for (std::size_t c = 0; c < hd; ++c) {
            dqi[c] += d_scores[j] * kj[c];
            dkj[c] += d_scores[j] * qi[c];
          }
        }
      }
    }
  }
  Tensor dx = query.backward(params, cache.input, dq);
  const Tensor dxk = key.backward(params, cache.input, dk);
  const Tensor dxv = value.backward(params, cache.input, dv);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dxk[i] + dxv[i];
  return dx;
}

EncoderLayer EncoderLayer::create(ParamSet& params, const std::string& name, std::size_t d_model, std::size_t heads,
                                  std::size_t ffn_dim, double dropout, SeededRng& rng) {
  EncoderLayer e;
  e.attention = MultiHeadAttention::create(params, name + ".attention", d_model, heads, rng);
  e.norm1 = LayerNorm::create(params, name + ".norm1", d_model);
  e.ffn_in = Linear::create(params, name + ".ffn_in", d_model, ffn_dim, rng);
  e.ffn_out = Linear::create(params, name + ".ffn_out", ffn_dim, d_model, rng);
  e.norm2 = LayerNorm::create(params, name + ".norm2", d_model);
  e.dropout = dropout;
  return e;
}

Tensor EncoderLayer::forward(const ParamSet& params, const Tensor& x, const Mask& mask, bool training,
                             SeededRng* rng, Cache* cache) const {
  Tensor r1 = nn::dropout(attention.forward(params, x, mask, cache ? &cache->attention : nullptr), dropout, rng,
                          training, cache ? &cache->attention_dropout : nullptr);
  for (std::size_t i = 0; i < r1.size(); ++i) r1[i] += x[i];
  Tensor y1 = norm1.forward(params, r1, cache ? &cache->norm1 : nullptr);

  Tensor hidden = ffn_in.forward(params, y1);
  Tensor active = relu(hidden);
  Tensor r2 = nn::dropout(ffn_out.forward(params, active), dropout, rng, training,
                          cache ? &cache->ffn_dropout : nullptr);
  for (std::size_t i = 0; i < r2.size(); ++i) r2[i] += y1[i];
  Tensor out = norm2.forward(params, r2, cache ? &cache->norm2 : nullptr);

  if (cache) {
    cache->norm1_out = std::move(y1);
    cache->ffn_hidden = std::move(hidden);
    cache->ffn_active = std::move(active);
  }
  return out;
}

Tensor EncoderLayer::backward(ParamSet& params, const Cache& cache, const Tensor& grad_y) const {
  const Tensor d_r2 = norm2.backward(params, cache.norm2, grad_y);
  const Tensor d_ffn = dropout_backward(cache.ffn_dropout, d_r2);
  const Tensor d_active = ffn_out.backward(params, cache.ffn_active, d_ffn);
  const Tensor d_hidden = relu_backward(cache.ffn_hidden, d_active);
  Tensor d_y1 = ffn_in.backward(params, cache.norm1_out, d_hidden);
  for (std::size_t i = 0; i < d_y1.size(); ++i) d_y1[i] += d_r2[i];

  const Tensor d_r1 = norm1.backward(params, cache.norm1, d_y1);
  const Tensor d_attn = dropout_backward(cache.attention_dropout, d_r1);
  Tensor dx = attention.backward(params, cache.attention, d_attn);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += d_r1[i];
  return dx;
}

}  // namespace fgwin::nn
