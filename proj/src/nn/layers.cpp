#include "fgwin/nn/layers.hpp"

#include <cmath>

#include "fgwin/error.hpp"

namespace fgwin::nn {

namespace {

std::size_t rows_of(const Tensor& x, std::size_t last, const char* what) {
  if (x.shape().back() != last) {
    throw DimensionError(std::string(what) + ": expected trailing dim " + std::to_string(last) + ", got " +
                         shape_string(x.shape()));
  }
  return x.size() / last;
}

Shape with_last(Shape s, std::size_t last) {
  s.back() = last;
  return s;
}

}  // namespace

Linear Linear::create(ParamSet& params, const std::string& name, std::size_t in, std::size_t out,
                      SeededRng& rng) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight = params.add_uniform(name + ".weight", {in, out}, in, rng);
  l.bias = params.add_constant(name + ".bias", {out}, 0.0);
  return l;
}

Tensor Linear::forward(const ParamSet& params, const Tensor& x) const {
  const std::size_t rows = rows_of(x, in, "linear");
  const double* w = params[weight].value.data();
  const double* b = params[bias].value.data();
  Tensor y(with_last(x.shape(), out));
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * in;
    double* yr = y.data() + r * out;
    for (std::size_t o = 0; o < out; ++o) yr[o] = b[o];
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xr[i];
      const double* wi = w + i * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wi[o];
    }
  }
  return y;
}

Tensor Linear::backward(ParamSet& params, const Tensor& x, const Tensor& grad_y) const {
  const std::size_t rows = rows_of(x, in, "linear backward");
  if (rows_of(grad_y, out, "linear backward") != rows) {
    throw DimensionError("linear backward: gradient " + shape_string(grad_y.shape()) + " does not match input " +
                         shape_string(x.shape()));
  }
  const double* w = params[weight].value.data();
  double* dw = params[weight].grad.data();
  double* db = params[bias].grad.data();
  Tensor dx(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * in;
    const double* gr = grad_y.data() + r * out;
    double* dxr = dx.data() + r * in;
    for (std::size_t o = 0; o < out; ++o) db[o] += gr[o];
    for (std::size_t i = 0; i < in; ++i) {
      const double* wi = w + i * out;
      double* dwi = dw + i * out;
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) {
        dwi[o] += xr[i] * gr[o];
        acc += wi[o] * gr[o];
      }
      dxr[i] = acc;
    }
  }
  return dx;
}

LayerNorm LayerNorm::create(ParamSet& params, const std::string& name, std::size_t dim) {
  LayerNorm ln;
  ln.dim = dim;
  ln.scale = params.add_constant(name + ".scale", {dim}, 1.0);
  ln.shift = params.add_constant(name + ".shift", {dim}, 0.0);
  return ln;
}

Tensor LayerNorm::forward(const ParamSet& params, const Tensor& x, Cache* cache) const {
  const std::size_t rows = rows_of(x, dim, "layer norm");
  const double* g = params[scale].value.data();
  const double* b = params[shift].value.data();
  Tensor y(x.shape());
  Tensor xhat(x.shape());
  std::vector<double> inv_std(rows);
  const double n = static_cast<double>(dim);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * dim;
    double mean = 0.0;
    for (std::size_t i = 0; i < dim; ++i) mean += xr[i];
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < dim; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t i = 0; i < dim; ++i) {
      const double h = (xr[i] - mean) * is;
      xhat.data()[r * dim + i] = h;
      y.data()[r * dim + i] = g[i] * h + b[i];
    }
  }
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Tensor LayerNorm::backward(ParamSet& params, const Cache& cache, const Tensor& grad_y) const {
  const std::size_t rows = rows_of(grad_y, dim, "layer norm backward");
  if (grad_y.shape() != cache.normalized.shape()) {
    throw DimensionError("layer norm backward: gradient " + shape_string(grad_y.shape()) +
                         " does not match cached " + shape_string(cache.normalized.shape()));
  }
  const double* g = params[scale].value.data();
  double* dg = params[scale].grad.data();
  double* db = params[shift].grad.data();
  Tensor dx(grad_y.shape());
  const double n = static_cast<double>(dim);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* gy = grad_y.data() + r * dim;
    const double* h = cache.normalized.data() + r * dim;
    double sum_dh = 0.0, sum_dh_h = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      dg[i] += gy[i] * h[i];
      db[i] += gy[i];
      const double dh = gy[i] * g[i];
      sum_dh += dh;
      sum_dh_h += dh * h[i];
    }
    const double mean_dh = sum_dh / n, mean_dh_h = sum_dh_h / n;
    for (std::size_t i = 0; i < dim; ++i) {
      const double dh = gy[i] * g[i];
      dx.data()[r * dim + i] = cache.inv_std[r] * (dh - mean_dh - h[i] * mean_dh_h);
    }
  }
  return dx;
}

Tensor dropout(const Tensor& x, double p, SeededRng* rng, bool training, DropoutMask* mask) {
  if (!(p >= 0.0 && p < 1.0)) throw ParameterError("dropout rate must be in [0, 1), got " + std::to_string(p));
  if (mask) mask->scale = Tensor();
  if (!training || p == 0.0) return x;
  if (rng == nullptr) throw ContractError("training-mode dropout needs a random generator");
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor scale(x.shape());
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = rng->uniform() < p ? 0.0 : keep_scale;
    scale[i] = s;
    y[i] = x[i] * s;
  }
  if (mask) mask->scale = std::move(scale);
  return y;
}

Tensor dropout_backward(const DropoutMask& mask, const Tensor& grad_y) {
  if (!mask.active()) return grad_y;
  if (mask.scale.shape() != grad_y.shape()) {
    throw DimensionError("dropout backward: gradient " + shape_string(grad_y.shape()) + " vs mask " +
                         shape_string(mask.scale.shape()));
  }
  Tensor dx(grad_y.shape());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = grad_y[i] * mask.scale[i];
  return dx;
}

Tensor masked_mean_pool(const Tensor& x, const Mask& mask) {
  if (x.rank() != 3 || mask.shape().size() != 2 || mask.shape()[0] != x.dim(0) || mask.shape()[1] != x.dim(1)) {
    throw DimensionError("masked_mean_pool: input " + shape_string(x.shape()) + " vs mask " +
                         shape_string(mask.shape()));
  }
  const std::size_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  Tensor y({b, d});
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t valid = 0;
    double* yr = y.data() + i * d;
    for (std::size_t s = 0; s < t; ++s) {
      if (!mask.at(i, s)) continue;
      ++valid;
      const double* xr = x.data() + (i * t + s) * d;
      for (std::size_t k = 0; k < d; ++k) yr[k] += xr[k];
    }
    if (valid == 0) throw DataError("masked_mean_pool: sample " + std::to_string(i) + " has no valid timestep");
    const double inv = 1.0 / static_cast<double>(valid);
    for (std::size_t k = 0; k < d; ++k) yr[k] *= inv;
  }
  return y;
}

Tensor masked_mean_pool_backward(const Mask& mask, const Tensor& grad_y, std::size_t steps) {
  const std::size_t b = grad_y.dim(0), d = grad_y.dim(1);
  Tensor dx({b, steps, d});
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t valid = 0;
    for (std::size_t s = 0; s < steps; ++s) valid += mask.at(i, s) ? 1 : 0;
    if (valid == 0) continue;
    const double inv = 1.0 / static_cast<double>(valid);
    for (std::size_t s = 0; s < steps; ++s) {
      if (!mask.at(i, s)) continue;
      for (std::size_t k = 0; k < d; ++k) dx.at(i, s, k) = grad_y.at(i, k) * inv;
    }
  }
  return dx;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_y) {
  Tensor dx(grad_y.shape());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = x[i] > 0.0 ? grad_y[i] : 0.0;
  return dx;
}

Tensor positional_encoding(std::size_t max_positions, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0) {
    throw ParameterError("positional encoding needs an even model width, got " + std::to_string(d_model));
  }
  if (max_positions == 0) throw ParameterError("positional encoding needs at least one position");
  Tensor pe({max_positions, d_model});
  for (std::size_t pos = 0; pos < max_positions; ++pos) {
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double rate = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      const double angle = static_cast<double>(pos) / rate;
      pe.at(pos, 2 * i) = std::sin(angle);
      pe.at(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

}  // namespace fgwin::nn
