#include "fgwin/nn/lstm.hpp"

#include <cmath>

#include "fgwin/error.hpp"

namespace fgwin::nn {

LstmLayer LstmLayer::create(ParamSet& params, const std::string& name, std::size_t input_dim,
                            std::size_t hidden_dim, SeededRng& rng) {
  LstmLayer l;
  l.input_dim = input_dim;
  l.hidden_dim = hidden_dim;
  l.input_weight = params.add_uniform(name + ".input_weight", {input_dim, 4 * hidden_dim}, input_dim, rng);
  l.recurrent_weight = params.add_uniform(name + ".recurrent_weight", {hidden_dim, 4 * hidden_dim}, hidden_dim, rng);
  l.bias = params.add_constant(name + ".bias", {4 * hidden_dim}, 0.0);
  return l;
}

Tensor lstm_forward(const LstmLayer& layer, const ParamSet& params, const Tensor& x,
                    std::span<const std::size_t> lengths, LstmCache* cache) {
  const std::size_t d = layer.input_dim, h = layer.hidden_dim, g4 = 4 * h;
  if (x.rank() != 3 || x.dim(2) != d) {
    throw DimensionError("lstm_forward: expected [B x T x " + std::to_string(d) + "], got " +
                         shape_string(x.shape()));
  }
  const std::size_t b = x.dim(0), t_max = x.dim(1);
  if (lengths.size() != b) {
    throw DimensionError("lstm_forward: " + std::to_string(lengths.size()) + " lengths for batch of " +
                         std::to_string(b));
  }
  for (auto len : lengths) {
    if (len > t_max) throw DimensionError("lstm_forward: length " + std::to_string(len) + " exceeds T=" + std::to_string(t_max));
  }
  if (!x.all_finite()) throw NumericError("lstm_forward: input contains non-finite values");

  const double* w = params[layer.input_weight].value.data();
  const double* u = params[layer.recurrent_weight].value.data();
  const double* bias = params[layer.bias].value.data();

  Tensor gates({b, t_max, g4});
  Tensor cell({b, t_max, h});
  Tensor cell_tanh({b, t_max, h});
  Tensor hidden({b, t_max, h});
  std::vector<double> z(g4);
  std::vector<double> zero(h, 0.0);

  for (std::size_t s = 0; s < b; ++s) {
    for (std::size_t t = 0; t < t_max; ++t) {
      const double* xt = x.data() + (s * t_max + t) * d;
      const double* h_prev = t ? hidden.data() + (s * t_max + t - 1) * h : zero.data();
      const double* c_prev = t ? cell.data() + (s * t_max + t - 1) * h : zero.data();
      for (std::size_t k = 0; k < g4; ++k) z[k] = bias[k];
      for (std::size_t i = 0; i < d; ++i) {
        const double xi = xt[i];
        const double* wi = w + i * g4;
        for (std::size_t k = 0; k < g4; ++k) z[k] += xi * wi[k];
      }
      for (std::size_t j = 0; j < h; ++j) {
        const double hj = h_prev[j];
        const double* uj = u + j * g4;
        for (std::size_t k = 0; k < g4; ++k) z[k] += hj * uj[k];
      }
      double* gt = gates.data() + (s * t_max + t) * g4;
      double* ct = cell.data() + (s * t_max + t) * h;
      double* tct = cell_tanh.data() + (s * t_max + t) * h;
      double* ht = hidden.data() + (s * t_max + t) * h;
      for (std::size_t j = 0; j < h; ++j) {
        const double ig = sigmoid(z[j]);
        const double fg = sigmoid(z[h + j]);
        const double cg = std::tanh(z[2 * h + j]);
        const double og = sigmoid(z[3 * h + j]);
        gt[j] = ig;
        gt[h + j] = fg;
        gt[2 * h + j] = cg;
        gt[3 * h + j] = og;
        ct[j] = fg * c_prev[j] + ig * cg;
        tct[j] = std::tanh(ct[j]);
        ht[j] = og * tct[j];
      }
    }
  }

  if (cache) {
    cache->input = x;
    cache->gates = std::move(gates);
    cache->cell = std::move(cell);
    cache->cell_tanh = std::move(cell_tanh);
    cache->hidden = hidden;
  }
  return hidden;
}

Tensor lstm_backward(const LstmLayer& layer, ParamSet& params, const LstmCache& cache, const Tensor& grad_out) {
  const std::size_t d = layer.input_dim, h = layer.hidden_dim, g4 = 4 * h;
  if (cache.hidden.empty()) throw DimensionError("lstm_backward: empty cache");
  if (grad_out.shape() != cache.hidden.shape()) {
    throw DimensionError("lstm_backward: gradient " + shape_string(grad_out.shape()) + " does not match hidden " +
                         shape_string(cache.hidden.shape()));
  }
  const std::size_t b = grad_out.dim(0), t_max = grad_out.dim(1);

  const double* w = params[layer.input_weight].value.data();
  const double* u = params[layer.recurrent_weight].value.data();
  double* dw = params[layer.input_weight].grad.data();
  double* du = params[layer.recurrent_weight].grad.data();
  double* db = params[layer.bias].grad.data();

  Tensor dx(cache.input.shape());
  std::vector<double> dh_next(h), dc_next(h), dz(g4);
  std::vector<double> zero(h, 0.0);

  for (std::size_t s = 0; s < b; ++s) {
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    std::fill(dc_next.begin(), dc_next.end(), 0.0);
    for (std::size_t t = t_max; t-- > 0;) {
      const std::size_t row = s * t_max + t;
      const double* gt = cache.gates.data() + row * g4;
      const double* tct = cache.cell_tanh.data() + row * h;
      const double* c_prev = t ? cache.cell.data() + (row - 1) * h : zero.data();
      const double* h_prev = t ? cache.hidden.data() + (row - 1) * h : zero.data();
      const double* gy = grad_out.data() + row * h;

      for (std::size_t j = 0; j < h; ++j) {
        const double ig = gt[j], fg = gt[h + j], cg = gt[2 * h + j], og = gt[3 * h + j];
        const double dh = gy[j] + dh_next[j];
        const double dc = dh * og * (1.0 - tct[j] * tct[j]) + dc_next[j];
        dz[j] = dc * cg * ig * (1.0 - ig);
        dz[h + j] = dc * c_prev[j] * fg * (1.0 - fg);
        dz[2 * h + j] = dc * ig * (1.0 - cg * cg);
        dz[3 * h + j] = dh * tct[j] * og * (1.0 - og);
        dc_next[j] = dc * fg;
      }

      for (std::size_t k = 0; k < g4; ++k) db[k] += dz[k];
      const double* xt = cache.input.data() + row * d;
      double* dxt = dx.data() + row * d;
      for (std::size_t i = 0; i < d; ++i) {
        const double* wi = w + i * g4;
        double* dwi = dw + i * g4;
        double acc = 0.0;
        for (std::size_t k = 0; k < g4; ++k) {
          dwi[k] += xt[i] * dz[k];
          acc += wi[k] * dz[k];
        }
        dxt[i] = acc;
      }
      for (std::size_t j = 0; j < h; ++j) {
        const double* uj = u + j * g4;
        double* duj = du + j * g4;
        double acc = 0.0;
        for (std::size_t k = 0; k < g4; ++k) {
          duj[k] += h_prev[j] * dz[k];
          acc += uj[k] * dz[k];
        }
        dh_next[j] = acc;
      }
    }
  }
  return dx;
}

}  // namespace fgwin::nn
