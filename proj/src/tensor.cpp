#include "fgwin/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fgwin/error.hpp"

namespace fgwin {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimension must be positive, got " + shape_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  check_shape(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("buffer of " + std::to_string(data_.size()) +
                         " values does not fit shape " + shape_string(shape_));
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw DimensionError("ragged rows in Tensor::from_rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({m, n}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
  }
  return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Mask::Mask(Shape shape, bool fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  bits_.assign(shape_size(shape_), fill ? 1 : 0);
}

Mask Mask::from_lengths(std::span<const std::size_t> lengths, std::size_t max_len) {
  Mask m({lengths.size(), max_len}, false);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    for (std::size_t t = 0; t < std::min(lengths[i], max_len); ++t) m.set(i, t, true);
  }
  return m;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

namespace {

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  auto mismatch = [&] {
    return DimensionError("matmul shape mismatch: " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
  };
  if (a.rank() == 2 && b.rank() == 2) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) throw mismatch();
    Tensor c({m, n});
    gemm(a.data(), b.data(), c.data(), m, k, n);
    return c;
  }
  if (a.rank() == 3 && b.rank() == 3) {
    const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    if (b.dim(0) != batch || b.dim(1) != k) throw mismatch();
    Tensor c({batch, m, n});
    for (std::size_t s = 0; s < batch; ++s) {
      gemm(a.data() + s * m * k, b.data() + s * k * n, c.data() + s * m * n, m, k, n);
    }
    return c;
  }
  throw mismatch();
}

double sigmoid(double x) {
  // exp only sees non-positive arguments; the result is kept strictly inside
  // (0, 1) even where the exact value rounds to 0 or 1.
  constexpr double kLo = std::numeric_limits<double>::min();
  constexpr double kHi = 1.0 - 0x1.0p-53;
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double z = std::exp(x);
    y = z / (1.0 + z);
  }
  return std::clamp(y, kLo, kHi);
}

Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = sigmoid(v);
  return y;
}

void masked_softmax_row(std::span<double> scores, std::span<const std::uint8_t> valid) {
  double mx = -INFINITY;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (valid[j]) mx = std::max(mx, scores[j]);
  }
  if (mx == -INFINITY) {
    std::fill(scores.begin(), scores.end(), 0.0);
    return;
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (valid[j]) {
      scores[j] = std::exp(scores[j] - mx);
      sum += scores[j];
    } else {
      scores[j] = 0.0;
    }
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < scores.size(); ++j) scores[j] *= inv;
}

Tensor masked_softmax(const Tensor& scores, const Mask& mask) {
  const Shape& ss = scores.shape();
  const Shape& ms = mask.shape();
  if (ms.size() > ss.size()) {
    throw DimensionError("mask " + shape_string(ms) + " has more axes than scores " + shape_string(ss));
  }
  // Right-align the mask and compute broadcast strides (0 along size-1 axes).
  const std::size_t offset = ss.size() - ms.size();
  std::vector<std::size_t> mstride(ss.size(), 0);
  std::size_t stride = 1;
  for (std::size_t r = ms.size(); r-- > 0;) {
    const std::size_t axis = r + offset;
    if (ms[r] != ss[axis] && ms[r] != 1) {
      throw DimensionError("mask " + shape_string(ms) + " does not broadcast to " + shape_string(ss));
    }
    mstride[axis] = ms[r] == 1 ? 0 : stride;
    stride *= ms[r];
  }

  Tensor out = scores;
  const std::size_t last = ss.back();
  const std::size_t rows = scores.size() / last;
  std::vector<std::uint8_t> valid(last);
  std::vector<std::size_t> index(ss.size(), 0);
  for (std::size_t row = 0; row < rows; ++row) {
    std::size_t base = 0;
    for (std::size_t ax = 0; ax + 1 < ss.size(); ++ax) base += index[ax] * mstride[ax];
    for (std::size_t j = 0; j < last; ++j) valid[j] = mask.bits()[base + j * mstride.back()];
    masked_softmax_row(std::span<double>(out.data() + row * last, last), valid);
    for (std::size_t ax = ss.size() - 1; ax-- > 0;) {
      if (++index[ax] < ss[ax]) break;
      index[ax] = 0;
    }
  }
  return out;
}

}  // namespace fgwin
