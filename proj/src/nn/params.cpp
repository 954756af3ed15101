#include "fgwin/nn/params.hpp"

#include <cmath>

#include "fgwin/error.hpp"

namespace fgwin::nn {

ParamSet::Index ParamSet::add(std::string name, Tensor value) {
  if (find(name) != nullptr) throw ParameterError("duplicate parameter name: " + name);
  Tensor grad(value.shape(), 0.0);
  entries_.push_back({std::move(name), std::move(value), std::move(grad)});
  return entries_.size() - 1;
}

ParamSet::Index ParamSet::add_uniform(std::string name, Shape shape, std::size_t fan_in, SeededRng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return add(std::move(name), rng_uniform(rng, std::move(shape), -bound, bound));
}

ParamSet::Index ParamSet::add_constant(std::string name, Shape shape, double value) {
  return add(std::move(name), Tensor(std::move(shape), value));
}

const Parameter* ParamSet::find(const std::string& name) const {
  for (const auto& p : entries_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Parameter* ParamSet::find(const std::string& name) {
  for (auto& p : entries_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void ParamSet::zero_grad() {
  for (auto& p : entries_) p.grad.fill(0.0);
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : entries_) n += p.value.size();
  return n;
}

}  // namespace fgwin::nn
