#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fgwin/rng.hpp"
#include "fgwin/tensor.hpp"

namespace fgwin::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // same shape as value
};

/// Ordered, uniquely named parameters with their gradient accumulators.
/// Layers refer to entries by index, so copying a model copies its
/// parameters along with it.
class ParamSet {
 public:
  using Index = std::size_t;

  Index add(std::string name, Tensor value);
  /// Weight drawn uniformly from (-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Index add_uniform(std::string name, Shape shape, std::size_t fan_in, SeededRng& rng);
  Index add_constant(std::string name, Shape shape, double value);

  std::size_t size() const noexcept { return entries_.size(); }
  Parameter& operator[](Index i) { return entries_[i]; }
  const Parameter& operator[](Index i) const { return entries_[i]; }
  const Parameter* find(const std::string& name) const;
  Parameter* find(const std::string& name);

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad();
  std::size_t scalar_count() const;

 private:
  std::vector<Parameter> entries_;
};

}  // namespace fgwin::nn
