#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "zlse/diff.hpp"
#include "zlse/random.hpp"

namespace zlse {

// Named trainable tensors, iterated in registration order.
class ParamStore {
 public:
  using Entry = std::pair<std::string, Value>;

  Value add(const std::string& name, Shape shape, std::vector<double> init);
  // U(-bound, bound) initialization.
  Value add_uniform(const std::string& name, Shape shape, double bound, Rng& rng);

  const Value& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t tensor_count() const { return entries_.size(); }

  std::size_t total_count() const;
  std::size_t count_with_prefix(const std::string& prefix) const;

  void zero_grad();

 private:
  std::vector<Entry> entries_;
};

}  // namespace zlse
