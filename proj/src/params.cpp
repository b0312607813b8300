#include "zlse/params.hpp"

#include <algorithm>

namespace zlse {

Value ParamStore::add(const std::string& name, Shape shape, std::vector<double> init) {
  if (contains(name)) throw Error("ParamStore: duplicate parameter name '" + name + "'");
  Value v = Value::parameter(std::move(shape), std::move(init));
  entries_.emplace_back(name, v);
  return v;
}

Value ParamStore::add_uniform(const std::string& name, Shape shape, double bound, Rng& rng) {
  std::vector<double> init(shape_size(shape));
  for (auto& x : init) x = rng.uniform(-bound, bound);
  return add(name, std::move(shape), std::move(init));
}

const Value& ParamStore::get(const std::string& name) const {
  for (const auto& [n, v] : entries_) {
    if (n == name) return v;
  }
  throw Error("ParamStore: no parameter named '" + name + "'");
}

bool ParamStore::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
}

std::size_t ParamStore::total_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : entries_) n += v.size();
  return n;
}

std::size_t ParamStore::count_with_prefix(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& [name, v] : entries_) {
    if (name.rfind(prefix, 0) == 0) n += v.size();
  }
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, v] : entries_) {
    Value handle = v;
    handle.zero_grad();
  }
}

}  // namespace zlse
