#pragma once

// Little-endian binary container shared by checkpoints and prepared shapes:
//
//   "ZLSE" | u32 version | u64 json-length | json bytes
//   | u32 tensor-count | { u32 name-length | name | u8 dtype (0 f32, 1 f64)
//                        | u32 rank | u64 dims[rank] | row-major payload }*
//   | u64 rng-length | rng bytes

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "zlse/diff.hpp"

namespace zlse {

inline constexpr std::uint32_t kContainerVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

struct Container {
  nlohmann::json header = nlohmann::json::object();
  std::vector<NamedTensor> tensors;
  std::string rng;

  const NamedTensor* find(const std::string& name) const;
};

std::string encode_container(const Container& c);
// Throws ParseError with the byte offset on bad magic, version mismatch or truncation.
Container decode_container(const std::string& bytes);

// Writes to a temporary sibling then renames over `path`.
void save_container(const std::filesystem::path& path, const Container& c);
Container load_container(const std::filesystem::path& path);

}  // namespace zlse
