#pragma once
// Flat binary parameter container.
//
// Layout (all integers and values little-endian):
//
//   offset  size  field
//   0       8     magic "CXRPARAM"
//   8       4     u32 format version (1)
//   12      4     u32 record count
//   then per record:
//           4     u32 name length L
//           L     name bytes (UTF-8, no terminator)
//           4     u32 rank R
//           8*R   u64 extents
//           8*E   f64 values, E = product of extents (IEEE-754 binary64)
//
// Round-trips are bit-exact.

#include <filesystem>
#include <string>
#include <vector>

#include "cxr/tensor.hpp"

namespace cxr {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

inline constexpr std::uint32_t kParamFormatVersion = 1;

std::string encode_parameters(const std::vector<NamedTensor>& params);
std::vector<NamedTensor> decode_parameters(const std::string& bytes);

void save_parameters(const std::filesystem::path& path, const std::vector<NamedTensor>& params);
std::vector<NamedTensor> load_parameters(const std::filesystem::path& path);

}  // namespace cxr
