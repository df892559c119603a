#pragma once

// Named float32 tensor records, the same record layout the checkpoint uses:
//   "SNXT" | u32 version | u32 count | records...

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "salsanext/tensor.hpp"

namespace salsanext {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

std::vector<std::uint8_t> save_tensors(const NamedTensors& tensors);
NamedTensors load_tensors(std::span<const std::uint8_t> bytes);

}  // namespace salsanext
