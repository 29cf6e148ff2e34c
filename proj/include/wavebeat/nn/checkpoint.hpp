#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wavebeat/tensor.hpp"

namespace wavebeat::nn {

// Binary tensor container:
//   magic "WAVEBEAT", u32 version, u32 count,
//   then per tensor: u32 name length, name bytes, u32 rank, u64 dims[rank],
//   raw little-endian float32 payload.
// Round-trips are bit-exact.

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors);

std::map<std::string, Tensor> load_tensors(const std::string& path);

} // namespace wavebeat::nn
