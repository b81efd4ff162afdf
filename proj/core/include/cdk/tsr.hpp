#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cdk/tensor.hpp"

namespace cdk {

/// TSR1 tensor container. Byte layout, all integers little-endian:
///
///   magic   "TSR1" (4 ascii bytes)
///   version u16 = 1
///   count   u32
///   names   count x { len u32, bytes (UTF-8) }         names must be unique
///   tensors count x { rank u32, dims u32 each, payload f32 LE }
///
/// Tensors appear in the same order as the name table. Writes go to a
/// temporary file that is renamed into place.
using NamedTensor = std::pair<std::string, TensorF>;

void save_tsr(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tsr(const std::string& path);

}  // namespace cdk
