#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voxnox/nn/tensor.hpp"

namespace voxnox::nn {

struct NamedTensor {
    std::string name;
    Tensor<float> tensor;
    bool operator==(const NamedTensor&) const = default;
};

inline constexpr char kWeightMagic[4] = {'V', 'X', 'N', 'W'};
inline constexpr std::uint32_t kWeightVersion = 1;

// Layout: magic "VXNW", u32 version, u32 count, then per tensor
// {u32 name length, name bytes, u32 rank, u32 dims[rank]}, then every tensor's
// data as little-endian IEEE-754 binary32 in manifest order.
std::string encode_weights(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> decode_weights(std::string_view bytes);

} // namespace voxnox::nn
