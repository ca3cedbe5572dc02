#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "e2emd/nn/network.hpp"

namespace e2emd::model {

// "E2EW" weight container, all integers little-endian:
//
//   header (16 bytes): "E2EW" | u16 version = 1 | u16 reserved = 0
//                      | u32 tensor count | u32 reserved = 0
//   per tensor, in ascending byte-wise name order:
//     u16 name length | name (UTF-8) | u8 dtype (0 = f32) | u8 ndims
//     | u32 dims[ndims] | f32 data[product(dims)]
//
// Nothing may follow the last tensor.
inline constexpr std::string_view kWeightMagic = "E2EW";
inline constexpr std::uint16_t kWeightVersion = 1;
inline constexpr std::size_t kWeightHeaderBytes = 16;

std::vector<std::uint8_t> encode_weights(const nn::WeightStore& weights);

// Throws ParseError with codes bad_magic, bad_version, bad_reserved,
// truncated, trailing_bytes, empty_name, unsorted_names, duplicate_name,
// bad_dtype, bad_dims.
nn::WeightStore decode_weights(std::span<const std::uint8_t> bytes);

void save_weights(const nn::WeightStore& weights, const std::filesystem::path& path);
nn::WeightStore load_weights(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// Kernels are prunable; biases are not.
bool is_prunable(std::string_view name);

// Fraction of zeros over all prunable tensors (0 when there are none).
double prunable_sparsity(const nn::WeightStore& weights);

// Size of the store under the sparse encoding: the same header and tensor
// headers, but each prunable tensor's data is a presence bitmap
// (ceil(n/8) bytes) followed by its nonzero values only.
std::size_t sparse_encoded_bytes(const nn::WeightStore& weights);
std::size_t dense_encoded_bytes(const nn::WeightStore& weights);

}  // namespace e2emd::model
