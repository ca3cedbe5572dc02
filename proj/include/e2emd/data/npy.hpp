#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "e2emd/nn/tensor.hpp"

namespace e2emd::data {

enum class NpyDtype { f4, f8 };

struct NpyArray {
  nn::Shape shape;  // may be empty (0-d array) or contain zeros
  NpyDtype dtype = NpyDtype::f4;
  std::vector<double> data;

  nn::Tensor to_tensor() const;
};

// NPY v1.0, little-endian "<f4" / "<f8", C order only. ParseError codes:
// bad_magic, bad_version, bad_header, fortran_order, bad_dtype,
// length_mismatch.
NpyArray parse_npy(std::span<const std::uint8_t> bytes);

// v1.0 writer ("<f4" or "<f8"), header padded to a multiple of 64 bytes.
std::vector<std::uint8_t> write_npy(const nn::Shape& shape, std::span<const float> data);
std::vector<std::uint8_t> write_npy(const nn::Shape& shape, std::span<const double> data);

}  // namespace e2emd::data
