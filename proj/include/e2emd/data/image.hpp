#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "e2emd/nn/tensor.hpp"

namespace e2emd::data {

// Decodes any PNG (gray, palette, alpha, 16-bit) to a 3 x H x W tensor in
// [0, 1]. Alpha is composited onto black, the NIH crop background.
// Throws ParseError("bad_image") on anything libpng rejects.
nn::Tensor decode_png(std::span<const std::uint8_t> bytes);

// 8-bit RGB PNG of a 3 x H x W tensor (values clamped to [0, 1]).
std::vector<std::uint8_t> encode_png(const nn::Tensor& image);

// Bilinear resize with pixel-center alignment (edge pixels replicated).
nn::Tensor resize_bilinear(const nn::Tensor& image, std::size_t height, std::size_t width);

// The single preprocessing path shared by training data, the CLI and the
// service: decode, then resize to the model's H x W.
nn::Tensor preprocess_png(std::span<const std::uint8_t> bytes, const nn::Shape& input);

}  // namespace e2emd::data
