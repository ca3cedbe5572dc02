#include "e2emd/data/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>

#include "e2emd/common/error.hpp"

namespace e2emd::data {

using namespace e2emd::nn;

Tensor decode_png(std::span<const std::uint8_t> bytes) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (bytes.empty() || !png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    const std::string why = bytes.empty() ? "empty body" : img.message;
    png_image_free(&img);
    throw ParseError("bad_image", "not a decodable PNG: " + why);
  }
  img.format = PNG_FORMAT_RGB;
  const std::size_t h = img.height, w = img.width;
  if (h == 0 || w == 0) {
    png_image_free(&img);
    throw ParseError("bad_image", "PNG has no pixels");
  }
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(img));
  // A null background composites any alpha onto black.
  if (!png_image_finish_read(&img, nullptr, rgb.data(), 0, nullptr)) {
    const std::string why = img.message;
    png_image_free(&img);
    throw ParseError("bad_image", "PNG decode failed: " + why);
  }
  Tensor out({3, h, w});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < h * w; ++i) out[c * h * w + i] = rgb[i * 3 + c] / 255.0f;
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw DimensionError("encode_png needs 3 x H x W, got " + shape_string(image.shape()));
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::vector<std::uint8_t> rgb(h * w * 3);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < h * w; ++i) {
      rgb[i * 3 + c] = static_cast<std::uint8_t>(std::lround(std::clamp(image[c * h * w + i], 0.0f, 1.0f) * 255.0f));
    }
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, rgb.data(), 0, nullptr)) {
    throw Error("io_error", std::string("PNG encode failed: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, rgb.data(), 0, nullptr)) {
    throw Error("io_error", std::string("PNG encode failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width) {
  if (image.rank() != 3) throw DimensionError("resize needs C x H x W, got " + shape_string(image.shape()));
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h == height && w == width) return image;
  Tensor out({c, height, width});
  const double sy = static_cast<double>(h) / height, sx = static_cast<double>(w) / width;
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy), y1 = std::min(y0 + 1, h - 1);
    const double ay = fy - y0;
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx), x1 = std::min(x0 + 1, w - 1);
      const double ax = fx - x0;
      for (std::size_t k = 0; k < c; ++k) {
        const float* p = image.ptr() + k * h * w;
        const double top = p[y0 * w + x0] * (1 - ax) + p[y0 * w + x1] * ax;
        const double bottom = p[y1 * w + x0] * (1 - ax) + p[y1 * w + x1] * ax;
        out[(k * height + y) * width + x] = static_cast<float>(top * (1 - ay) + bottom * ay);
      }
    }
  }
  return out;
}

Tensor preprocess_png(std::span<const std::uint8_t> bytes, const Shape& input) {
  if (input.size() != 3 || input[0] != 3) throw ConfigError("model input must be 3 x H x W, got " + shape_string(input));
  return resize_bilinear(decode_png(bytes), input[1], input[2]);
}

}  // namespace e2emd::data
