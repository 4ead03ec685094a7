#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "deepi2i/tensor.h"

namespace deepi2i {

/// 8-bit RGB image, HWC layout.
struct ImageU8 {
  int64_t h = 0, w = 0;
  std::vector<uint8_t> data;  // h * w * 3

  uint8_t& at(int64_t y, int64_t x, int64_t c) { return data[static_cast<size_t>((y * w + x) * 3 + c)]; }
  uint8_t at(int64_t y, int64_t x, int64_t c) const {
    return data[static_cast<size_t>((y * w + x) * 3 + c)];
  }
  static ImageU8 filled(int64_t h, int64_t w, uint8_t r, uint8_t g, uint8_t b);
};

/// Decodes PNG/JPEG (and whatever else the codec backend accepts) to RGB.
/// Throws DataError when the file cannot be decoded.
ImageU8 decode_image_file(const std::filesystem::path& file);
void encode_png(const std::filesystem::path& file, const ImageU8& img);

ImageU8 center_crop_square(const ImageU8& img);
ImageU8 resize_bilinear(const ImageU8& img, int64_t out_h, int64_t out_w);
ImageU8 hflip(const ImageU8& img);

/// u8 [0,255] -> float [-1,1], CHW.
Tensor<float> image_to_tensor(const ImageU8& img);
/// float CHW (clamped to [-1,1]) -> u8, rounding half away from zero.
ImageU8 tensor_to_image(const Tensor<float>& chw);
/// Batch row n of an N x 3 x H x W tensor.
ImageU8 tensor_row_to_image(const Tensor<float>& nchw, int64_t n);

/// Pastes equally-sized cells into a rows x cols grid with padding.
ImageU8 compose_grid(const std::vector<ImageU8>& cells, int64_t rows, int64_t cols,
                     int64_t pad = 2, uint8_t background = 255);

}  // namespace deepi2i
