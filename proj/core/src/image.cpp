#include "deepi2i/image.h"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "deepi2i/errors.h"

namespace deepi2i {

ImageU8 ImageU8::filled(int64_t h, int64_t w, uint8_t r, uint8_t g, uint8_t b) {
  ImageU8 img;
  img.h = h;
  img.w = w;
  img.data.resize(static_cast<size_t>(h * w * 3));
  for (int64_t i = 0; i < h * w; ++i) {
    img.data[static_cast<size_t>(3 * i)] = r;
    img.data[static_cast<size_t>(3 * i + 1)] = g;
    img.data[static_cast<size_t>(3 * i + 2)] = b;
  }
  return img;
}

ImageU8 decode_image_file(const std::filesystem::path& file) {
  cv::Mat bgr = cv::imread(file.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DataError("cannot decode image '" + file.string() + "'");
  ImageU8 img;
  img.h = bgr.rows;
  img.w = bgr.cols;
  img.data.resize(static_cast<size_t>(img.h * img.w * 3));
  for (int64_t y = 0; y < img.h; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(static_cast<int>(y));
    for (int64_t x = 0; x < img.w; ++x) {
      img.at(y, x, 0) = row[x][2];
      img.at(y, x, 1) = row[x][1];
      img.at(y, x, 2) = row[x][0];
    }
  }
  return img;
}

void encode_png(const std::filesystem::path& file, const ImageU8& img) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  cv::Mat bgr(static_cast<int>(img.h), static_cast<int>(img.w), CV_8UC3);
  for (int64_t y = 0; y < img.h; ++y) {
    cv::Vec3b* row = bgr.ptr<cv::Vec3b>(static_cast<int>(y));
    for (int64_t x = 0; x < img.w; ++x) {
      row[x][0] = img.at(y, x, 2);
      row[x][1] = img.at(y, x, 1);
      row[x][2] = img.at(y, x, 0);
    }
  }
  if (!cv::imwrite(file.string(), bgr))
    throw DataError("cannot write image '" + file.string() + "'");
}

ImageU8 center_crop_square(const ImageU8& img) {
  const int64_t side = std::min(img.h, img.w);
  const int64_t y0 = (img.h - side) / 2, x0 = (img.w - side) / 2;
  ImageU8 out;
  out.h = side;
  out.w = side;
  out.data.resize(static_cast<size_t>(side * side * 3));
  for (int64_t y = 0; y < side; ++y)
    for (int64_t x = 0; x < side; ++x)
      for (int64_t c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

ImageU8 resize_bilinear(const ImageU8& img, int64_t out_h, int64_t out_w) {
  if (img.h == out_h && img.w == out_w) return img;
  ImageU8 out;
  out.h = out_h;
  out.w = out_w;
  out.data.resize(static_cast<size_t>(out_h * out_w * 3));
  const double sy = static_cast<double>(img.h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(img.w) / static_cast<double>(out_w);
  for (int64_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.h - 1));
    const int64_t y0 = static_cast<int64_t>(fy);
    const int64_t y1 = std::min(y0 + 1, img.h - 1);
    const double wy = fy - y0;
    for (int64_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.w - 1));
      const int64_t x0 = static_cast<int64_t>(fx);
      const int64_t x1 = std::min(x0 + 1, img.w - 1);
      const double wx = fx - x0;
      for (int64_t c = 0; c < 3; ++c) {
        const double v = (1 - wy) * ((1 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c)) +
                         wy * ((1 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c));
        out.at(y, x, c) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

ImageU8 hflip(const ImageU8& img) {
  ImageU8 out = img;
  for (int64_t y = 0; y < img.h; ++y)
    for (int64_t x = 0; x < img.w; ++x)
      for (int64_t c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.w - 1 - x, c);
  return out;
}

Tensor<float> image_to_tensor(const ImageU8& img) {
  Tensor<float> t({3, img.h, img.w});
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < img.h; ++y)
      for (int64_t x = 0; x < img.w; ++x)
        t[(c * img.h + y) * img.w + x] = static_cast<float>(img.at(y, x, c)) / 127.5f - 1.0f;
  return t;
}

namespace {

uint8_t quantize(float v) {
  const float clamped = std::clamp(v, -1.0f, 1.0f);
  const long q = std::lround((static_cast<double>(clamped) + 1.0) * 127.5);
  return static_cast<uint8_t>(std::clamp<long>(q, 0, 255));
}

}  // namespace

ImageU8 tensor_to_image(const Tensor<float>& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) throw ShapeError("tensor_to_image: want 3 x H x W");
  ImageU8 img;
  img.h = chw.dim(1);
  img.w = chw.dim(2);
  img.data.resize(static_cast<size_t>(img.h * img.w * 3));
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < img.h; ++y)
      for (int64_t x = 0; x < img.w; ++x)
        img.at(y, x, c) = quantize(chw[(c * img.h + y) * img.w + x]);
  return img;
}

ImageU8 tensor_row_to_image(const Tensor<float>& nchw, int64_t n) {
  if (nchw.rank() != 4 || nchw.dim(1) != 3) throw ShapeError("tensor_row_to_image: want N x 3 x H x W");
  const int64_t h = nchw.dim(2), w = nchw.dim(3);
  Tensor<float> chw({3, h, w});
  const int64_t per = 3 * h * w;
  for (int64_t i = 0; i < per; ++i) chw[i] = nchw[n * per + i];
  return tensor_to_image(chw);
}

ImageU8 compose_grid(const std::vector<ImageU8>& cells, int64_t rows, int64_t cols, int64_t pad,
                     uint8_t background) {
  if (cells.empty() || rows * cols < static_cast<int64_t>(cells.size()))
    throw ShapeError("compose_grid: grid smaller than cell count");
  const int64_t ch = cells[0].h, cw = cells[0].w;
  for (const auto& c : cells)
    if (c.h != ch || c.w != cw) throw ShapeError("compose_grid: cells differ in size");
  ImageU8 out =
      ImageU8::filled(rows * ch + (rows + 1) * pad, cols * cw + (cols + 1) * pad, background,
                      background, background);
  for (size_t i = 0; i < cells.size(); ++i) {
    const int64_t r = static_cast<int64_t>(i) / cols, q = static_cast<int64_t>(i) % cols;
    const int64_t y0 = pad + r * (ch + pad), x0 = pad + q * (cw + pad);
    for (int64_t y = 0; y < ch; ++y)
      for (int64_t x = 0; x < cw; ++x)
        for (int64_t c = 0; c < 3; ++c) out.at(y0 + y, x0 + x, c) = cells[i].at(y, x, c);
  }
  return out;
}

}  // namespace deepi2i
