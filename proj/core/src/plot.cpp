#include "deepi2i/plot.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "deepi2i/errors.h"

namespace deepi2i {

namespace {

// 5x7 bitmap glyphs for axis labels
struct Glyph {
  char ch;
  uint8_t rows[7];
};

constexpr Glyph kGlyphs[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'e', {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}},
    {' ', {0, 0, 0, 0, 0, 0, 0}},
};

const Glyph* glyph_of(char c) {
  for (const auto& g : kGlyphs)
    if (g.ch == c) return &g;
  return nullptr;
}

struct Color {
  uint8_t r, g, b;
};

constexpr Color kPalette[] = {
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},
    {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127},
};

void put_pixel(ImageU8& img, int64_t y, int64_t x, Color c) {
  if (y < 0 || y >= img.h || x < 0 || x >= img.w) return;
  img.at(y, x, 0) = c.r;
  img.at(y, x, 1) = c.g;
  img.at(y, x, 2) = c.b;
}

void draw_line(ImageU8& img, int64_t y0, int64_t x0, int64_t y1, int64_t x1, Color c) {
  const int64_t dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int64_t sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int64_t err = dx + dy;
  while (true) {
    put_pixel(img, y0, x0, c);
    if (x0 == x1 && y0 == y1) break;
    const int64_t e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void draw_text(ImageU8& img, int64_t y, int64_t x, const std::string& text, Color c) {
  int64_t cx = x;
  for (char ch : text) {
    if (const Glyph* g = glyph_of(ch)) {
      for (int row = 0; row < 7; ++row)
        for (int col = 0; col < 5; ++col)
          if (g->rows[row] & (1 << (4 - col))) put_pixel(img, y + row, cx + col, c);
    }
    cx += 6;
  }
}

std::string format_tick(double v) {
  char buf[32];
  if (v != 0 && (std::abs(v) >= 1e4 || std::abs(v) < 1e-2))
    std::snprintf(buf, sizeof(buf), "%.1e", v);
  else
    std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

}  // namespace

ImageU8 line_chart(const std::vector<PlotSeries>& series, const std::string& title, int64_t width,
                   int64_t height) {
  if (series.empty()) throw ConfigError("line_chart: no series");
  ImageU8 img = ImageU8::filled(height, width, 255, 255, 255);
  const Color axis{40, 40, 40}, grid{220, 220, 220};

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (!std::isfinite(xmin) || !std::isfinite(ymin))
    throw ConfigError("line_chart: series carry no finite points");
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const int64_t ml = 70, mr = 20, mt = 30, mb = 40;  // margins
  const int64_t px0 = ml, px1 = width - mr, py0 = height - mb, py1 = mt;
  auto to_px = [&](double x, double y) {
    const int64_t px =
        px0 + static_cast<int64_t>(std::lround((x - xmin) / (xmax - xmin) * (px1 - px0)));
    const int64_t py =
        py0 - static_cast<int64_t>(std::lround((y - ymin) / (ymax - ymin) * (py0 - py1)));
    return std::pair<int64_t, int64_t>{py, px};
  };

  // grid + ticks
  for (int t = 0; t <= 5; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 5.0;
    const double yv = ymin + (ymax - ymin) * t / 5.0;
    auto [tyx, txx] = to_px(xv, ymin);
    draw_line(img, py1, txx, py0, txx, grid);
    draw_text(img, py0 + 8, txx - 12, format_tick(xv), axis);
    auto [tyy, txy] = to_px(xmin, yv);
    draw_line(img, tyy, px0, tyy, px1, grid);
    draw_text(img, tyy - 3, 8, format_tick(yv), axis);
  }
  draw_line(img, py0, px0, py0, px1, axis);
  draw_line(img, py0, px0, py1, px0, axis);

  // series
  for (size_t si = 0; si < series.size(); ++si) {
    const Color c = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    const auto& pts = series[si].points;
    for (size_t i = 1; i < pts.size(); ++i) {
      auto [y0, x0] = to_px(pts[i - 1].first, pts[i - 1].second);
      auto [y1, x1] = to_px(pts[i].first, pts[i].second);
      draw_line(img, y0, x0, y1, x1, c);
      draw_line(img, y0 + 1, x0, y1 + 1, x1, c);  // 2px stroke
    }
    // legend swatch (title text is limited to the bitmap charset; series
    // names render digits/dots only, which suits seed/fraction labels)
    const int64_t ly = mt + static_cast<int64_t>(si) * 12;
    draw_line(img, ly, px1 - 120, ly, px1 - 100, c);
    draw_line(img, ly + 1, px1 - 120, ly + 1, px1 - 100, c);
    draw_text(img, ly - 3, px1 - 95, series[si].name, axis);
  }
  draw_text(img, 8, ml, title, axis);
  return img;
}

}  // namespace deepi2i
