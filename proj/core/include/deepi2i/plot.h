#pragma once

#include <string>
#include <vector>

#include "deepi2i/image.h"

namespace deepi2i {

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

/// Renders a simple line chart (axes, ticks, legend) to an RGB image.
/// Batch-friendly output for training-curve emission.
ImageU8 line_chart(const std::vector<PlotSeries>& series, const std::string& title,
                   int64_t width = 900, int64_t height = 540);

}  // namespace deepi2i
