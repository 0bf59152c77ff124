#pragma once

#include <string>
#include <vector>

#include <opencv2/core.hpp>

namespace sclera::cli {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  /// Fixed y range; when lo >= hi the range is fitted to the data.
  double y_lo = 0;
  double y_hi = 0;
  int width = 720;
  int height = 480;
};

/// Line chart with markers, axis ticks and a legend. Returns a BGR 8-bit image.
cv::Mat line_plot(const std::vector<Series>& series, const PlotOptions& options);

}  // namespace sclera::cli
