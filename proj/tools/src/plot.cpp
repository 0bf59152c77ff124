#include "sclera_cli/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <opencv2/imgproc.hpp>

namespace sclera::cli {

namespace {

const cv::Scalar kPalette[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214},
                               {189, 103, 148}, {75, 86, 140}, {194, 119, 227}, {127, 127, 127}};

// Round tick spacing (1, 2 or 5 times a power of ten) giving about `target` ticks.
double tick_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0})
    if (m * mag >= raw) return m * mag;
  return 10 * mag;
}

std::string format_tick(double v, double step) {
  char buf[32];
  const int decimals = step >= 1 ? 0 : static_cast<int>(std::ceil(-std::log10(step) - 1e-9));
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

}  // namespace

cv::Mat line_plot(const std::vector<Series>& series, const PlotOptions& o) {
  cv::Mat img(o.height, o.width, CV_8UC3, cv::Scalar(255, 255, 255));
  const int left = 70, right = 20, top = 40, bottom = 60;
  const cv::Rect area(left, top, o.width - left - right, o.height - top - bottom);

  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : series) {
    for (double v : s.x) x_lo = std::min(x_lo, v), x_hi = std::max(x_hi, v);
    for (double v : s.y) y_lo = std::min(y_lo, v), y_hi = std::max(y_hi, v);
  }
  if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  if (x_hi <= x_lo) x_lo -= 0.5, x_hi += 0.5;
  if (o.y_lo < o.y_hi) {
    y_lo = o.y_lo, y_hi = o.y_hi;
  } else {
    const double pad = std::max(1e-6, 0.05 * (y_hi - y_lo));
    y_lo -= pad, y_hi += pad;
  }

  auto px = [&](double x, double y) {
    return cv::Point(area.x + static_cast<int>(std::lround((x - x_lo) / (x_hi - x_lo) * area.width)),
                     area.y + area.height - static_cast<int>(std::lround((y - y_lo) / (y_hi - y_lo) * area.height)));
  };

  const auto font = cv::FONT_HERSHEY_SIMPLEX;
  const cv::Scalar grid(225, 225, 225), ink(40, 40, 40);
  const double ys = tick_step(y_hi - y_lo, 5);
  for (double y = std::ceil(y_lo / ys) * ys; y <= y_hi + 1e-9; y += ys) {
    const auto p = px(x_lo, y);
    cv::line(img, p, {area.x + area.width, p.y}, grid, 1);
    cv::putText(img, format_tick(y, ys), {30, p.y + 5}, font, 0.45, ink, 1, cv::LINE_AA);
  }
  const double xs = tick_step(x_hi - x_lo, 6);
  for (double x = std::ceil(x_lo / xs) * xs; x <= x_hi + 1e-9; x += xs) {
    const auto p = px(x, y_lo);
    cv::line(img, p, {p.x, area.y}, grid, 1);
    cv::putText(img, format_tick(x, xs), {p.x - 10, p.y + 20}, font, 0.45, ink, 1, cv::LINE_AA);
  }
  cv::rectangle(img, area, ink, 1);

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const auto colour = kPalette[i % std::size(kPalette)];
    std::vector<cv::Point> pts;
    for (std::size_t j = 0; j < std::min(s.x.size(), s.y.size()); ++j) pts.push_back(px(s.x[j], s.y[j]));
    if (pts.size() > 1) cv::polylines(img, pts, false, colour, 2, cv::LINE_AA);
    if (pts.size() <= 30)
      for (const auto& p : pts) cv::circle(img, p, 4, colour, cv::FILLED, cv::LINE_AA);
    const cv::Point key(area.x + 12, area.y + 18 + 20 * static_cast<int>(i));
    cv::line(img, key, key + cv::Point(24, 0), colour, 3);
    cv::putText(img, s.name, key + cv::Point(32, 5), font, 0.45, ink, 1, cv::LINE_AA);
  }

  cv::putText(img, o.title, {left, 26}, font, 0.6, ink, 1, cv::LINE_AA);
  cv::putText(img, o.x_label, {area.x + area.width / 2 - 30, o.height - 15}, font, 0.5, ink, 1, cv::LINE_AA);
  cv::Mat ylab(24, area.height, CV_8UC3, cv::Scalar(255, 255, 255));
  cv::putText(ylab, o.y_label, {area.height / 2 - 30, 17}, font, 0.5, ink, 1, cv::LINE_AA);
  cv::rotate(ylab, ylab, cv::ROTATE_90_COUNTERCLOCKWISE);
  ylab.copyTo(img(cv::Rect(left - 68, area.y, 24, area.height)));
  return img;
}

}  // namespace sclera::cli
