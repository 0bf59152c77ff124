// Exact Euclidean distance transform (lower envelope of parabolas, applied
// per column then per row).
#include <cmath>
#include <limits>
#include <vector>

#include <opencv2/core.hpp>

#include "sclera/error.hpp"
#include "sclera/losses.hpp"

namespace sclera::loss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Squared distance transform of a 1-D sampled function f (kInf = no site).
void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[static_cast<std::size_t>(q)] == kInf) continue;
    while (k >= 0) {
      const int p = v[static_cast<std::size_t>(k)];
      const double s = ((f[static_cast<std::size_t>(q)] + q * static_cast<double>(q)) -
                        (f[static_cast<std::size_t>(p)] + p * static_cast<double>(p))) /
                       (2.0 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
        continue;
      }
      ++k;
      v[static_cast<std::size_t>(k)] = q;
      z[static_cast<std::size_t>(k)] = s;
      z[static_cast<std::size_t>(k) + 1] = kInf;
      break;
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
    }
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j) + 1] < q) ++j;
    const int p = v[static_cast<std::size_t>(j)];
    d[static_cast<std::size_t>(q)] = (q - p) * static_cast<double>(q - p) + f[static_cast<std::size_t>(p)];
  }
}

void check_mask(const cv::Mat& m) {
  if (m.type() != CV_8UC1) throw ShapeError("mask must be CV_8UC1");
}

}  // namespace

cv::Mat mask_boundary(const cv::Mat& mask01) {
  check_mask(mask01);
  cv::Mat out = cv::Mat::zeros(mask01.size(), CV_8UC1);
  const int H = mask01.rows, W = mask01.cols;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (!mask01.at<std::uint8_t>(y, x)) continue;
      const bool edge = (x > 0 && !mask01.at<std::uint8_t>(y, x - 1)) ||
                        (x + 1 < W && !mask01.at<std::uint8_t>(y, x + 1)) ||
                        (y > 0 && !mask01.at<std::uint8_t>(y - 1, x)) ||
                        (y + 1 < H && !mask01.at<std::uint8_t>(y + 1, x));
      out.at<std::uint8_t>(y, x) = edge ? 1 : 0;
    }
  }
  return out;
}

cv::Mat boundary_distance(const cv::Mat& mask01) {
  const cv::Mat boundary = mask_boundary(mask01);
  const int H = boundary.rows, W = boundary.cols;
  cv::Mat sq(H, W, CV_64FC1);

  std::vector<double> f(static_cast<std::size_t>(H)), d(static_cast<std::size_t>(H));
  for (int x = 0; x < W; ++x) {
    for (int y = 0; y < H; ++y) f[static_cast<std::size_t>(y)] = boundary.at<std::uint8_t>(y, x) ? 0.0 : kInf;
    edt_1d(f, d);
    for (int y = 0; y < H; ++y) sq.at<double>(y, x) = d[static_cast<std::size_t>(y)];
  }
  f.resize(static_cast<std::size_t>(W));
  d.resize(static_cast<std::size_t>(W));
  for (int y = 0; y < H; ++y) {
    auto* row = sq.ptr<double>(y);
    for (int x = 0; x < W; ++x) f[static_cast<std::size_t>(x)] = row[x];
    edt_1d(f, d);
    for (int x = 0; x < W; ++x) row[x] = std::sqrt(d[static_cast<std::size_t>(x)]);
  }
  return sq;
}

}  // namespace sclera::loss
