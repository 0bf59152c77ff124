// Reference implementations used only by tests. Each one is written for
// clarity rather than speed and shares no code with the library.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "sclera/metrics.hpp"

namespace sclera::oracle {

inline metrics::ConfusionCounts confusion(const cv::Mat& pred, const cv::Mat& gt) {
  metrics::ConfusionCounts c;
  for (int y = 0; y < pred.rows; ++y) {
    for (int x = 0; x < pred.cols; ++x) {
      const bool p = pred.at<unsigned char>(y, x) != 0;
      const bool g = gt.at<unsigned char>(y, x) != 0;
      if (p && g) ++c.tp;
      else if (p) ++c.fp;
      else if (g) ++c.fn;
      else ++c.tn;
    }
  }
  return c;
}

// Straightforward CLAHE: every pixel looks up all tiles and weights them by
// tent functions around the tile centres.
inline cv::Mat clahe(const cv::Mat& img, double clip, int grid) {
  const int th = (img.rows + grid - 1) / grid;
  const int tw = (img.cols + grid - 1) / grid;
  const int n = th * tw;
  auto mirror = [](int i, int size) {
    if (size == 1) return 0;
    const int period = 2 * size - 2;
    i = ((i % period) + period) % period;
    return i < size ? i : period - i;
  };
  auto bin = [](float v) { return static_cast<int>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); };

  const int limit = std::max(1, static_cast<int>(clip * n / 256.0));
  std::vector<std::array<double, 256>> maps(static_cast<std::size_t>(grid * grid));
  std::vector<bool> flat(static_cast<std::size_t>(grid * grid));
  for (int ty = 0; ty < grid; ++ty) {
    for (int tx = 0; tx < grid; ++tx) {
      std::array<int, 256> h{};
      for (int y = 0; y < th; ++y)
        for (int x = 0; x < tw; ++x) ++h[bin(img.at<float>(mirror(ty * th + y, img.rows), mirror(tx * tw + x, img.cols)))];
      int occupied = 0, excess = 0;
      for (int b = 0; b < 256; ++b) {
        occupied += h[b] > 0;
        excess += std::max(0, h[b] - limit);
      }
      const int each = excess / 256;
      const int rest = excess % 256;
      const int step = rest > 0 ? std::max(1, 256 / rest) : 1;
      int cum = 0;
      auto& m = maps[static_cast<std::size_t>(ty * grid + tx)];
      for (int b = 0; b < 256; ++b) {
        const bool bonus = rest > 0 && b % step == 0 && b / step < rest;
        cum += std::min(h[b], limit) + each + (bonus ? 1 : 0);
        m[b] = std::min(1.0, static_cast<double>(cum) / n);
      }
      flat[static_cast<std::size_t>(ty * grid + tx)] = occupied == 1;
    }
  }

  auto tent = [grid](int p, int size, int t) {
    const double f = std::clamp((p + 0.5) / size - 0.5, 0.0, static_cast<double>(grid - 1));
    return std::max(0.0, 1.0 - std::abs(f - t));
  };
  cv::Mat out(img.size(), CV_32FC1);
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) {
      const float v = img.at<float>(y, x);
      double acc = 0;
      for (int ty = 0; ty < grid; ++ty) {
        for (int tx = 0; tx < grid; ++tx) {
          const double w = tent(y, th, ty) * tent(x, tw, tx);
          if (w == 0) continue;
          const auto t = static_cast<std::size_t>(ty * grid + tx);
          acc += w * (flat[t] ? v : maps[t][static_cast<std::size_t>(bin(v))]);
        }
      }
      out.at<float>(y, x) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
    }
  }
  return out;
}

// Distance from every pixel to the nearest inner-contour pixel by checking
// all pairs. Contour pixels are foreground with a 4-neighbour in background
// (outside the image counts as neither).
inline cv::Mat all_pairs_distance(const cv::Mat& mask) {
  std::vector<cv::Point> contour;
  for (int y = 0; y < mask.rows; ++y) {
    for (int x = 0; x < mask.cols; ++x) {
      if (!mask.at<unsigned char>(y, x)) continue;
      const int dy[] = {-1, 1, 0, 0}, dx[] = {0, 0, -1, 1};
      for (int i = 0; i < 4; ++i) {
        const int yy = y + dy[i], xx = x + dx[i];
        if (yy >= 0 && yy < mask.rows && xx >= 0 && xx < mask.cols && !mask.at<unsigned char>(yy, xx)) {
          contour.emplace_back(x, y);
          break;
        }
      }
    }
  }
  cv::Mat d(mask.size(), CV_64FC1, cv::Scalar(std::numeric_limits<double>::infinity()));
  for (int y = 0; y < mask.rows; ++y)
    for (int x = 0; x < mask.cols; ++x)
      for (const auto& c : contour) d.at<double>(y, x) = std::min(d.at<double>(y, x), std::hypot(x - c.x, y - c.y));
  return d;
}

// Central differences of a scalar function of one double tensor.
inline torch::Tensor finite_difference(const std::function<torch::Tensor(const torch::Tensor&)>& f,
                                       const torch::Tensor& x, double h = 1e-6) {
  auto xc = x.detach().clone();
  auto grad = torch::zeros_like(xc);
  auto flat = xc.view({-1});
  auto g = grad.view({-1});
  torch::NoGradGuard guard;
  for (int64_t i = 0; i < flat.numel(); ++i) {
    const double v = flat[i].item<double>();
    flat[i] = v + h;
    const double up = f(xc).item<double>();
    flat[i] = v - h;
    const double down = f(xc).item<double>();
    flat[i] = v;
    g[i] = (up - down) / (2 * h);
  }
  return grad;
}

// max |a - b| / max(|b|, floor), elementwise.
inline double relative_error(const torch::Tensor& a, const torch::Tensor& b, double floor = 1e-3) {
  const auto denom = b.abs().clamp_min(floor);
  return ((a - b).abs() / denom).max().item<double>();
}

}  // namespace sclera::oracle
