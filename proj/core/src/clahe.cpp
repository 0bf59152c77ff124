#include <algorithm>
#include <cmath>

#include "sclera/augment.hpp"
#include "sclera/error.hpp"

namespace sclera::aug {

namespace {

inline int to_bin(float v) {
  const int b = static_cast<int>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  return std::clamp(b, 0, 255);
}

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * n - 2 - i;
  return i;
}

struct TileGeometry {
  int grid, tile_h, tile_w;
};

TileGeometry geometry(const cv::Mat& img, int grid) {
  if (grid < 1) throw ConfigError("CLAHE grid must be >= 1");
  if (grid > img.rows || grid > img.cols)
    throw ConfigError("CLAHE grid " + std::to_string(grid) + " exceeds image size " + std::to_string(img.cols) +
                      "x" + std::to_string(img.rows));
  return {grid, (img.rows + grid - 1) / grid, (img.cols + grid - 1) / grid};
}

void check_input(const cv::Mat& img, double clip) {
  if (img.type() != CV_32FC1) throw ShapeError("apply_clahe expects a CV_32FC1 luminance image");
  if (!(clip >= 1.0)) throw ConfigError("CLAHE clip limit must be >= 1");
}

}  // namespace

int clahe_clip_limit(double clip, int tile_pixels) {
  return std::max(1, static_cast<int>(clip * tile_pixels / 256.0));
}

Histogram clip_histogram(const Histogram& hist, int limit) {
  Histogram out = hist;
  long excess = 0;
  for (auto& h : out) {
    if (h > limit) {
      excess += h - limit;
      h = limit;
    }
  }
  const long batch = excess / 256;
  long residual = excess - batch * 256;
  for (auto& h : out) h += static_cast<int>(batch);
  if (residual > 0) {
    const long step = std::max<long>(256 / residual, 1);
    for (long i = 0; i < 256 && residual > 0; i += step, --residual) ++out[static_cast<std::size_t>(i)];
  }
  return out;
}

ClaheTiles clahe_tile_histograms(const cv::Mat& luminance, double clip, int grid) {
  check_input(luminance, clip);
  const auto geo = geometry(luminance, grid);
  ClaheTiles tiles;
  tiles.grid = grid;
  tiles.tile_height = geo.tile_h;
  tiles.tile_width = geo.tile_w;
  tiles.clipped.resize(static_cast<std::size_t>(grid * grid));
  tiles.flat.resize(static_cast<std::size_t>(grid * grid));
  const int limit = clahe_clip_limit(clip, geo.tile_h * geo.tile_w);

  for (int ty = 0; ty < grid; ++ty) {
    for (int tx = 0; tx < grid; ++tx) {
      Histogram hist{};
      for (int y = ty * geo.tile_h; y < (ty + 1) * geo.tile_h; ++y) {
        const float* row = luminance.ptr<float>(reflect101(y, luminance.rows));
        for (int x = tx * geo.tile_w; x < (tx + 1) * geo.tile_w; ++x) ++hist[to_bin(row[reflect101(x, luminance.cols)])];
      }
      const auto t = static_cast<std::size_t>(ty * grid + tx);
      tiles.flat[t] = std::count_if(hist.begin(), hist.end(), [](int h) { return h > 0; }) == 1;
      tiles.clipped[t] = clip_histogram(hist, limit);
    }
  }
  return tiles;
}

cv::Mat apply_clahe(const cv::Mat& luminance, double clip, int grid) {
  const ClaheTiles tiles = clahe_tile_histograms(luminance, clip, grid);
  const auto n_tiles = tiles.clipped.size();
  const float inv_pixels = 1.0f / static_cast<float>(tiles.tile_pixels());

  std::vector<std::array<float, 256>> lut(n_tiles);
  for (std::size_t t = 0; t < n_tiles; ++t) {
    long cum = 0;
    for (int b = 0; b < 256; ++b) {
      cum += tiles.clipped[t][static_cast<std::size_t>(b)];
      lut[t][static_cast<std::size_t>(b)] = std::min(1.0f, static_cast<float>(cum) * inv_pixels);
    }
  }

  // Tile t is centred on pixel coordinate (t + 0.5) * tile_size - 0.5.
  auto neighbours = [grid](int p, int tile_size, int& lo, int& hi, float& frac) {
    const float f = (static_cast<float>(p) + 0.5f) / static_cast<float>(tile_size) - 0.5f;
    const int base = static_cast<int>(std::floor(f));
    frac = f - static_cast<float>(base);
    lo = std::clamp(base, 0, grid - 1);
    hi = std::clamp(base + 1, 0, grid - 1);
  };

  cv::Mat out(luminance.size(), CV_32FC1);
  for (int y = 0; y < luminance.rows; ++y) {
    int ty1, ty2;
    float ya;
    neighbours(y, tiles.tile_height, ty1, ty2, ya);
    const float* src = luminance.ptr<float>(y);
    float* dst = out.ptr<float>(y);
    for (int x = 0; x < luminance.cols; ++x) {
      int tx1, tx2;
      float xa;
      neighbours(x, tiles.tile_width, tx1, tx2, xa);
      const auto b = static_cast<std::size_t>(to_bin(src[x]));
      auto map = [&](int ty, int tx) {
        const auto t = static_cast<std::size_t>(ty * grid + tx);
        return tiles.flat[t] ? src[x] : lut[t][b];
      };
      const float v11 = map(ty1, tx1);
      const float v12 = map(ty1, tx2);
      const float v21 = map(ty2, tx1);
      const float v22 = map(ty2, tx2);
      const float top = v11 + xa * (v12 - v11);
      const float bottom = v21 + xa * (v22 - v21);
      dst[x] = std::clamp(top + ya * (bottom - top), 0.0f, 1.0f);
    }
  }
  return out;
}

cv::Mat apply_clahe_color(const cv::Mat& image, double clip, int grid) {
  if (image.type() == CV_32FC1) return apply_clahe(image, clip, grid);
  if (image.type() != CV_32FC3) throw ShapeError("apply_clahe_color expects CV_32FC1 or CV_32FC3");

  cv::Mat luma(image.size(), CV_32FC1);
  for (int y = 0; y < image.rows; ++y) {
    const auto* px = image.ptr<cv::Vec3f>(y);
    auto* l = luma.ptr<float>(y);
    for (int x = 0; x < image.cols; ++x) l[x] = 0.299f * px[x][0] + 0.587f * px[x][1] + 0.114f * px[x][2];
  }
  const cv::Mat eq = apply_clahe(luma, clip, grid);

  cv::Mat out(image.size(), CV_32FC3);
  for (int y = 0; y < image.rows; ++y) {
    const auto* px = image.ptr<cv::Vec3f>(y);
    const auto* l = luma.ptr<float>(y);
    const auto* e = eq.ptr<float>(y);
    auto* o = out.ptr<cv::Vec3f>(y);
    for (int x = 0; x < image.cols; ++x) {
      if (l[x] < 1e-6f) {
        o[x] = cv::Vec3f(e[x], e[x], e[x]);
        continue;
      }
      const float gain = e[x] / l[x];
      for (int c = 0; c < 3; ++c) o[x][c] = std::clamp(px[x][c] * gain, 0.0f, 1.0f);
    }
  }
  return out;
}

}  // namespace sclera::aug
