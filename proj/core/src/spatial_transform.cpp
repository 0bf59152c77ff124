#include "sclera/spatial_transform.hpp"

#include <cmath>

#include <torch/torch.h>

#include "sclera/error.hpp"

namespace sclera::xform {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kFrameEps = 1e-9;

}  // namespace

SpatialTransform SpatialTransform::inverse() const {
  SpatialTransform inv = *this;
  inv.rotate_deg = -rotate_deg;
  inv.dx = -dx;
  inv.dy = -dy;
  inv.translate_first = !translate_first;
  return inv;
}

SpatialTransform sample_transform(Rng& rng, double p1, double p2, const TransformRanges& ranges) {
  if (p1 < 0.0 || p1 > 1.0 || p2 < 0.0 || p2 > 1.0) throw ConfigError("transform probabilities must lie in [0,1]");
  SpatialTransform t;
  if (bernoulli(rng, p1)) {
    t.applied_rotation = true;
    t.rotate_deg = uniform(rng, -ranges.max_rotate_deg, ranges.max_rotate_deg);
  }
  if (bernoulli(rng, p2)) {
    t.applied_translation = true;
    t.dx = static_cast<int>(uniform_int(rng, -ranges.max_translate_px, ranges.max_translate_px));
    t.dy = static_cast<int>(uniform_int(rng, -ranges.max_translate_px, ranges.max_translate_px));
  }
  return t;
}

std::pair<double, double> source_coordinate(const SpatialTransform& t, double x, double y, int64_t height,
                                            int64_t width) {
  // Forward map p' = R(p - c) + c (+ d, before or after). The sampler needs
  // the inverse map from output to source.
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double theta = t.rotate_deg * kPi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  auto unrotate = [&](double px, double py) {
    const double ux = px - cx, uy = py - cy;
    return std::pair{c * ux + s * uy + cx, -s * ux + c * uy + cy};
  };
  if (t.translate_first) {
    auto [rx, ry] = unrotate(x, y);
    return {rx - t.dx, ry - t.dy};
  }
  return unrotate(x - t.dx, y - t.dy);
}

namespace {

struct SamplingPlan {
  torch::Tensor idx[4];     // flat source index per tap, int64 [H*W]
  torch::Tensor weight[4];  // double [H*W]
  torch::Tensor validity;   // bool [H, W]
};

SamplingPlan plan(const SpatialTransform& t, int64_t H, int64_t W, Interp interp) {
  SamplingPlan p;
  const int64_t n = H * W;
  for (int k = 0; k < 4; ++k) {
    p.idx[k] = torch::zeros({n}, torch::kInt64);
    p.weight[k] = torch::zeros({n}, torch::kFloat64);
  }
  p.validity = torch::zeros({H, W}, torch::kBool);
  int64_t* idx[4];
  double* w[4];
  for (int k = 0; k < 4; ++k) {
    idx[k] = p.idx[k].data_ptr<int64_t>();
    w[k] = p.weight[k].data_ptr<double>();
  }
  bool* valid = p.validity.data_ptr<bool>();

  for (int64_t y = 0; y < H; ++y) {
    for (int64_t x = 0; x < W; ++x) {
      const int64_t o = y * W + x;
      auto [sx, sy] = source_coordinate(t, static_cast<double>(x), static_cast<double>(y), H, W);
      if (sx < -kFrameEps || sy < -kFrameEps || sx > W - 1 + kFrameEps || sy > H - 1 + kFrameEps) continue;
      valid[o] = true;
      sx = std::clamp(sx, 0.0, static_cast<double>(W - 1));
      sy = std::clamp(sy, 0.0, static_cast<double>(H - 1));
      if (interp == Interp::Nearest) {
        const auto nx = static_cast<int64_t>(std::lround(sx));
        const auto ny = static_cast<int64_t>(std::lround(sy));
        idx[0][o] = ny * W + nx;
        w[0][o] = 1.0;
        continue;
      }
      const auto x0 = static_cast<int64_t>(std::floor(sx));
      const auto y0 = static_cast<int64_t>(std::floor(sy));
      const int64_t x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
      const double fx = sx - static_cast<double>(x0), fy = sy - static_cast<double>(y0);
      idx[0][o] = y0 * W + x0;
      idx[1][o] = y0 * W + x1;
      idx[2][o] = y1 * W + x0;
      idx[3][o] = y1 * W + x1;
      w[0][o] = (1 - fx) * (1 - fy);
      w[1][o] = fx * (1 - fy);
      w[2][o] = (1 - fx) * fy;
      w[3][o] = fx * fy;
    }
  }
  return p;
}

}  // namespace

Warped apply(const SpatialTransform& t, const torch::Tensor& field, Interp interp) {
  if (field.dim() < 2) throw ShapeError("spatial transform expects a [..., H, W] field");
  const int64_t H = field.size(-2), W = field.size(-1);
  if (t.is_identity()) return {field, torch::ones({H, W}, torch::kBool)};

  const SamplingPlan p = plan(t, H, W, interp);
  auto flat = field.flatten(-2);  // [..., H*W]
  const auto opts = field.options();
  const int taps = interp == Interp::Nearest ? 1 : 4;
  torch::Tensor out;
  for (int k = 0; k < taps; ++k) {
    auto term = flat.index_select(-1, p.idx[k].to(field.device())) * p.weight[k].to(opts);
    out = k == 0 ? term : out + term;
  }
  return {out.view(field.sizes()), p.validity};
}

Warped apply_inverse(const SpatialTransform& t, const torch::Tensor& field, Interp interp) {
  return apply(t.inverse(), field, interp);
}

torch::Tensor round_trip_validity(const SpatialTransform& t, int64_t height, int64_t width) {
  if (t.is_identity()) return torch::ones({height, width}, torch::kBool);
  const auto forward_valid = apply(t, torch::ones({height, width}, torch::kFloat64)).validity;
  auto back = apply_inverse(t, forward_valid.to(torch::kFloat64));
  return back.validity & (back.field >= 1.0 - 1e-9);
}

}  // namespace sclera::xform
