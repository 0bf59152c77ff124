#pragma once

#include <torch/types.h>

#include "sclera/rng.hpp"

namespace sclera::xform {

/// Rigid transform about the image centre: rotation by `rotate_deg` and an
/// integer translation (dx, dy) in pixels.
///
/// The forward transform rotates first and then translates. `inverse()`
/// negates both parameters and flips the order, so the inverse of a forward
/// transform undoes the translation before the rotation.
struct SpatialTransform {
  double rotate_deg = 0.0;
  int dx = 0;
  int dy = 0;
  bool applied_rotation = false;
  bool applied_translation = false;
  bool translate_first = false;

  SpatialTransform inverse() const;
  bool is_identity() const { return rotate_deg == 0.0 && dx == 0 && dy == 0; }
};

struct TransformRanges {
  double max_rotate_deg = 5.0;
  int max_translate_px = 20;
};

/// Rotation is included with probability p1 (angle uniform in the range),
/// translation with probability p2 (integer offsets uniform in the range).
SpatialTransform sample_transform(Rng& rng, double p1, double p2, const TransformRanges& ranges = {});

enum class Interp { Bilinear, Nearest };

/// Resampled field and the indicator of output pixels whose source lies in frame.
struct Warped {
  torch::Tensor field;     ///< same shape and dtype as the input
  torch::Tensor validity;  ///< HxW bool
};

/// Warps a [..., H, W] field. Out-of-frame pixels are zero and invalid.
/// Differentiable with respect to `field`.
Warped apply(const SpatialTransform& t, const torch::Tensor& field, Interp interp = Interp::Bilinear);

/// Same as apply(t.inverse(), field).
Warped apply_inverse(const SpatialTransform& t, const torch::Tensor& field, Interp interp = Interp::Bilinear);

/// Pixels of the original frame that survive apply followed by apply_inverse
/// with every bilinear tap drawn from valid pixels.
torch::Tensor round_trip_validity(const SpatialTransform& t, int64_t height, int64_t width);

/// Source coordinates (x, y) sampled by output pixel (x_out, y_out); exposed for tests.
std::pair<double, double> source_coordinate(const SpatialTransform& t, double x_out, double y_out,
                                            int64_t height, int64_t width);

}  // namespace sclera::xform
