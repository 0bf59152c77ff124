#pragma once

#include <vector>

#include <opencv2/core.hpp>
#include <torch/types.h>

#include "sclera/augment.hpp"
#include "sclera/metrics.hpp"
#include "sclera/rng.hpp"
#include "sclera/spatial_transform.hpp"

namespace sclera::ssl {

using metrics::Predictor;

enum class GuessSource { Ssld, SslSs };

/// Averaged softmax map used as a constant consistency target.
struct GuessedLabel {
  torch::Tensor probs;     ///< [P, H, W]
  torch::Tensor validity;  ///< [H, W] bool; all true for Ssld
  GuessSource source = GuessSource::Ssld;
};

/// Mean of k predictions [k, P, H, W] of augmented copies of one image.
GuessedLabel average_predictions(const torch::Tensor& predictions);

struct InverseWarpedAverage {
  GuessedLabel label;
  /// Per-copy round-trip validity, [k, H, W] bool.
  torch::Tensor copy_validity;
};

/// Warps each prediction of a transformed copy back with its inverse
/// transform and averages, per pixel, over the copies valid there. The label
/// is valid wherever at least one copy is.
InverseWarpedAverage average_inverse_warped(const torch::Tensor& predictions,
                                            const std::vector<xform::SpatialTransform>& transforms);

/// Stacks images into a [k, C, H, W] tensor.
torch::Tensor stack_images(const std::vector<cv::Mat>& images);

/// Applies each transform to the matching copy ([k, C, H, W]); out-of-frame pixels are 0.
torch::Tensor transform_copies(const torch::Tensor& copies, const std::vector<xform::SpatialTransform>& transforms);

struct SsldGuess {
  GuessedLabel label;
  torch::Tensor copies;  ///< augmented copies, [k, C, H, W]
};

/// k domain-augmented copies, predicted without gradient and averaged.
SsldGuess guess_labels_ssld(const Predictor& predictor, const cv::Mat& image, int k, Rng& rng,
                            const aug::AugmentConfig& augment = {});

struct SslSsGuess {
  GuessedLabel label;
  torch::Tensor copies;       ///< augmented copies before the spatial transform
  torch::Tensor transformed;  ///< copies after their transform, [k, C, H, W]
  std::vector<xform::SpatialTransform> transforms;
  torch::Tensor copy_validity;  ///< [k, H, W]
};

/// Augments k copies (same draws as guess_labels_ssld), gives each an
/// independent transform, predicts, warps back and averages.
SslSsGuess guess_labels_sslss(const Predictor& predictor, const cv::Mat& image, int k, Rng& rng, double p1,
                              double p2, const aug::AugmentConfig& augment = {},
                              const xform::TransformRanges& ranges = {});

}  // namespace sclera::ssl
