#pragma once

#include <array>
#include <vector>

#include <opencv2/core.hpp>

#include "sclera/data_pipeline.hpp"
#include "sclera/rng.hpp"

namespace sclera::aug {

/// Photometric augmentation parameters. Neutral values leave an image unchanged.
struct AugmentParams {
  bool clahe = false;
  double clahe_clip = 1.0;
  int clahe_grid = 8;
  double gamma = 1.0;
  double contrast = 1.0;
  double brightness = 0.0;

  bool neutral() const { return !clahe && gamma == 1.0 && contrast == 1.0 && brightness == 0.0; }
};

enum class AugmentMode { Labeled, Unlabeled };

/// Sampling distribution for domain-specific augmentation.
///
/// CLAHE clip limits and grid sizes are drawn as a pair from the same index;
/// gamma is drawn from gamma_min..gamma_max in gamma_step increments.
struct AugmentConfig {
  std::vector<double> clahe_clips{1.0, 1.2, 1.5, 1.5, 1.5, 2.0};
  std::vector<int> clahe_grids{2, 4, 8, 8, 8, 16};
  double gamma_min = 0.80;
  double gamma_max = 1.20;
  double gamma_step = 0.05;
  double contrast_min = 0.8;
  double contrast_max = 1.2;
  double brightness_min = -0.1;
  double brightness_max = 0.1;
  double p_clahe = 0.5;
  double p_gamma = 0.5;
  double p_contrast = 0.5;
  /// Default order applies CLAHE first, then gamma, then contrast/brightness.
  bool gamma_before_clahe = false;

  void validate() const;
  /// All probabilities zero: every draw is neutral.
  static AugmentConfig none();
};

using Histogram = std::array<int, 256>;

/// Integer clip limit for one tile: max(1, floor(clip * tile_pixels / 256)).
int clahe_clip_limit(double clip, int tile_pixels);

/// Clips a histogram at `limit` and spreads the excess once over all bins.
/// The total count is preserved exactly.
Histogram clip_histogram(const Histogram& hist, int limit);

/// Per-tile clipped histograms, row-major over the grid. Used to inspect the
/// intermediate state of apply_clahe.
struct ClaheTiles {
  int grid = 0;
  int tile_height = 0;
  int tile_width = 0;
  std::vector<Histogram> clipped;
  /// Tiles whose raw histogram occupies a single bin. They carry no contrast
  /// to redistribute and map every value to itself.
  std::vector<bool> flat;

  int tile_pixels() const { return tile_height * tile_width; }
};
ClaheTiles clahe_tile_histograms(const cv::Mat& luminance, double clip, int grid);

/// Contrast-limited adaptive histogram equalization of a CV_32FC1 image in [0,1].
/// Edge tiles are filled by reflection when the grid does not divide the image.
/// Flat tiles pass values through, so a constant image is returned unchanged.
cv::Mat apply_clahe(const cv::Mat& luminance, double clip, int grid);

/// CLAHE on a 1- or 3-channel image. RGB input is equalized on its luma and the
/// channels are rescaled by the luma gain, which keeps chromatic ratios.
cv::Mat apply_clahe_color(const cv::Mat& image, double clip, int grid);

/// out = in^gamma, gamma > 0.
cv::Mat apply_gamma(const cv::Mat& image, double gamma);

/// out = clamp(contrast * (in - 0.5) + 0.5 + brightness, 0, 1).
cv::Mat adjust_contrast_brightness(const cv::Mat& image, double contrast, double brightness);

/// Paired (clip, grid) entry `index` of the configured lists.
AugmentParams clahe_pair(const AugmentConfig& config, std::size_t index);

/// Draws parameters. Labeled mode only ever enables CLAHE; gamma, contrast
/// and brightness stay neutral.
AugmentParams sample_domain_augmentation(Rng& rng, AugmentMode mode, const AugmentConfig& config = {});

cv::Mat apply_augmentation(const cv::Mat& image, const AugmentParams& params, const AugmentConfig& config = {});

/// k independently augmented copies of the sample image. Masks are never touched.
std::vector<cv::Mat> augment_k(const data::ImageSample& sample, int k, Rng& rng,
                               AugmentMode mode = AugmentMode::Unlabeled, const AugmentConfig& config = {});

}  // namespace sclera::aug
