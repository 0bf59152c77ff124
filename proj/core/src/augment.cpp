#include <cmath>

#include "sclera/augment.hpp"
#include "sclera/error.hpp"

namespace sclera::aug {

void AugmentConfig::validate() const {
  if (clahe_clips.empty() || clahe_clips.size() != clahe_grids.size())
    throw ConfigError("CLAHE clip and grid lists must be non-empty and of equal length");
  for (double c : clahe_clips)
    if (c < 1.0) throw ConfigError("CLAHE clip limits must be >= 1");
  for (int g : clahe_grids)
    if (g < 1) throw ConfigError("CLAHE grid sizes must be >= 1");
  if (!(gamma_min > 0.0) || gamma_max < gamma_min || !(gamma_step > 0.0))
    throw ConfigError("gamma range must satisfy 0 < min <= max with a positive step");
  if (contrast_max < contrast_min || brightness_max < brightness_min)
    throw ConfigError("contrast/brightness ranges are inverted");
  for (double p : {p_clahe, p_gamma, p_contrast})
    if (p < 0.0 || p > 1.0) throw ConfigError("augmentation probabilities must lie in [0,1]");
}

AugmentConfig AugmentConfig::none() {
  AugmentConfig c;
  c.p_clahe = c.p_gamma = c.p_contrast = 0.0;
  return c;
}

cv::Mat apply_gamma(const cv::Mat& image, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (image.depth() != CV_32F) throw ShapeError("apply_gamma expects a float image");
  if (gamma == 1.0) return image.clone();
  cv::Mat out(image.size(), image.type());
  const int n = image.cols * image.channels();
  const auto g = static_cast<float>(gamma);
  for (int y = 0; y < image.rows; ++y) {
    const float* src = image.ptr<float>(y);
    float* dst = out.ptr<float>(y);
    for (int i = 0; i < n; ++i) dst[i] = std::pow(std::clamp(src[i], 0.0f, 1.0f), g);
  }
  return out;
}

cv::Mat adjust_contrast_brightness(const cv::Mat& image, double contrast, double brightness) {
  if (image.depth() != CV_32F) throw ShapeError("adjust_contrast_brightness expects a float image");
  cv::Mat out(image.size(), image.type());
  const int n = image.cols * image.channels();
  const auto c = static_cast<float>(contrast);
  const auto b = static_cast<float>(brightness);
  for (int y = 0; y < image.rows; ++y) {
    const float* src = image.ptr<float>(y);
    float* dst = out.ptr<float>(y);
    for (int i = 0; i < n; ++i) dst[i] = std::clamp(src[i] + (c - 1.0f) * (src[i] - 0.5f) + b, 0.0f, 1.0f);
  }
  return out;
}

AugmentParams clahe_pair(const AugmentConfig& config, std::size_t index) {
  if (index >= config.clahe_clips.size()) throw ConfigError("CLAHE parameter index out of range");
  AugmentParams p;
  p.clahe = true;
  p.clahe_clip = config.clahe_clips[index];
  p.clahe_grid = config.clahe_grids[index];
  return p;
}

AugmentParams sample_domain_augmentation(Rng& rng, AugmentMode mode, const AugmentConfig& config) {
  AugmentParams p;
  if (bernoulli(rng, config.p_clahe)) {
    const auto idx = uniform_int(rng, 0, static_cast<std::int64_t>(config.clahe_clips.size()) - 1);
    p = clahe_pair(config, static_cast<std::size_t>(idx));
  }
  if (mode == AugmentMode::Labeled) return p;

  if (bernoulli(rng, config.p_gamma)) {
    const auto steps = static_cast<std::int64_t>(std::floor((config.gamma_max - config.gamma_min) / config.gamma_step + 1e-9));
    const auto i = uniform_int(rng, 0, steps);
    // Round to the step grid so 0.80 + 4 * 0.05 is exactly 1.0.
    p.gamma = std::round((config.gamma_min + static_cast<double>(i) * config.gamma_step) * 1e6) / 1e6;
  }
  if (bernoulli(rng, config.p_contrast)) {
    p.contrast = uniform(rng, config.contrast_min, config.contrast_max);
    p.brightness = uniform(rng, config.brightness_min, config.brightness_max);
  }
  return p;
}

cv::Mat apply_augmentation(const cv::Mat& image, const AugmentParams& params, const AugmentConfig& config) {
  if (params.neutral()) return image.clone();
  cv::Mat out = image;
  auto clahe = [&] {
    if (params.clahe) out = apply_clahe_color(out, params.clahe_clip, params.clahe_grid);
  };
  auto gamma = [&] {
    if (params.gamma != 1.0) out = apply_gamma(out, params.gamma);
  };
  if (config.gamma_before_clahe) {
    gamma();
    clahe();
  } else {
    clahe();
    gamma();
  }
  if (params.contrast != 1.0 || params.brightness != 0.0)
    out = adjust_contrast_brightness(out, params.contrast, params.brightness);
  return out.data == image.data ? image.clone() : out;
}

std::vector<cv::Mat> augment_k(const data::ImageSample& sample, int k, Rng& rng, AugmentMode mode,
                               const AugmentConfig& config) {
  if (k < 1) throw ConfigError("augment_k requires k >= 1");
  std::vector<cv::Mat> copies;
  copies.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const AugmentParams p = sample_domain_augmentation(rng, mode, config);
    copies.push_back(apply_augmentation(sample.image, p, config));
  }
  return copies;
}

}  // namespace sclera::aug
