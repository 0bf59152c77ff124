#include "sclera/label_guessing.hpp"

#include <torch/torch.h>

#include "sclera/error.hpp"
#include "sclera/image_io.hpp"

namespace sclera::ssl {

namespace {

// Both guessing schemes reduce through this so identity transforms give
// bit-identical results.
torch::Tensor weighted_mean(const torch::Tensor& maps, const torch::Tensor& validity) {
  const auto w = validity.to(maps.scalar_type()).unsqueeze(1);  // [k,1,H,W]
  const auto count = w.sum(0).clamp_min(1.0);                    // [1,H,W]
  return (maps * w).sum(0) / count;
}

}  // namespace

GuessedLabel average_predictions(const torch::Tensor& predictions) {
  if (predictions.dim() != 4 || predictions.size(0) < 1) throw ShapeError("average_predictions expects [k, P, H, W]");
  torch::NoGradGuard guard;
  const auto p = predictions.detach();
  const auto validity = torch::ones({p.size(0), p.size(2), p.size(3)}, torch::kBool);
  return {weighted_mean(p, validity), torch::ones({p.size(2), p.size(3)}, torch::kBool), GuessSource::Ssld};
}

InverseWarpedAverage average_inverse_warped(const torch::Tensor& predictions,
                                            const std::vector<xform::SpatialTransform>& transforms) {
  if (predictions.dim() != 4 || predictions.size(0) != static_cast<int64_t>(transforms.size()))
    throw ShapeError("average_inverse_warped expects one transform per [k, P, H, W] prediction");
  torch::NoGradGuard guard;
  const auto p = predictions.detach();
  const int64_t H = p.size(2), W = p.size(3);
  std::vector<torch::Tensor> unwarped, validity;
  for (std::size_t a = 0; a < transforms.size(); ++a) {
    const auto back = xform::apply_inverse(transforms[a], p[static_cast<int64_t>(a)]);
    unwarped.push_back(back.field);
    validity.push_back(xform::round_trip_validity(transforms[a], H, W));
  }
  InverseWarpedAverage out;
  out.copy_validity = torch::stack(validity);
  out.label.probs = weighted_mean(torch::stack(unwarped), out.copy_validity);
  out.label.validity = out.copy_validity.any(0);
  out.label.source = GuessSource::SslSs;
  return out;
}

torch::Tensor stack_images(const std::vector<cv::Mat>& images) {
  std::vector<torch::Tensor> ts;
  ts.reserve(images.size());
  for (const auto& im : images) ts.push_back(image_to_tensor(im));
  return torch::stack(ts);
}

torch::Tensor transform_copies(const torch::Tensor& copies, const std::vector<xform::SpatialTransform>& transforms) {
  if (copies.size(0) != static_cast<int64_t>(transforms.size()))
    throw ShapeError("transform_copies: one transform per copy required");
  std::vector<torch::Tensor> out;
  for (std::size_t a = 0; a < transforms.size(); ++a)
    out.push_back(xform::apply(transforms[a], copies[static_cast<int64_t>(a)]).field);
  return torch::stack(out);
}

SsldGuess guess_labels_ssld(const Predictor& predictor, const cv::Mat& image, int k, Rng& rng,
                            const aug::AugmentConfig& augment) {
  if (k < 1) throw ConfigError("label guessing requires k >= 1");
  data::ImageSample s{"", image, std::nullopt};
  SsldGuess g;
  g.copies = stack_images(aug::augment_k(s, k, rng, aug::AugmentMode::Unlabeled, augment));
  torch::Tensor preds;
  {
    torch::NoGradGuard guard;
    preds = predictor(g.copies);
  }
  g.label = average_predictions(preds);
  return g;
}

SslSsGuess guess_labels_sslss(const Predictor& predictor, const cv::Mat& image, int k, Rng& rng, double p1,
                              double p2, const aug::AugmentConfig& augment, const xform::TransformRanges& ranges) {
  if (k < 1) throw ConfigError("label guessing requires k >= 1");
  data::ImageSample s{"", image, std::nullopt};
  SslSsGuess g;
  g.copies = stack_images(aug::augment_k(s, k, rng, aug::AugmentMode::Unlabeled, augment));
  for (int a = 0; a < k; ++a) g.transforms.push_back(xform::sample_transform(rng, p1, p2, ranges));
  g.transformed = transform_copies(g.copies, g.transforms);
  torch::Tensor preds;
  {
    torch::NoGradGuard guard;
    preds = predictor(g.transformed);
  }
  auto avg = average_inverse_warped(preds, g.transforms);
  g.label = avg.label;
  g.copy_validity = avg.copy_validity;
  return g;
}

}  // namespace sclera::ssl
