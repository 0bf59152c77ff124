#include "sclera/losses.hpp"

#include <cmath>

#include <torch/torch.h>

#include "sclera/error.hpp"

namespace sclera::loss {

void LossConfig::validate() const {
  if (lambda1 < 0 || lambda2 < 0) throw ConfigError("lambda1 and lambda2 must be non-negative");
  if (lambda_u_slope < 0 || lambda_ss_slope < 0) throw ConfigError("ramp slopes must be non-negative");
  if (alpha_epochs < 1) throw ConfigError("alpha_epochs must be >= 1");
  if (!(boundary_sigma > 0)) throw ConfigError("boundary sigma must be positive");
  if (!(dice_eps > 0)) throw ConfigError("dice epsilon must be positive");
  if (stage2_start_epoch < 0) throw ConfigError("stage2_start_epoch must be >= 0");
}

LossWeights schedule(int epoch, const LossConfig& config) {
  if (epoch < 0) throw ConfigError("epoch must be non-negative");
  LossWeights w;
  w.lambda1 = config.lambda1;
  w.lambda2 = config.lambda2;
  w.alpha = epoch < config.alpha_epochs ? static_cast<double>(epoch) / config.alpha_epochs : 0.0;
  w.lambda3 = 1.0 - w.alpha;
  w.lambda4 = w.alpha;
  w.lambda_u = config.lambda_u_slope * epoch;
  w.lambda_ss = epoch < config.stage2_start_epoch ? 0.0 : config.lambda_ss_slope * epoch;
  return w;
}

torch::Tensor boundary_weight_map(const cv::Mat& mask01, double sigma) {
  const cv::Mat dist = boundary_distance(mask01);
  auto out = torch::zeros({dist.rows, dist.cols}, torch::kFloat64);
  auto acc = out.accessor<double, 2>();
  const double cutoff = 3.0 * sigma;
  for (int y = 0; y < dist.rows; ++y) {
    for (int x = 0; x < dist.cols; ++x) {
      const double d = dist.at<double>(y, x);
      if (d <= cutoff) acc[y][x] = std::exp(-d * d / (2.0 * sigma * sigma));
    }
  }
  return out;
}

torch::Tensor signed_distance_map(const cv::Mat& mask01) {
  const cv::Mat dist = boundary_distance(mask01);
  const double diag = std::hypot(static_cast<double>(dist.rows), static_cast<double>(dist.cols));
  auto out = torch::zeros({dist.rows, dist.cols}, torch::kFloat64);
  auto acc = out.accessor<double, 2>();
  for (int y = 0; y < dist.rows; ++y) {
    for (int x = 0; x < dist.cols; ++x) {
      const bool inside = mask01.at<std::uint8_t>(y, x) != 0;
      const double d = std::isfinite(dist.at<double>(y, x)) ? dist.at<double>(y, x) : diag;
      acc[y][x] = inside ? -d : d;
    }
  }
  return out;
}

namespace {

// Promotes unbatched [P,H,W] / [H,W] inputs to batched form.
torch::Tensor batched(const torch::Tensor& t, int64_t unbatched_dim) {
  return t.dim() == unbatched_dim ? t.unsqueeze(0) : t;
}

void check_pair(const torch::Tensor& probs, const torch::Tensor& map, const char* what) {
  if (probs.dim() != 4 || map.dim() != 3 || probs.size(0) != map.size(0) || probs.size(2) != map.size(1) ||
      probs.size(3) != map.size(2))
    throw ShapeError(std::string(what) + ": shape mismatch between probabilities and per-pixel map");
}

}  // namespace

void check_normalized(const torch::Tensor& probs, double tol, const std::string& what) {
  const auto p = batched(probs, 3);
  const double dev = (p.detach().sum(1) - 1.0).abs().max().item<double>();
  if (!(dev <= tol)) throw NumericError(what + ": probabilities are not normalized (max deviation " + std::to_string(dev) + ")");
}

torch::Tensor weighted_cross_entropy(const torch::Tensor& probs, const torch::Tensor& gt,
                                     const torch::Tensor& pixel_weight) {
  const auto p = batched(probs, 3);
  const auto g = batched(gt, 2).to(torch::kInt64);
  const auto w = batched(pixel_weight, 2).to(p.options());
  check_pair(p, g, "cross-entropy");
  check_pair(p, w, "cross-entropy");
  const auto picked = p.gather(1, g.unsqueeze(1)).squeeze(1);
  const auto ce = -torch::log(picked.clamp_min(1e-12));
  return (ce * w).mean();
}

torch::Tensor dice_loss(const torch::Tensor& probs, const torch::Tensor& gt, double eps) {
  const auto p = batched(probs, 3);
  const auto g = batched(gt, 2).to(p.options());
  check_pair(p, g, "dice");
  const auto pf = p.select(1, 1);
  const auto inter = (pf * g).sum({1, 2});
  const auto denom = pf.sum({1, 2}) + g.sum({1, 2}) + eps;
  return (1.0 - 2.0 * inter / denom).mean();
}

torch::Tensor surface_loss(const torch::Tensor& probs, const torch::Tensor& sdm) {
  const auto p = batched(probs, 3);
  const auto phi = batched(sdm, 2).to(p.options());
  check_pair(p, phi, "surface");
  return (p.select(1, 1) * phi).mean();
}

SupervisedLoss supervised_loss(const torch::Tensor& probs, const torch::Tensor& gt, const LossWeights& weights,
                               const torch::Tensor& bal, const torch::Tensor& sdm, double dice_eps) {
  check_normalized(probs, probs.scalar_type() == torch::kFloat64 ? 1e-9 : 1e-4, "supervised_loss");
  SupervisedLoss out;
  const auto factor = weights.lambda1 + weights.lambda2 * batched(bal, 2).to(probs.options());
  out.ce = weighted_cross_entropy(probs, gt, factor);
  out.dice = dice_loss(probs, gt, dice_eps);
  out.surface = surface_loss(probs, sdm);
  out.total = out.ce + weights.lambda3 * out.dice + weights.lambda4 * out.surface;
  return out;
}

torch::Tensor consistency_loss_u(const torch::Tensor& probs, const torch::Tensor& guessed) {
  if (!probs.sizes().equals(guessed.sizes())) throw ShapeError("consistency_loss_u: shape mismatch");
  return (probs - guessed.to(probs.options())).pow(2).mean();
}

torch::Tensor consistency_loss_ss(const torch::Tensor& probs, const torch::Tensor& guessed,
                                  const torch::Tensor& validity) {
  const auto p = batched(probs, 3);
  const auto g = batched(guessed, 3).to(p.options());
  const auto v = batched(validity, 2).to(p.options());
  if (!p.sizes().equals(g.sizes())) throw ShapeError("consistency_loss_ss: shape mismatch");
  check_pair(p, v, "consistency_loss_ss");
  const double count = v.sum().item<double>() * static_cast<double>(p.size(1));
  if (count == 0.0) return (p * 0.0).sum();
  return ((p - g).pow(2) * v.unsqueeze(1)).sum() / count;
}

double total_loss(double l_s, double l_u, double l_ss, const LossWeights& weights) {
  if (!std::isfinite(l_s)) throw NumericError("L_s is not finite");
  if (!std::isfinite(l_u)) throw NumericError("L_u is not finite");
  if (!std::isfinite(l_ss)) throw NumericError("L_ss is not finite");
  return l_s + weights.lambda_u * l_u + weights.lambda_ss * l_ss;
}

torch::Tensor total_loss(const torch::Tensor& l_s, const torch::Tensor& l_u, const torch::Tensor& l_ss,
                         const LossWeights& weights) {
  if (!std::isfinite(l_s.item<double>())) throw NumericError("L_s is not finite");
  if (!std::isfinite(l_u.item<double>())) throw NumericError("L_u is not finite");
  if (!std::isfinite(l_ss.item<double>())) throw NumericError("L_ss is not finite");
  return l_s + weights.lambda_u * l_u + weights.lambda_ss * l_ss;
}

}  // namespace sclera::loss
