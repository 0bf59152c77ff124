#pragma once

#include <string>

#include <opencv2/core.hpp>
#include <torch/types.h>

namespace sclera::loss {

/// Constants behind the epoch schedule and the supervised loss.
struct LossConfig {
  double lambda1 = 1.0;
  double lambda2 = 20.0;
  double lambda_u_slope = 0.02;
  double lambda_ss_slope = 0.002;
  /// alpha = epoch / alpha_epochs while epoch < alpha_epochs, else 0.
  int alpha_epochs = 100;
  /// Width of the Gaussian boundary weighting, in pixels.
  double boundary_sigma = 3.0;
  double dice_eps = 1e-6;
  bool deep_supervision = true;
  /// lambda_ss is held at 0 before this epoch.
  int stage2_start_epoch = 0;

  void validate() const;
};

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 0.0;
  double lambda3 = 1.0;
  double lambda4 = 0.0;
  double lambda_u = 0.0;
  double lambda_ss = 0.0;
  double alpha = 0.0;
};

/// lambda3 = 1 - alpha, lambda4 = alpha, lambda_u and lambda_ss ramp linearly.
LossWeights schedule(int epoch, const LossConfig& config = {});

/// Inner contour of a binary mask: foreground pixels with a 4-neighbour in
/// the background. Returns CV_8UC1 {0,1}.
cv::Mat mask_boundary(const cv::Mat& mask01);

/// Euclidean distance of every pixel to the nearest boundary pixel
/// (CV_64FC1). Infinity everywhere when the mask has no boundary.
cv::Mat boundary_distance(const cv::Mat& mask01);

/// exp(-d^2 / (2 sigma^2)) of the boundary distance, zero beyond 3 sigma and
/// zero everywhere for masks without a boundary. [H, W] float64.
torch::Tensor boundary_weight_map(const cv::Mat& mask01, double sigma);

/// Boundary distance signed negative inside the mask, positive outside and
/// zero on the contour. Masks without a boundary get +/- the image diagonal.
/// [H, W] float64.
torch::Tensor signed_distance_map(const cv::Mat& mask01);

/// Per-pixel cross-entropy scaled by `pixel_weight` and averaged.
/// probs [B,P,H,W] or [P,H,W]; gt integer labels [B,H,W] or [H,W].
torch::Tensor weighted_cross_entropy(const torch::Tensor& probs, const torch::Tensor& gt,
                                     const torch::Tensor& pixel_weight);
/// 1 - 2 sum(p_f g) / (sum p_f + sum g + eps) per image, averaged over the batch.
torch::Tensor dice_loss(const torch::Tensor& probs, const torch::Tensor& gt, double eps = 1e-6);
/// mean(p_f * phi).
torch::Tensor surface_loss(const torch::Tensor& probs, const torch::Tensor& sdm);

struct SupervisedLoss {
  torch::Tensor total;
  torch::Tensor ce;       ///< boundary-weighted cross-entropy
  torch::Tensor dice;
  torch::Tensor surface;
};

/// L_s = mean(CE * (lambda1 + lambda2 * bal)) + lambda3 * Dice + lambda4 * Surface.
/// Throws NumericError when probabilities are not normalized over the class axis.
SupervisedLoss supervised_loss(const torch::Tensor& probs, const torch::Tensor& gt, const LossWeights& weights,
                               const torch::Tensor& bal, const torch::Tensor& sdm, double dice_eps = 1e-6);

/// Mean squared error over all channels and pixels.
torch::Tensor consistency_loss_u(const torch::Tensor& probs, const torch::Tensor& guessed);

/// Mean squared error restricted to valid pixels, normalized by
/// (valid pixels x channels). Zero when no pixel is valid.
torch::Tensor consistency_loss_ss(const torch::Tensor& probs, const torch::Tensor& guessed,
                                  const torch::Tensor& validity);

/// L = L_s + lambda_u * L_u + lambda_ss * L_ss. Throws NumericError naming the
/// first non-finite component.
double total_loss(double l_s, double l_u, double l_ss, const LossWeights& weights);
torch::Tensor total_loss(const torch::Tensor& l_s, const torch::Tensor& l_u, const torch::Tensor& l_ss,
                         const LossWeights& weights);

/// Throws NumericError if `probs` channel sums deviate from 1 by more than tol.
void check_normalized(const torch::Tensor& probs, double tol, const std::string& what);

}  // namespace sclera::loss
