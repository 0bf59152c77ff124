#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/types.h>

#include "sclera/data_pipeline.hpp"

namespace sclera::metrics {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

/// Pixel-wise counts of two CV_8UC1 {0,1} masks of equal size.
ConfusionCounts confusion_counts(const cv::Mat& pred, const cv::Mat& gt);

struct Scores {
  double iou = 0;
  double recall = 0;
  double precision = 0;
  double f1 = 0;
};

/// IoU, recall, precision and F1 of one count set.
///
/// Empty denominators score 1 when the ground truth is also empty and 0
/// otherwise, so an all-background image predicted as background is perfect.
Scores compute_metrics(const ConfusionCounts& c);

struct ImageScores {
  std::string id;
  Scores scores;
  ConfusionCounts counts;
};

struct MetricsReport {
  std::vector<ImageScores> per_image;
  /// Image-averaged (macro) means.
  Scores mean;
  /// Scores of the pooled counts, for diagnostics.
  Scores pooled;
};

MetricsReport summarize(std::vector<ImageScores> per_image);

/// Batch of [B, C, H, W] images to [B, P, H, W] class probabilities.
using Predictor = std::function<torch::Tensor(const torch::Tensor&)>;

/// Foreground probability above `threshold` (P = 2) or argmax (P > 2, class 1
/// as foreground) to a CV_8UC1 {0,1} mask. probs is [P, H, W].
cv::Mat probs_to_mask(const torch::Tensor& probs, double threshold = 0.5);

struct EvaluateOptions {
  double threshold = 0.5;
  int batch_size = 8;
  /// Filled with one predicted mask per sample when non-null.
  std::vector<cv::Mat>* predicted_masks = nullptr;
};

/// Scores every sample; throws ConfigError on an unlabeled sample.
MetricsReport evaluate(const Predictor& predictor, const std::vector<data::ImageSample>& samples,
                       const EvaluateOptions& options = {});

/// TP tinted blue, FP green, FN red, TN untouched. Output is RGB float in [0,1].
cv::Mat render_overlay(const cv::Mat& pred, const cv::Mat& gt, const cv::Mat& image, double blend = 0.5);

/// Machine-readable report (JSON).
std::string report_to_json(const MetricsReport& report);
/// Aligned text table with mIoU / Recall / Precision / F1 columns in percent.
std::string report_to_table(const MetricsReport& report, const std::string& title = "");

}  // namespace sclera::metrics
