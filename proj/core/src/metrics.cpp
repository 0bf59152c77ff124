#include "sclera/metrics.hpp"

#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "sclera/error.hpp"
#include "sclera/image_io.hpp"

namespace sclera::metrics {

ConfusionCounts confusion_counts(const cv::Mat& pred, const cv::Mat& gt) {
  if (pred.type() != CV_8UC1 || gt.type() != CV_8UC1) throw ShapeError("confusion_counts expects CV_8UC1 masks");
  if (pred.size() != gt.size()) throw ShapeError("confusion_counts: prediction and ground truth differ in size");
  ConfusionCounts c;
  for (int y = 0; y < pred.rows; ++y) {
    const auto* p = pred.ptr<std::uint8_t>(y);
    const auto* g = gt.ptr<std::uint8_t>(y);
    for (int x = 0; x < pred.cols; ++x) {
      const bool pp = p[x] != 0, gg = g[x] != 0;
      if (pp && gg)
        ++c.tp;
      else if (pp)
        ++c.fp;
      else if (gg)
        ++c.fn;
      else
        ++c.tn;
    }
  }
  return c;
}

Scores compute_metrics(const ConfusionCounts& c) {
  const bool gt_empty = c.tp + c.fn == 0;
  auto ratio = [gt_empty](std::int64_t num, std::int64_t den) {
    if (den == 0) return gt_empty ? 1.0 : 0.0;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  Scores s;
  s.iou = ratio(c.tp, c.tp + c.fp + c.fn);
  s.recall = ratio(c.tp, c.tp + c.fn);
  s.precision = ratio(c.tp, c.tp + c.fp);
  const double pr = s.precision + s.recall;
  s.f1 = pr > 0.0 ? 2.0 * s.precision * s.recall / pr : 0.0;
  return s;
}

MetricsReport summarize(std::vector<ImageScores> per_image) {
  MetricsReport r;
  r.per_image = std::move(per_image);
  ConfusionCounts pooled;
  for (const auto& im : r.per_image) {
    r.mean.iou += im.scores.iou;
    r.mean.recall += im.scores.recall;
    r.mean.precision += im.scores.precision;
    r.mean.f1 += im.scores.f1;
    pooled += im.counts;
  }
  if (!r.per_image.empty()) {
    const auto n = static_cast<double>(r.per_image.size());
    r.mean.iou /= n;
    r.mean.recall /= n;
    r.mean.precision /= n;
    r.mean.f1 /= n;
  }
  r.pooled = compute_metrics(pooled);
  return r;
}

cv::Mat probs_to_mask(const torch::Tensor& probs, double threshold) {
  if (probs.dim() != 3) throw ShapeError("probs_to_mask expects [P, H, W]");
  torch::Tensor fg;
  if (probs.size(0) == 2)
    fg = probs.select(0, 1) > threshold;
  else
    fg = probs.argmax(0) == 1;
  return tensor_to_mask(fg);
}

MetricsReport evaluate(const Predictor& predictor, const std::vector<data::ImageSample>& samples,
                       const EvaluateOptions& options) {
  for (const auto& s : samples)
    if (!s.labeled()) throw ConfigError("evaluate: sample " + s.id + " has no ground truth");
  std::vector<ImageScores> scores;
  if (options.predicted_masks) options.predicted_masks->clear();
  const auto bs = static_cast<std::size_t>(std::max(1, options.batch_size));
  for (std::size_t start = 0; start < samples.size(); start += bs) {
    const std::size_t end = std::min(samples.size(), start + bs);
    std::vector<torch::Tensor> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(image_to_tensor(samples[i].image));
    torch::Tensor probs;
    {
      torch::NoGradGuard guard;
      probs = predictor(torch::stack(batch));
    }
    for (std::size_t i = start; i < end; ++i) {
      const cv::Mat pred = probs_to_mask(probs[static_cast<int64_t>(i - start)], options.threshold);
      ImageScores im;
      im.id = samples[i].id;
      im.counts = confusion_counts(pred, *samples[i].mask);
      im.scores = compute_metrics(im.counts);
      scores.push_back(im);
      if (options.predicted_masks) options.predicted_masks->push_back(pred);
    }
  }
  return summarize(std::move(scores));
}

cv::Mat render_overlay(const cv::Mat& pred, const cv::Mat& gt, const cv::Mat& image, double blend) {
  if (pred.size() != gt.size() || pred.size() != image.size()) throw ShapeError("render_overlay: size mismatch");
  cv::Mat rgb;
  if (image.channels() == 1)
    cv::cvtColor(image, rgb, cv::COLOR_GRAY2RGB);
  else
    rgb = image.clone();
  const auto a = static_cast<float>(blend);
  const cv::Vec3f blue(0, 0, 1), green(0, 1, 0), red(1, 0, 0);
  for (int y = 0; y < rgb.rows; ++y) {
    auto* px = rgb.ptr<cv::Vec3f>(y);
    const auto* p = pred.ptr<std::uint8_t>(y);
    const auto* g = gt.ptr<std::uint8_t>(y);
    for (int x = 0; x < rgb.cols; ++x) {
      const cv::Vec3f* tint = nullptr;
      if (p[x] && g[x])
        tint = &blue;
      else if (p[x])
        tint = &green;
      else if (g[x])
        tint = &red;
      if (tint) px[x] = px[x] * (1.0f - a) + (*tint) * a;
    }
  }
  return rgb;
}

namespace {

nlohmann::json scores_json(const Scores& s) {
  return {{"iou", s.iou}, {"recall", s.recall}, {"precision", s.precision}, {"f1", s.f1}};
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["mean_iou"] = report.mean.iou;
  j["mean_recall"] = report.mean.recall;
  j["mean_precision"] = report.mean.precision;
  j["mean_f1"] = report.mean.f1;
  j["pooled"] = scores_json(report.pooled);
  j["averaging"] = "macro (per-image mean); pooled = micro";
  j["degenerate_convention"] = "empty denominator scores 1 if ground truth is empty, else 0";
  j["per_image"] = nlohmann::json::array();
  for (const auto& im : report.per_image) {
    auto e = scores_json(im.scores);
    e["id"] = im.id;
    e["tp"] = im.counts.tp;
    e["fp"] = im.counts.fp;
    e["fn"] = im.counts.fn;
    e["tn"] = im.counts.tn;
    j["per_image"].push_back(e);
  }
  return j.dump(2);
}

std::string report_to_table(const MetricsReport& report, const std::string& title) {
  std::ostringstream os;
  char line[256];
  if (!title.empty()) os << title << "\n";
  std::snprintf(line, sizeof(line), "%-24s %8s %8s %11s %8s\n", "", "mIoU %", "Recall %", "Precision %", "F1 %");
  os << line;
  auto row = [&](const char* name, const Scores& s) {
    std::snprintf(line, sizeof(line), "%-24s %8.2f %8.2f %11.2f %8.2f\n", name, 100 * s.iou, 100 * s.recall,
                  100 * s.precision, 100 * s.f1);
    os << line;
  };
  row("mean (per image)", report.mean);
  row("pooled", report.pooled);
  std::snprintf(line, sizeof(line), "images: %zu\n", report.per_image.size());
  os << line;
  return os.str();
}

}  // namespace sclera::metrics
