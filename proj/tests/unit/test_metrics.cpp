#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "oracles.hpp"
#include "sclera/error.hpp"
#include "sclera/image_io.hpp"
#include "sclera/metrics.hpp"
#include "sclera/rng.hpp"

using namespace sclera;
using namespace sclera::metrics;

namespace {

cv::Mat random_mask(int h, int w, Rng& rng, double p = 0.5) {
  cv::Mat m(h, w, CV_8UC1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at<unsigned char>(y, x) = bernoulli(rng, p) ? 1 : 0;
  return m;
}

bool same_counts(const ConfusionCounts& a, const ConfusionCounts& b) {
  return a.tp == b.tp && a.fp == b.fp && a.fn == b.fn && a.tn == b.tn;
}

// Predictor that turns channel 0 of the input into a two-class map.
Predictor echo_channel0() {
  return [](const torch::Tensor& x) {
    const auto fg = (x.select(1, 0) > 0.5).to(torch::kFloat32);
    return torch::stack({1 - fg, fg}, 1);
  };
}

std::vector<data::ImageSample> echo_samples(int n, Rng& rng) {
  std::vector<data::ImageSample> v;
  for (int i = 0; i < n; ++i) {
    const cv::Mat m = random_mask(16, 16, rng, 0.4);
    cv::Mat img;
    m.convertTo(img, CV_32F);
    cv::Mat rgb;
    cv::merge(std::vector<cv::Mat>{img, img, img}, rgb);
    v.push_back({"img" + std::to_string(i), rgb, m});
  }
  return v;
}

}  // namespace

TEST(ConfusionCounts, SimpleCases) {
  cv::Mat gt(4, 5, CV_8UC1, cv::Scalar(0));
  gt(cv::Rect(0, 0, 5, 2)).setTo(1);
  const auto same = confusion_counts(gt, gt);
  EXPECT_EQ(same.tp, 10);
  EXPECT_EQ(same.fp, 0);
  EXPECT_EQ(same.fn, 0);
  const auto none = confusion_counts(cv::Mat(4, 5, CV_8UC1, cv::Scalar(0)), gt);
  EXPECT_EQ(none.fn, 10);
  EXPECT_EQ(none.tp, 0);
  EXPECT_EQ(none.fp, 0);
  EXPECT_THROW(confusion_counts(gt, cv::Mat(5, 4, CV_8UC1)), ShapeError);
}

TEST(ConfusionCounts, MatchPixelLoopOracle) {
  auto rng = make_rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_mask(32, 32, rng, uniform01(rng));
    const auto g = random_mask(32, 32, rng, uniform01(rng));
    const auto c = confusion_counts(p, g);
    EXPECT_TRUE(same_counts(c, oracle::confusion(p, g)));
    EXPECT_EQ(c.total(), 32 * 32);
  }
}

TEST(ConfusionCounts, PermutationInvariant) {
  auto rng = make_rng(2);
  const auto p = random_mask(8, 8, rng);
  const auto g = random_mask(8, 8, rng);
  std::vector<int> perm(64);
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(perm.begin(), perm.end(), rng);
  cv::Mat ps(8, 8, CV_8UC1), gs(8, 8, CV_8UC1);
  for (int i = 0; i < 64; ++i) {
    ps.at<unsigned char>(i / 8, i % 8) = p.at<unsigned char>(perm[i] / 8, perm[i] % 8);
    gs.at<unsigned char>(i / 8, i % 8) = g.at<unsigned char>(perm[i] / 8, perm[i] % 8);
  }
  EXPECT_TRUE(same_counts(confusion_counts(p, g), confusion_counts(ps, gs)));
}

TEST(ComputeMetrics, AnalyticCase) {
  const auto s = compute_metrics({7, 7, 0, 50});
  EXPECT_DOUBLE_EQ(s.iou, 0.5);
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 1.0);
  EXPECT_DOUBLE_EQ(s.f1, 2.0 / 3.0);
  const auto perfect = compute_metrics({10, 0, 0, 6});
  EXPECT_EQ(perfect.iou, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
}

TEST(ComputeMetrics, DegenerateConventions) {
  const auto empty = compute_metrics({0, 0, 0, 16});
  EXPECT_EQ(empty.iou, 1.0);
  EXPECT_EQ(empty.precision, 1.0);
  EXPECT_EQ(empty.recall, 1.0);
  EXPECT_EQ(empty.f1, 1.0);
  const auto missed = compute_metrics({0, 0, 5, 11});
  EXPECT_EQ(missed.precision, 0.0);
  EXPECT_EQ(missed.recall, 0.0);
  EXPECT_EQ(missed.f1, 0.0);
  const auto false_alarm = compute_metrics({0, 4, 0, 12});
  EXPECT_EQ(false_alarm.iou, 0.0);
  EXPECT_EQ(false_alarm.precision, 0.0);
}

TEST(ComputeMetrics, IouF1IdentityAndBounds) {
  auto rng = make_rng(3);
  for (int i = 0; i < 1000; ++i) {
    ConfusionCounts c{uniform_int(rng, 0, 1000), uniform_int(rng, 0, 1000), uniform_int(rng, 0, 1000), 0};
    if (c.tp + c.fp + c.fn == 0) c.tp = 1;
    const auto s = compute_metrics(c);
    EXPECT_NEAR(s.iou, s.f1 / (2 - s.f1), 1e-9);
    for (double v : {s.iou, s.recall, s.precision, s.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    if (c.tp > 0) {
      EXPECT_LE(s.precision * s.recall, s.f1 + 1e-15);
      EXPECT_LE(s.f1, std::min(1.0, s.precision + s.recall) + 1e-15);
    }
  }
}

TEST(Summarize, MacroMeansAndPooled) {
  std::vector<ImageScores> v(2);
  v[0].counts = {10, 0, 0, 6};
  v[1].counts = {0, 0, 10, 6};
  for (auto& im : v) im.scores = compute_metrics(im.counts);
  const auto r = summarize(v);
  EXPECT_DOUBLE_EQ(r.mean.iou, 0.5);
  EXPECT_DOUBLE_EQ(r.mean.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.pooled.iou, 0.5);
  EXPECT_DOUBLE_EQ(r.pooled.precision, 1.0);
}

TEST(Evaluate, EchoingGroundTruthIsPerfect) {
  auto rng = make_rng(4);
  const auto samples = echo_samples(5, rng);
  std::vector<cv::Mat> masks;
  EvaluateOptions opts;
  opts.batch_size = 2;
  opts.predicted_masks = &masks;
  const auto r = evaluate(echo_channel0(), samples, opts);
  EXPECT_EQ(r.per_image.size(), 5u);
  EXPECT_EQ(r.mean.iou, 1.0);
  EXPECT_EQ(r.mean.recall, 1.0);
  EXPECT_EQ(r.mean.precision, 1.0);
  EXPECT_EQ(r.mean.f1, 1.0);
  ASSERT_EQ(masks.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(cv::norm(masks[i], *samples[i].mask, cv::NORM_INF), 0.0);
}

TEST(Evaluate, AllBackgroundHasZeroRecall) {
  auto rng = make_rng(5);
  const auto samples = echo_samples(3, rng);
  const Predictor background = [](const torch::Tensor& x) {
    auto p = torch::zeros({x.size(0), 2, x.size(2), x.size(3)});
    p.select(1, 0).fill_(1.0);
    return p;
  };
  EXPECT_EQ(evaluate(background, samples).mean.recall, 0.0);
}

TEST(Evaluate, UnlabeledSampleRejected) {
  std::vector<data::ImageSample> v{{"u", cv::Mat(16, 16, CV_32FC3, cv::Scalar::all(0)), std::nullopt}};
  EXPECT_THROW(evaluate(echo_channel0(), v), ConfigError);
}

TEST(ProbsToMask, ThresholdAndArgmax) {
  auto p = torch::zeros({2, 1, 3});
  p[1][0][0] = 0.2;
  p[1][0][1] = 0.5;
  p[1][0][2] = 0.51;
  p[0] = 1 - p[1];
  const auto m = probs_to_mask(p);
  EXPECT_EQ(m.at<unsigned char>(0, 0), 0);
  EXPECT_EQ(m.at<unsigned char>(0, 1), 0);
  EXPECT_EQ(m.at<unsigned char>(0, 2), 1);
  auto q = torch::zeros({3, 1, 2});
  q[1][0][0] = 0.5;
  q[0][0][0] = 0.3;
  q[2][0][0] = 0.2;
  q[2][0][1] = 1.0;
  const auto m3 = probs_to_mask(q);
  EXPECT_EQ(m3.at<unsigned char>(0, 0), 1);
  EXPECT_EQ(m3.at<unsigned char>(0, 1), 0);
}

TEST(Overlay, ColorConvention) {
  const cv::Mat img(1, 4, CV_32FC3, cv::Scalar(0.5, 0.5, 0.5));
  cv::Mat pred(1, 4, CV_8UC1), gt(1, 4, CV_8UC1);
  const unsigned char pv[] = {1, 1, 0, 0}, gv[] = {1, 0, 1, 0};
  for (int i = 0; i < 4; ++i) {
    pred.at<unsigned char>(0, i) = pv[i];
    gt.at<unsigned char>(0, i) = gv[i];
  }
  const auto full = render_overlay(pred, gt, img, 1.0);
  EXPECT_EQ(full.at<cv::Vec3f>(0, 0), cv::Vec3f(0, 0, 1));  // TP blue
  EXPECT_EQ(full.at<cv::Vec3f>(0, 1), cv::Vec3f(0, 1, 0));  // FP green
  EXPECT_EQ(full.at<cv::Vec3f>(0, 2), cv::Vec3f(1, 0, 0));  // FN red
  EXPECT_EQ(full.at<cv::Vec3f>(0, 3), cv::Vec3f(0.5, 0.5, 0.5));
  const auto half = render_overlay(pred, gt, img, 0.5);
  EXPECT_EQ(half.at<cv::Vec3f>(0, 0), cv::Vec3f(0.25f, 0.25f, 0.75f));
}

TEST(Overlay, OnlyExpectedTints) {
  auto rng = make_rng(6);
  const auto gt = random_mask(12, 12, rng);
  const cv::Mat img(12, 12, CV_32FC3, cv::Scalar::all(0));
  const auto same = render_overlay(gt, gt, img, 1.0);
  cv::Mat complement = 1 - gt;
  const auto flipped = render_overlay(complement, gt, img, 1.0);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) {
      const auto s = same.at<cv::Vec3f>(y, x);
      EXPECT_EQ(s[0], 0.0f);
      EXPECT_EQ(s[1], 0.0f);
      const auto f = flipped.at<cv::Vec3f>(y, x);
      EXPECT_EQ(f[2], 0.0f);
      EXPECT_EQ(f[0] + f[1], 1.0f);
    }
}

TEST(Report, JsonAndTable) {
  auto rng = make_rng(7);
  const auto r = evaluate(echo_channel0(), echo_samples(2, rng));
  const auto j = nlohmann::json::parse(report_to_json(r));
  EXPECT_EQ(j["mean_iou"].get<double>(), 1.0);
  EXPECT_EQ(j["per_image"].size(), 2u);
  const auto table = report_to_table(r, "toy");
  for (const char* col : {"mIoU %", "Recall %", "Precision %", "F1 %", "100.00"})
    EXPECT_NE(table.find(col), std::string::npos) << col;
}
