#include <gtest/gtest.h>

#include <cmath>

#include <torch/torch.h>

#include "oracles.hpp"
#include "sclera/error.hpp"
#include "sclera/losses.hpp"
#include "sclera/rng.hpp"

using namespace sclera;
using namespace sclera::loss;

namespace {

cv::Mat random_mask(int h, int w, std::uint64_t seed, double p = 0.5) {
  auto rng = make_rng(seed);
  cv::Mat m(h, w, CV_8UC1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at<unsigned char>(y, x) = bernoulli(rng, p) ? 1 : 0;
  return m;
}

cv::Mat disk_mask(int n, double cx, double cy, double r) {
  cv::Mat m(n, n, CV_8UC1, cv::Scalar(0));
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) m.at<unsigned char>(y, x) = std::hypot(x - cx, y - cy) <= r ? 1 : 0;
  return m;
}

torch::Tensor mask_tensor(const cv::Mat& m) {
  return torch::from_blob(m.data, {m.rows, m.cols}, torch::kUInt8).to(torch::kInt64).clone();
}

// [1, 2, H, W] double probabilities from a foreground map.
torch::Tensor two_class(const torch::Tensor& fg) { return torch::stack({1 - fg, fg}).unsqueeze(0); }

torch::Tensor random_probs(int64_t h, int64_t w, std::uint64_t seed) {
  torch::manual_seed(seed);
  return torch::softmax(torch::randn({1, 2, h, w}, torch::kFloat64), 1);
}

void expect_gradient_matches(const std::function<torch::Tensor(const torch::Tensor&)>& f, const torch::Tensor& x0,
                             const char* name) {
  auto x = x0.detach().clone().requires_grad_(true);
  f(x).backward();
  const auto analytic = x.grad().detach();
  const auto numeric = oracle::finite_difference(f, x0);
  EXPECT_LT(oracle::relative_error(analytic, numeric), 1e-4) << name;
  EXPECT_GT(analytic.abs().max().item<double>(), 0.0) << name;
}

}  // namespace

TEST(Schedule, RampCheckpointsExact) {
  const auto w0 = schedule(0);
  EXPECT_EQ(w0.alpha, 0.0);
  EXPECT_EQ(w0.lambda3, 1.0);
  EXPECT_EQ(w0.lambda4, 0.0);
  EXPECT_EQ(w0.lambda_u, 0.0);
  EXPECT_EQ(w0.lambda_ss, 0.0);

  const auto w50 = schedule(50);
  EXPECT_EQ(w50.alpha, 0.5);
  EXPECT_EQ(w50.lambda3, 0.5);
  EXPECT_EQ(w50.lambda4, 0.5);
  EXPECT_EQ(w50.lambda_u, 1.0);
  EXPECT_EQ(w50.lambda_ss, 0.1);

  const auto w120 = schedule(120);
  EXPECT_EQ(w120.alpha, 0.0);
  EXPECT_EQ(w120.lambda3, 1.0);
  EXPECT_EQ(w120.lambda4, 0.0);
  EXPECT_EQ(w120.lambda_u, 2.4);
  EXPECT_EQ(w120.lambda_ss, 0.24);
}

TEST(Schedule, PiecewiseLinearAndStageSwitch) {
  for (int e = 0; e < 100; ++e) {
    const auto w = schedule(e);
    EXPECT_DOUBLE_EQ(w.lambda3 + w.lambda4, 1.0);
    EXPECT_NEAR(w.alpha, e / 100.0, 1e-15);
    EXPECT_NEAR(w.lambda_u, 0.02 * e, 1e-12);
    EXPECT_NEAR(w.lambda_ss, 0.002 * e, 1e-12);
  }
  EXPECT_EQ(schedule(100).alpha, 0.0);
  LossConfig c;
  c.stage2_start_epoch = 10;
  EXPECT_EQ(schedule(9, c).lambda_ss, 0.0);
  EXPECT_NEAR(schedule(10, c).lambda_ss, 0.02, 1e-15);
  EXPECT_THROW(schedule(-1), ConfigError);
}

TEST(BoundaryWeights, EmptyBoundaryGivesZeros) {
  EXPECT_EQ(boundary_weight_map(cv::Mat(8, 8, CV_8UC1, cv::Scalar(0)), 3.0).abs().sum().item<double>(), 0.0);
  EXPECT_EQ(boundary_weight_map(cv::Mat(8, 8, CV_8UC1, cv::Scalar(1)), 3.0).abs().sum().item<double>(), 0.0);
}

TEST(BoundaryWeights, SinglePixelAnalyticGaussian) {
  cv::Mat m(7, 7, CV_8UC1, cv::Scalar(0));
  m.at<unsigned char>(3, 3) = 1;
  const auto w = boundary_weight_map(m, 1.0);
  EXPECT_DOUBLE_EQ(w[3][3].item<double>(), 1.0);
  for (auto [y, x] : std::vector<std::pair<int, int>>{{2, 3}, {4, 3}, {3, 2}, {3, 4}})
    EXPECT_DOUBLE_EQ(w[y][x].item<double>(), std::exp(-0.5));
  EXPECT_DOUBLE_EQ(w[2][2].item<double>(), std::exp(-1.0));
  // Beyond 3 sigma.
  EXPECT_EQ(w[3][0].item<double>(), std::exp(-4.5));
  EXPECT_EQ(w[0][0].item<double>(), 0.0);
}

TEST(BoundaryDistance, MatchesAllPairsOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_mask(16, 16, seed, 0.3 + 0.05 * static_cast<double>(seed));
    const auto expected = oracle::all_pairs_distance(m);
    const auto got = boundary_distance(m);
    EXPECT_LE(cv::norm(got, expected, cv::NORM_INF), 1e-6) << seed;
    const auto w = boundary_weight_map(m, 2.0);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const double d = expected.at<double>(y, x);
        const double want = d <= 6.0 ? std::exp(-d * d / 8.0) : 0.0;
        ASSERT_NEAR(w[y][x].item<double>(), want, 1e-6);
      }
  }
}

TEST(SignedDistance, SignAndMagnitude) {
  const auto m = disk_mask(24, 11.5, 11.5, 7);
  const auto phi = signed_distance_map(m);
  const auto d = oracle::all_pairs_distance(m);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) {
      const double v = phi[y][x].item<double>();
      if (m.at<unsigned char>(y, x)) EXPECT_LE(v, 0.0);
      else EXPECT_GT(v, 0.0);
      EXPECT_NEAR(std::abs(v), d.at<double>(y, x), 1e-9);
    }
  const auto all_bg = signed_distance_map(cv::Mat(4, 3, CV_8UC1, cv::Scalar(0)));
  EXPECT_DOUBLE_EQ(all_bg.min().item<double>(), 5.0);
  const auto all_fg = signed_distance_map(cv::Mat(4, 3, CV_8UC1, cv::Scalar(1)));
  EXPECT_DOUBLE_EQ(all_fg.max().item<double>(), -5.0);
}

TEST(SupervisedLoss, PerfectPrediction) {
  const auto m = disk_mask(16, 8, 8, 5);
  const auto gt = mask_tensor(m);
  const auto probs = two_class(gt.to(torch::kFloat64));
  const auto out = supervised_loss(probs, gt, schedule(0), boundary_weight_map(m, 3.0), signed_distance_map(m));
  EXPECT_EQ(out.ce.item<double>(), 0.0);
  EXPECT_LE(out.dice.item<double>(), 1e-6);
  EXPECT_GE(out.dice.item<double>(), 0.0);
}

TEST(SupervisedLoss, FourByFourHandOracle) {
  // gt: top-left 2x2 foreground.
  const int64_t gt_data[16] = {1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  const double fg_data[16] = {0.9, 0.8, 0.3, 0.1, 0.6, 0.7, 0.2, 0.1, 0.4, 0.1, 0.1, 0.05, 0.2, 0.1, 0.05, 0.5};
  const auto gt = torch::from_blob(const_cast<int64_t*>(gt_data), {4, 4}, torch::kInt64).clone();
  const auto fg = torch::from_blob(const_cast<double*>(fg_data), {4, 4}, torch::kFloat64).clone();

  double ce = 0, inter = 0, psum = 0, gsum = 0;
  for (int i = 0; i < 16; ++i) {
    const double p = gt_data[i] ? fg_data[i] : 1 - fg_data[i];
    ce -= std::log(p);
    inter += fg_data[i] * static_cast<double>(gt_data[i]);
    psum += fg_data[i];
    gsum += static_cast<double>(gt_data[i]);
  }
  ce /= 16;
  const double dice = 1 - 2 * inter / (psum + gsum + 1e-6);

  LossWeights w;
  w.lambda1 = 1;
  w.lambda2 = 0;
  w.lambda3 = 1;
  w.lambda4 = 0;
  const auto out = supervised_loss(two_class(fg), gt, w, torch::rand({4, 4}, torch::kFloat64),
                                   torch::rand({4, 4}, torch::kFloat64));
  EXPECT_NEAR(out.ce.item<double>(), ce, 1e-12);
  EXPECT_NEAR(out.dice.item<double>(), dice, 1e-12);
  EXPECT_NEAR(out.total.item<double>(), ce + dice, 1e-12);
}

TEST(SupervisedLoss, BoundaryWeightScalesCrossEntropy) {
  const auto m = disk_mask(12, 6, 6, 3);
  const auto gt = mask_tensor(m);
  const auto probs = random_probs(12, 12, 1);
  const auto bal = boundary_weight_map(m, 2.0);
  LossWeights w;
  w.lambda1 = 1.0;
  w.lambda2 = 20.0;
  const auto out = supervised_loss(probs, gt, w, bal, signed_distance_map(m));
  const auto picked = probs[0].gather(0, gt.unsqueeze(0)).squeeze(0);
  const double expected = (-torch::log(picked) * (1.0 + 20.0 * bal)).mean().item<double>();
  EXPECT_NEAR(out.ce.item<double>(), expected, 1e-12);
}

TEST(SupervisedLoss, StrayBlobIncreasesSurfaceLoss) {
  const auto m = disk_mask(32, 8, 8, 4);
  const auto gt = mask_tensor(m);
  const auto phi = signed_distance_map(m);
  auto fg = gt.to(torch::kFloat64) * 0.9 + 0.05;
  const double clean = surface_loss(two_class(fg), phi).item<double>();
  fg.index_put_({torch::indexing::Slice(24, 28), torch::indexing::Slice(24, 28)}, 0.9);
  const double stray = surface_loss(two_class(fg), phi).item<double>();
  EXPECT_GT(stray, clean);
}

TEST(SupervisedLoss, RejectsUnnormalizedProbabilities) {
  const auto gt = torch::zeros({4, 4}, torch::kInt64);
  const auto bad = torch::full({1, 2, 4, 4}, 0.7, torch::kFloat64);
  EXPECT_THROW(supervised_loss(bad, gt, schedule(0), torch::zeros({4, 4}), torch::zeros({4, 4})), NumericError);
}

TEST(LossRanges, DiceCeAndSurfaceLinearity) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto probs = random_probs(8, 8, seed);
    const auto m = random_mask(8, 8, seed);
    const auto gt = mask_tensor(m);
    const double d = dice_loss(probs, gt).item<double>();
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
    EXPECT_GE(weighted_cross_entropy(probs, gt, torch::ones({8, 8})).item<double>(), 0.0);
    const auto phi = signed_distance_map(m);
    const double a = 0.37;
    const auto scaled = torch::stack({probs[0][0], probs[0][1] * a}).unsqueeze(0);
    EXPECT_NEAR(surface_loss(scaled, phi).item<double>(), a * surface_loss(probs, phi).item<double>(), 1e-12);
  }
}

TEST(ConsistencyLossU, Examples) {
  const auto p = random_probs(5, 5, 3);
  EXPECT_EQ(consistency_loss_u(p, p).item<double>(), 0.0);

  auto a = torch::zeros({1, 2, 1, 1}, torch::kFloat64);
  auto b = torch::zeros({1, 2, 1, 1}, torch::kFloat64);
  a[0][0][0][0] = 1.0;
  b[0][1][0][0] = 1.0;
  // Squared error 1 per channel, averaged over 2 entries.
  EXPECT_DOUBLE_EQ(consistency_loss_u(a, b).item<double>(), 1.0);

  const auto q = random_probs(5, 5, 4);
  double sum = 0;
  auto pa = p.accessor<double, 4>(), qa = q.accessor<double, 4>();
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) sum += std::pow(pa[0][c][y][x] - qa[0][c][y][x], 2);
  EXPECT_NEAR(consistency_loss_u(p, q).item<double>(), sum / 50.0, 1e-15);
  EXPECT_THROW(consistency_loss_u(p, q.slice(3, 0, 4)), ShapeError);
}

TEST(ConsistencyLossSs, Examples) {
  const auto p = random_probs(6, 6, 5);
  const auto q = random_probs(6, 6, 6);
  const auto all = torch::ones({1, 6, 6}, torch::kBool);
  EXPECT_NEAR(consistency_loss_ss(p, q, all).item<double>(), consistency_loss_u(p, q).item<double>(), 1e-15);
  EXPECT_EQ(consistency_loss_ss(p, q, torch::zeros({1, 6, 6}, torch::kBool)).item<double>(), 0.0);

  auto half = torch::zeros({1, 6, 6}, torch::kBool);
  half.slice(2, 0, 3).fill_(true);
  const auto restricted = consistency_loss_u(p.slice(3, 0, 3), q.slice(3, 0, 3));
  EXPECT_NEAR(consistency_loss_ss(p, q, half).item<double>(), restricted.item<double>(), 1e-15);
}

TEST(TotalLoss, ArithmeticAndNumericGuards) {
  LossWeights w;
  w.lambda_u = 0.5;
  w.lambda_ss = 0.1;
  EXPECT_NEAR(total_loss(1.0, 2.0, 3.0, w), 2.3, 1e-15);
  EXPECT_EQ(total_loss(1.25, 7.0, 9.0, schedule(0)), 1.25);
  const auto t = total_loss(torch::tensor(1.0, torch::kFloat64), torch::tensor(2.0, torch::kFloat64), torch::tensor(3.0, torch::kFloat64), w);
  EXPECT_NEAR(t.item<double>(), 2.3, 1e-15);
  try {
    total_loss(1.0, std::nan(""), 0.0, w);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("L_u"), std::string::npos);
  }
  EXPECT_THROW(total_loss(torch::tensor(1.0), torch::tensor(0.0), torch::tensor(INFINITY), w), NumericError);
}

TEST(LossGradients, MatchFiniteDifferences) {
  const auto m = disk_mask(6, 2.5, 2.5, 2);
  const auto gt = mask_tensor(m);
  const auto bal = boundary_weight_map(m, 1.5);
  const auto phi = signed_distance_map(m);
  const auto p0 = random_probs(6, 6, 7).clamp(0.05, 0.95);
  const auto guess = random_probs(6, 6, 8);
  auto valid = torch::ones({1, 6, 6}, torch::kBool);
  valid.slice(2, 0, 2).fill_(false);
  const auto factor = 1.0 + 20.0 * bal;

  expect_gradient_matches([&](const torch::Tensor& p) { return weighted_cross_entropy(p, gt, factor); }, p0,
                          "ce x boundary weight");
  expect_gradient_matches([&](const torch::Tensor& p) { return dice_loss(p, gt); }, p0, "dice");
  expect_gradient_matches([&](const torch::Tensor& p) { return surface_loss(p, phi); }, p0, "surface");
  expect_gradient_matches([&](const torch::Tensor& p) { return consistency_loss_u(p, guess); }, p0, "L_u");
  expect_gradient_matches([&](const torch::Tensor& p) { return consistency_loss_ss(p, guess, valid); }, p0, "L_ss");
}
