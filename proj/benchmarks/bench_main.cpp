#include <benchmark/benchmark.h>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "sclera/augment.hpp"
#include "sclera/data_pipeline.hpp"
#include "sclera/losses.hpp"
#include "sclera/network.hpp"
#include "sclera/spatial_transform.hpp"

using namespace sclera;

namespace {

cv::Mat random_gray(int side) {
  cv::Mat m(side, side, CV_32FC1);
  cv::RNG rng(1);
  rng.fill(m, cv::RNG::UNIFORM, 0.0, 1.0);
  return m;
}

}  // namespace

static void BM_Clahe(benchmark::State& state) {
  const auto img = random_gray(static_cast<int>(state.range(0)));
  const int grid = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(aug::apply_clahe(img, 1.5, grid));
  state.SetItemsProcessed(state.iterations() * img.total());
}
BENCHMARK(BM_Clahe)->Args({64, 8})->Args({256, 8})->Args({256, 16})->Unit(benchmark::kMicrosecond);

static void BM_WarpRoundTrip(benchmark::State& state) {
  const auto side = state.range(0);
  const auto field = torch::rand({2, side, side});
  xform::SpatialTransform t;
  t.rotate_deg = 3.5;
  t.dx = 7;
  t.dy = -4;
  t.applied_rotation = t.applied_translation = true;
  for (auto _ : state) {
    const auto fwd = xform::apply(t, field);
    benchmark::DoNotOptimize(xform::apply_inverse(t, fwd.field));
  }
}
BENCHMARK(BM_WarpRoundTrip)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

static void BM_BoundaryWeights(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  cv::Mat mask(side, side, CV_8UC1, cv::Scalar(0));
  cv::Mat roi = mask(cv::Rect(side / 4, side / 3, side / 2, side / 3));
  roi.setTo(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss::boundary_weight_map(mask, 3.0));
    benchmark::DoNotOptimize(loss::signed_distance_map(mask));
  }
}
BENCHMARK(BM_BoundaryWeights)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

static void BM_ForwardToy(benchmark::State& state) {
  torch::set_num_threads(1);
  net::U2NetPlusConfig c;
  c.base_channels = 8;
  c.height = c.width = 64;
  auto model = net::build_model(c);
  model->eval();
  torch::NoGradGuard guard;
  const auto x = torch::rand({state.range(0), 3, 64, 64});
  for (auto _ : state) benchmark::DoNotOptimize(model->forward(x).fused_probs);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardToy)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
