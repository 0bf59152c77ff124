#include <gtest/gtest.h>

#include <set>

#include <opencv2/imgcodecs.hpp>

#include "sclera/data_pipeline.hpp"
#include "sclera/error.hpp"
#include "sclera/image_io.hpp"
#include "sclera/rng.hpp"
#include "temp_dir.hpp"

using namespace sclera;
using namespace sclera::data;
namespace fs = std::filesystem;

namespace {

cv::Mat random_u8(int h, int w, int type, std::uint64_t seed) {
  cv::Mat m(h, w, type);
  cv::theRNG().state = seed;
  cv::randu(m, 0, 256);
  return m;
}

cv::Mat random_mask(int h, int w, std::uint64_t seed) {
  auto rng = make_rng(seed);
  cv::Mat m(h, w, CV_8UC1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at<unsigned char>(y, x) = bernoulli(rng, 0.4) ? 1 : 0;
  return m;
}

void write_pair(const fs::path& split, const std::string& stem, int h, int w, bool with_mask, int mask_h = -1) {
  fs::create_directories(split / "images");
  fs::create_directories(split / "masks");
  cv::imwrite((split / "images" / (stem + ".png")).string(), random_u8(h, w, CV_8UC3, std::hash<std::string>{}(stem)));
  if (with_mask) {
    cv::Mat m = random_mask(mask_h > 0 ? mask_h : h, w, 3) * 255;
    cv::imwrite((split / "masks" / (stem + ".png")).string(), m);
  }
}

void write_eval_splits(const fs::path& root) {
  write_pair(root / "val", "v0", 16, 16, true);
  write_pair(root / "test", "t0", 16, 16, true);
}

void expect_same(const cv::Mat& a, const cv::Mat& b) {
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.type(), b.type());
  EXPECT_EQ(cv::norm(a, b, cv::NORM_INF), 0.0);
}

}  // namespace

TEST(LoadDataset, PairsImagesWithMasks) {
  sclera::testing::TempDir tmp;
  for (int i = 0; i < 4; ++i) write_pair(tmp.path() / "train", "lab" + std::to_string(i), 16, 16, true);
  for (int i = 0; i < 10; ++i) write_pair(tmp.path() / "train", "unl" + std::to_string(i), 16, 16, false);
  write_eval_splits(tmp.path());

  const auto split = load_dataset(tmp.path());
  EXPECT_EQ(split.train_labeled.size(), 4u);
  EXPECT_EQ(split.train_unlabeled.size(), 10u);
  EXPECT_EQ(split.validation.size(), 1u);
  EXPECT_EQ(split.test.size(), 1u);
  EXPECT_TRUE(split.rejected.empty());
  for (const auto& s : split.train_labeled) {
    EXPECT_TRUE(s.labeled());
    EXPECT_NO_THROW(validate_sample(s));
  }
  for (const auto& s : split.train_unlabeled) EXPECT_FALSE(s.labeled());
}

TEST(LoadDataset, RejectsMaskSizeMismatchAndContinues) {
  sclera::testing::TempDir tmp;
  write_pair(tmp.path() / "train", "good", 16, 16, true);
  write_pair(tmp.path() / "train", "bad", 16, 16, true, 12);
  write_eval_splits(tmp.path());

  const auto split = load_dataset(tmp.path());
  ASSERT_EQ(split.train_labeled.size(), 1u);
  EXPECT_EQ(split.train_labeled[0].id, "good");
  ASSERT_EQ(split.rejected.size(), 1u);
  EXPECT_EQ(split.rejected[0].id, "bad");
}

TEST(LoadDataset, MissingDirectoryIsFatal) {
  sclera::testing::TempDir tmp;
  write_pair(tmp.path() / "train", "a", 16, 16, true);
  EXPECT_THROW(load_dataset(tmp.path()), LoadError);
  EXPECT_THROW(load_dataset(tmp.path() / "nowhere"), LoadError);
}

TEST(LoadDataset, NoLabeledTrainSampleIsFatal) {
  sclera::testing::TempDir tmp;
  write_pair(tmp.path() / "train", "a", 16, 16, false);
  write_eval_splits(tmp.path());
  EXPECT_THROW(load_dataset(tmp.path()), LoadError);
}

TEST(LoadDataset, ValidationImageWithoutMaskIsRejected) {
  sclera::testing::TempDir tmp;
  write_pair(tmp.path() / "train", "a", 16, 16, true);
  write_eval_splits(tmp.path());
  write_pair(tmp.path() / "val", "v1", 16, 16, false);
  const auto split = load_dataset(tmp.path());
  EXPECT_EQ(split.validation.size(), 1u);
  ASSERT_EQ(split.rejected.size(), 1u);
  EXPECT_EQ(split.rejected[0].id, "v1");
}

TEST(LoadDataset, AntiAliasedMaskIsBinarized) {
  sclera::testing::TempDir tmp;
  write_pair(tmp.path() / "train", "a", 8, 8, false);
  cv::Mat m(8, 8, CV_8UC1);
  for (int i = 0; i < 64; ++i) m.at<unsigned char>(i / 8, i % 8) = static_cast<unsigned char>(i * 4);
  cv::imwrite((tmp.path() / "train/masks/a.png").string(), m);
  write_eval_splits(tmp.path());
  const auto split = load_dataset(tmp.path());
  ASSERT_EQ(split.train_labeled.size(), 1u);
  const cv::Mat& got = *split.train_labeled[0].mask;
  for (int i = 0; i < 64; ++i) EXPECT_EQ(got.at<unsigned char>(i / 8, i % 8), i * 4 > 127 ? 1 : 0);
}

TEST(ToyDataset, CountsAndLabels) {
  const ToyDatasetSpec spec;
  const auto split = generate_toy_dataset(spec);
  EXPECT_EQ(split.size(), 88u);
  EXPECT_EQ(split.train_labeled.size(), 8u);
  EXPECT_EQ(split.train_unlabeled.size(), 64u);
  EXPECT_EQ(split.validation.size(), 8u);
  EXPECT_EQ(split.test.size(), 8u);
  std::set<std::string> ids;
  auto check = [&](const std::vector<ImageSample>& v, bool labeled) {
    for (const auto& s : v) {
      EXPECT_EQ(s.labeled(), labeled);
      EXPECT_TRUE(ids.insert(s.id).second) << s.id;
      EXPECT_EQ(s.image.type(), CV_32FC3);
      EXPECT_EQ(s.height(), 64);
      EXPECT_NO_THROW(validate_sample(s));
    }
  };
  check(split.train_labeled, true);
  check(split.train_unlabeled, false);
  check(split.validation, true);
  check(split.test, true);
}

TEST(ToyDataset, DeterministicPerSeed) {
  ToyDatasetSpec spec;
  spec.count_unlabeled = 4;
  const auto a = generate_toy_dataset(spec);
  const auto b = generate_toy_dataset(spec);
  for (std::size_t i = 0; i < a.train_labeled.size(); ++i) {
    expect_same(a.train_labeled[i].image, b.train_labeled[i].image);
    expect_same(*a.train_labeled[i].mask, *b.train_labeled[i].mask);
  }
  spec.seed = 8;
  const auto c = generate_toy_dataset(spec);
  EXPECT_GT(cv::norm(a.train_labeled[0].image, c.train_labeled[0].image, cv::NORM_INF), 0.0);
}

TEST(ToyDataset, ForegroundFractionInSanityBand) {
  ToyDatasetSpec spec;
  spec.count_labeled = 100;
  spec.count_unlabeled = spec.count_val = spec.count_test = 0;
  const auto split = generate_toy_dataset(spec);
  double total = 0;
  for (const auto& s : split.train_labeled) total += cv::mean(*s.mask)[0];
  const double mean = total / 100.0;
  EXPECT_GT(mean, 0.05);
  EXPECT_LT(mean, 0.5);
}

TEST(ToyDataset, GrayReplicatedToThreeChannels) {
  ToyDatasetSpec spec;
  spec.count_unlabeled = 0;
  const auto split = generate_toy_dataset(spec);
  std::vector<cv::Mat> ch;
  cv::split(split.train_labeled[0].image, ch);
  EXPECT_EQ(cv::norm(ch[0], ch[1], cv::NORM_INF), 0.0);
  EXPECT_EQ(cv::norm(ch[0], ch[2], cv::NORM_INF), 0.0);
}

TEST(ToyDataset, RejectsTinyImagesAndNegativeCounts) {
  ToyDatasetSpec spec;
  spec.height = spec.width = 8;
  EXPECT_THROW(validate_toy_spec(spec), ConfigError);
  spec = {};
  spec.count_val = -1;
  EXPECT_THROW(validate_toy_spec(spec), ConfigError);
}

TEST(ToyDataset, WriteReadRoundTripIsPixelIdentical) {
  sclera::testing::TempDir tmp;
  ToyDatasetSpec spec;
  spec.count_unlabeled = 5;
  const auto split = generate_toy_dataset(spec);
  write_dataset(split, tmp.path());
  const auto back = load_dataset(tmp.path());
  ASSERT_EQ(back.train_labeled.size(), split.train_labeled.size());
  ASSERT_EQ(back.train_unlabeled.size(), split.train_unlabeled.size());
  ASSERT_EQ(back.test.size(), split.test.size());
  for (std::size_t i = 0; i < split.train_labeled.size(); ++i) {
    EXPECT_EQ(back.train_labeled[i].id, split.train_labeled[i].id);
    expect_same(back.train_labeled[i].image, split.train_labeled[i].image);
    expect_same(*back.train_labeled[i].mask, *split.train_labeled[i].mask);
  }
  for (std::size_t i = 0; i < split.train_unlabeled.size(); ++i)
    expect_same(back.train_unlabeled[i].image, split.train_unlabeled[i].image);
  for (std::size_t i = 0; i < split.test.size(); ++i) expect_same(*back.test[i].mask, *split.test[i].mask);
}

namespace {

std::vector<ImageSample> labeled_pool(int n) {
  std::vector<ImageSample> v;
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "s%04d", i);
    v.push_back({id, cv::Mat(8, 8, CV_32FC1, cv::Scalar(0.5)), cv::Mat(8, 8, CV_8UC1, cv::Scalar(1))});
  }
  return v;
}

}  // namespace

TEST(PartitionLabeled, KeepsExactlyXlLabels) {
  auto [lab, unl] = partition_labeled(labeled_pool(700), 4, 0);
  EXPECT_EQ(lab.size(), 4u);
  EXPECT_EQ(unl.size(), 696u);
  for (const auto& s : lab) EXPECT_TRUE(s.labeled());
  for (const auto& s : unl) EXPECT_FALSE(s.labeled());
}

TEST(PartitionLabeled, AllLabelsKept) {
  auto [lab, unl] = partition_labeled(labeled_pool(12), 12, 0);
  EXPECT_EQ(lab.size(), 12u);
  EXPECT_TRUE(unl.empty());
  auto [lab2, unl2] = partition_labeled(labeled_pool(12), -1, 0);
  EXPECT_EQ(lab2.size(), 12u);
}

TEST(PartitionLabeled, UnlabeledInputsStayUnlabeled) {
  auto pool = labeled_pool(6);
  pool.push_back({"u0", cv::Mat(8, 8, CV_32FC1, cv::Scalar(0.1)), std::nullopt});
  auto [lab, unl] = partition_labeled(pool, 2, 1);
  EXPECT_EQ(lab.size(), 2u);
  EXPECT_EQ(unl.size(), 5u);
  EXPECT_THROW(partition_labeled(pool, 7, 1), ConfigError);
}

TEST(PartitionLabeled, DeterministicPerSeedAndOrderIndependent) {
  auto ids = [](const std::vector<ImageSample>& v) {
    std::set<std::string> s;
    for (const auto& x : v) s.insert(x.id);
    return s;
  };
  const auto a = partition_labeled(labeled_pool(50), 5, 42).first;
  auto shuffled = labeled_pool(50);
  std::reverse(shuffled.begin(), shuffled.end());
  const auto b = partition_labeled(shuffled, 5, 42).first;
  const auto c = partition_labeled(labeled_pool(50), 5, 43).first;
  EXPECT_EQ(ids(a), ids(b));
  EXPECT_NE(ids(a), ids(c));
}

TEST(ResizeSample, TargetSizeAndBinaryMask) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ImageSample s{"r", to_unit_float(random_u8(37, 53, CV_8UC3, seed)), random_mask(37, 53, seed)};
    const auto out = resize_sample(s, cv::Size(32, 24));
    EXPECT_EQ(out.width(), 32);
    EXPECT_EQ(out.height(), 24);
    double lo, hi;
    cv::minMaxLoc(*out.mask, &lo, &hi);
    EXPECT_GE(lo, 0);
    EXPECT_LE(hi, 1);
    cv::minMaxLoc(out.image.reshape(1), &lo, &hi);
    EXPECT_GE(lo, 0);
    EXPECT_LE(hi, 1);
  }
}

TEST(ResizeSample, LargeInputDownscales) {
  ImageSample s{"big", cv::Mat(3648, 5472, CV_32FC3, cv::Scalar(0.2, 0.4, 0.6)), std::nullopt};
  const auto out = resize_sample(s, cv::Size(256, 256));
  EXPECT_EQ(out.image.size(), cv::Size(256, 256));
}

TEST(ResizeSample, IdentityIsBitExact) {
  ImageSample s{"r", to_unit_float(random_u8(20, 30, CV_8UC3, 5)), random_mask(20, 30, 5)};
  const auto out = resize_sample(s, s.image.size());
  expect_same(out.image, s.image);
  expect_same(*out.mask, *s.mask);
}

TEST(ResizeSample, TooSmallTargetRejected) {
  ImageSample s{"r", cv::Mat(20, 20, CV_32FC1, cv::Scalar(0)), std::nullopt};
  EXPECT_THROW(resize_sample(s, cv::Size(4, 20)), ConfigError);
}

TEST(ValidateSample, CatchesInvariantViolations) {
  ImageSample s{"v", cv::Mat(4, 4, CV_32FC1, cv::Scalar(0)), cv::Mat(4, 5, CV_8UC1, cv::Scalar(0))};
  EXPECT_THROW(validate_sample(s), ShapeError);
  s.mask = cv::Mat(4, 4, CV_8UC1, cv::Scalar(2));
  EXPECT_THROW(validate_sample(s), ShapeError);
}
