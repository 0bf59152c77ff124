#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>

namespace sclera::data {

/// One eye image, optionally with its sclera mask.
///
/// `image` is CV_32FC1 or CV_32FC3 (RGB) with values in [0,1]; `mask` is
/// CV_8UC1 with values in {0,1} and the same spatial size. A sample is
/// labeled exactly when it carries a mask.
struct ImageSample {
  std::string id;
  cv::Mat image;
  std::optional<cv::Mat> mask;

  bool labeled() const { return mask.has_value(); }
  int height() const { return image.rows; }
  int width() const { return image.cols; }
};

/// Checks the ImageSample invariants; throws ShapeError on violation.
void validate_sample(const ImageSample& sample);

struct Rejection {
  std::string id;
  std::string reason;
};

struct DatasetSplit {
  std::vector<ImageSample> train_labeled;
  std::vector<ImageSample> train_unlabeled;
  std::vector<ImageSample> validation;
  std::vector<ImageSample> test;
  /// Samples the loader refused (shape mismatch, unreadable file, ...).
  std::vector<Rejection> rejected;

  std::size_t size() const {
    return train_labeled.size() + train_unlabeled.size() + validation.size() + test.size();
  }
};

/// Directory names relative to the dataset root:
/// `<root>/<split>/<images>/*.png|jpg` and `<root>/<split>/<masks>/<stem>.png`.
struct DatasetLayout {
  std::string train_dir = "train";
  std::string val_dir = "val";
  std::string test_dir = "test";
  std::string images_dir = "images";
  std::string masks_dir = "masks";
};

struct LoadOptions {
  /// Resize every sample to this size after loading (rows, cols); none keeps originals.
  std::optional<cv::Size> resize;
  /// Images are converted to this many channels (1 or 3).
  int channels = 3;
};

/// Loads train/val/test partitions. Train images without a mask become
/// unlabeled samples; val/test images without a mask are rejected.
/// Throws LoadError when a directory is missing or no labeled train sample exists.
DatasetSplit load_dataset(const std::filesystem::path& root, const DatasetLayout& layout = {},
                          const LoadOptions& options = {});

/// Keeps exactly `x_l` labels among the labeled train samples (chosen by
/// `seed`); every other sample is returned unlabeled. Negative `x_l` keeps all.
std::pair<std::vector<ImageSample>, std::vector<ImageSample>> partition_labeled(
    std::vector<ImageSample> train, int x_l, std::uint64_t seed);

/// Bilinear resize for the image, nearest-neighbour for the mask.
ImageSample resize_sample(const ImageSample& sample, cv::Size target);

struct ToyDatasetSpec {
  int count_labeled = 8;
  int count_unlabeled = 64;
  int count_val = 8;
  int count_test = 8;
  int height = 64;
  int width = 64;
  std::uint64_t seed = 7;
};

void validate_toy_spec(const ToyDatasetSpec& spec);

/// Synthetic eye images: two bright sclera crescents flanking a dark iris
/// disk over textured skin, with an illumination gradient and specular dots.
DatasetSplit generate_toy_dataset(const ToyDatasetSpec& spec);

/// Writes a split in the standard layout. Unlabeled train samples get no mask file.
void write_dataset(const DatasetSplit& split, const std::filesystem::path& root,
                   const DatasetLayout& layout = {});

/// Image files (png/jpg/jpeg/bmp) of a directory, sorted by name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace sclera::data
