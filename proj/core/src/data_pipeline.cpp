#include "sclera/data_pipeline.hpp"

#include <algorithm>
#include <iostream>
#include <map>

#include <opencv2/imgproc.hpp>

#include "sclera/error.hpp"
#include "sclera/image_io.hpp"
#include "sclera/rng.hpp"

namespace fs = std::filesystem;

namespace sclera::data {

void validate_sample(const ImageSample& sample) {
  if (sample.image.empty()) throw ShapeError(sample.id + ": empty image");
  if (sample.image.depth() != CV_32F || (sample.image.channels() != 1 && sample.image.channels() != 3))
    throw ShapeError(sample.id + ": image must be float32 with 1 or 3 channels");
  if (!sample.mask) return;
  const cv::Mat& m = *sample.mask;
  if (m.type() != CV_8UC1) throw ShapeError(sample.id + ": mask must be CV_8UC1");
  if (m.size() != sample.image.size()) throw ShapeError(sample.id + ": mask/image size mismatch");
  double lo = 0, hi = 0;
  cv::minMaxLoc(m, &lo, &hi);
  if (hi > 1) throw ShapeError(sample.id + ": mask values must be 0 or 1");
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

cv::Mat to_channels(const cv::Mat& img, int channels) {
  if (img.channels() == channels) return img;
  cv::Mat out;
  if (channels == 3)
    cv::cvtColor(img, out, cv::COLOR_GRAY2RGB);
  else
    cv::cvtColor(img, out, cv::COLOR_RGB2GRAY);
  return out;
}

struct PartitionResult {
  std::vector<ImageSample> labeled;
  std::vector<ImageSample> unlabeled;
};

PartitionResult load_partition(const fs::path& dir, const DatasetLayout& layout, const LoadOptions& options,
                               bool masks_required, std::vector<Rejection>& rejected) {
  const fs::path images = dir / layout.images_dir;
  const fs::path masks = dir / layout.masks_dir;
  if (!fs::is_directory(images)) throw LoadError("missing directory " + images.string());

  std::map<std::string, fs::path> mask_by_stem;
  if (fs::is_directory(masks)) {
    for (const auto& p : list_images(masks)) mask_by_stem[p.stem().string()] = p;
  }

  PartitionResult result;
  for (const auto& path : list_images(images)) {
    ImageSample sample;
    sample.id = path.stem().string();
    try {
      sample.image = to_channels(read_image(path), options.channels);
    } catch (const LoadError& e) {
      std::cerr << "warning: " << e.what() << "\n";
      rejected.push_back({sample.id, "unreadable image"});
      continue;
    }
    if (auto it = mask_by_stem.find(sample.id); it != mask_by_stem.end()) {
      cv::Mat mask;
      try {
        mask = read_mask(it->second);
      } catch (const LoadError& e) {
        std::cerr << "warning: " << e.what() << "\n";
        rejected.push_back({sample.id, "unreadable mask"});
        continue;
      }
      if (mask.size() != sample.image.size()) {
        std::cerr << "warning: rejecting " << sample.id << ": mask " << mask.cols << "x" << mask.rows
                  << " does not match image " << sample.image.cols << "x" << sample.image.rows << "\n";
        rejected.push_back({sample.id, "mask/image size mismatch"});
        continue;
      }
      sample.mask = mask;
    } else if (masks_required) {
      std::cerr << "warning: rejecting " << sample.id << ": evaluation samples need a mask\n";
      rejected.push_back({sample.id, "missing mask"});
      continue;
    }
    if (options.resize) sample = resize_sample(sample, *options.resize);
    (sample.labeled() ? result.labeled : result.unlabeled).push_back(std::move(sample));
  }
  return result;
}

}  // namespace

DatasetSplit load_dataset(const fs::path& root, const DatasetLayout& layout, const LoadOptions& options) {
  if (!fs::is_directory(root)) throw LoadError("dataset root does not exist: " + root.string());
  if (options.channels != 1 && options.channels != 3) throw ConfigError("channels must be 1 or 3");

  DatasetSplit split;
  auto train = load_partition(root / layout.train_dir, layout, options, false, split.rejected);
  split.train_labeled = std::move(train.labeled);
  split.train_unlabeled = std::move(train.unlabeled);
  split.validation = load_partition(root / layout.val_dir, layout, options, true, split.rejected).labeled;
  split.test = load_partition(root / layout.test_dir, layout, options, true, split.rejected).labeled;

  if (split.train_labeled.empty())
    throw LoadError("no labeled training samples under " + (root / layout.train_dir).string());
  if (!split.rejected.empty())
    std::cerr << "warning: " << split.rejected.size() << " sample(s) rejected while loading " << root << "\n";
  return split;
}

std::pair<std::vector<ImageSample>, std::vector<ImageSample>> partition_labeled(std::vector<ImageSample> train,
                                                                               int x_l, std::uint64_t seed) {
  std::sort(train.begin(), train.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  std::vector<std::size_t> labeled_idx;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (train[i].labeled()) labeled_idx.push_back(i);

  if (x_l < 0) x_l = static_cast<int>(labeled_idx.size());
  if (static_cast<std::size_t>(x_l) > labeled_idx.size())
    throw ConfigError("x_l = " + std::to_string(x_l) + " exceeds the " + std::to_string(labeled_idx.size()) +
                      " labeled training samples available");

  Rng rng = make_rng(seed, 0x9a27);
  shuffle(labeled_idx.begin(), labeled_idx.end(), rng);
  std::vector<bool> keep(train.size(), false);
  for (int i = 0; i < x_l; ++i) keep[labeled_idx[static_cast<std::size_t>(i)]] = true;

  std::vector<ImageSample> labeled, unlabeled;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (keep[i]) {
      labeled.push_back(std::move(train[i]));
    } else {
      train[i].mask.reset();
      unlabeled.push_back(std::move(train[i]));
    }
  }
  return {std::move(labeled), std::move(unlabeled)};
}

ImageSample resize_sample(const ImageSample& sample, cv::Size target) {
  if (target.width < 8 || target.height < 8) throw ConfigError("resize target must be at least 8x8");
  if (sample.image.size() == target) return sample;
  ImageSample out;
  out.id = sample.id;
  cv::resize(sample.image, out.image, target, 0, 0, cv::INTER_LINEAR);
  cv::min(cv::max(out.image, 0.0), 1.0, out.image);
  if (sample.mask) {
    cv::Mat m;
    cv::resize(*sample.mask, m, target, 0, 0, cv::INTER_NEAREST);
    out.mask = m;
  }
  return out;
}

void write_dataset(const DatasetSplit& split, const fs::path& root, const DatasetLayout& layout) {
  auto write_part = [&](const std::string& part, const std::vector<ImageSample>& samples) {
    const fs::path images = root / part / layout.images_dir;
    const fs::path masks = root / part / layout.masks_dir;
    fs::create_directories(images);
    fs::create_directories(masks);
    for (const auto& s : samples) {
      write_image(images / (s.id + ".png"), s.image);
      if (s.mask) write_mask(masks / (s.id + ".png"), *s.mask);
    }
  };
  std::vector<ImageSample> train = split.train_labeled;
  train.insert(train.end(), split.train_unlabeled.begin(), split.train_unlabeled.end());
  write_part(layout.train_dir, train);
  write_part(layout.val_dir, split.validation);
  write_part(layout.test_dir, split.test);
}

}  // namespace sclera::data
