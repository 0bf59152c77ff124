#pragma once

#include <filesystem>

#include <opencv2/core.hpp>
#include <torch/types.h>

namespace sclera {

/// 8-bit (1 or 3 channel) to float32 in [0,1]. Colour order is left as stored.
cv::Mat to_unit_float(const cv::Mat& u8);
/// float32 in [0,1] to 8-bit with rounding; values outside [0,1] are clamped.
cv::Mat to_u8(const cv::Mat& unit);

/// Reads an image as float32 RGB (or gray when the file is single channel).
cv::Mat read_image(const std::filesystem::path& path);
/// Reads a mask and binarizes it: any pixel > 127 is foreground (1).
cv::Mat read_mask(const std::filesystem::path& path);

void write_image(const std::filesystem::path& path, const cv::Mat& unit_rgb);
/// Writes a {0,1} mask as a {0,255} single-channel PNG.
void write_mask(const std::filesystem::path& path, const cv::Mat& mask01);

/// HxWxC float image to a CxHxW float tensor (copy).
torch::Tensor image_to_tensor(const cv::Mat& unit);
/// HxW uint8 mask to an HxW int64 tensor (copy).
torch::Tensor mask_to_tensor(const cv::Mat& mask01);
/// HxW tensor (any dtype) to a CV_8UC1 {0,1} mask.
cv::Mat tensor_to_mask(const torch::Tensor& mask);

}  // namespace sclera
