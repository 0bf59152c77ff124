#include "sclera/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "sclera/error.hpp"

namespace sclera {

namespace {

// Shared lookup so every u8 -> float conversion yields bit-identical values.
const std::array<float, 256>& unit_table() {
  static const std::array<float, 256> table = [] {
    std::array<float, 256> t{};
    for (int i = 0; i < 256; ++i) t[i] = static_cast<float>(i) / 255.0f;
    return t;
  }();
  return table;
}

}  // namespace

cv::Mat to_unit_float(const cv::Mat& u8) {
  CV_Assert(u8.depth() == CV_8U);
  cv::Mat out(u8.rows, u8.cols, CV_MAKETYPE(CV_32F, u8.channels()));
  const auto& table = unit_table();
  const int n = u8.cols * u8.channels();
  for (int y = 0; y < u8.rows; ++y) {
    const auto* src = u8.ptr<std::uint8_t>(y);
    auto* dst = out.ptr<float>(y);
    for (int i = 0; i < n; ++i) dst[i] = table[src[i]];
  }
  return out;
}

cv::Mat to_u8(const cv::Mat& unit) {
  CV_Assert(unit.depth() == CV_32F);
  cv::Mat out(unit.rows, unit.cols, CV_MAKETYPE(CV_8U, unit.channels()));
  const int n = unit.cols * unit.channels();
  for (int y = 0; y < unit.rows; ++y) {
    const auto* src = unit.ptr<float>(y);
    auto* dst = out.ptr<std::uint8_t>(y);
    for (int i = 0; i < n; ++i) {
      const float v = std::clamp(src[i], 0.0f, 1.0f);
      dst[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  }
  return out;
}

cv::Mat read_image(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw LoadError("cannot read image " + path.string());
  if (raw.depth() != CV_8U) {
    cv::Mat tmp;
    raw.convertTo(tmp, CV_8U, raw.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
    raw = tmp;
  }
  cv::Mat rgb;
  switch (raw.channels()) {
    case 1: rgb = raw; break;
    case 3: cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(raw, rgb, cv::COLOR_BGRA2RGB); break;
    default: throw LoadError("unsupported channel count in " + path.string());
  }
  return to_unit_float(rgb);
}

cv::Mat read_mask(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (raw.empty()) throw LoadError("cannot read mask " + path.string());
  cv::Mat mask;
  cv::compare(raw, 127, mask, cv::CMP_GT);  // 0 / 255
  mask /= 255;
  return mask;
}

void write_image(const std::filesystem::path& path, const cv::Mat& unit_rgb) {
  cv::Mat u8 = to_u8(unit_rgb);
  if (u8.channels() == 3) cv::cvtColor(u8, u8, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), u8)) throw Error("cannot write " + path.string());
}

void write_mask(const std::filesystem::path& path, const cv::Mat& mask01) {
  CV_Assert(mask01.type() == CV_8UC1);
  cv::Mat out = mask01 * 255;
  if (!cv::imwrite(path.string(), out)) throw Error("cannot write " + path.string());
}

torch::Tensor image_to_tensor(const cv::Mat& unit) {
  CV_Assert(unit.depth() == CV_32F);
  cv::Mat cont = unit.isContinuous() ? unit : unit.clone();
  auto t = torch::from_blob(cont.data, {cont.rows, cont.cols, cont.channels()}, torch::kFloat32);
  return t.permute({2, 0, 1}).contiguous().clone();
}

torch::Tensor mask_to_tensor(const cv::Mat& mask01) {
  CV_Assert(mask01.type() == CV_8UC1);
  cv::Mat cont = mask01.isContinuous() ? mask01 : mask01.clone();
  auto t = torch::from_blob(cont.data, {cont.rows, cont.cols}, torch::kUInt8);
  return t.to(torch::kInt64);
}

cv::Mat tensor_to_mask(const torch::Tensor& mask) {
  if (mask.dim() != 2) throw ShapeError("tensor_to_mask expects an HxW tensor");
  auto m = (mask.to(torch::kCPU) != 0).to(torch::kUInt8).contiguous();
  cv::Mat out(static_cast<int>(m.size(0)), static_cast<int>(m.size(1)), CV_8UC1);
  std::memcpy(out.data, m.data_ptr<std::uint8_t>(), static_cast<std::size_t>(m.numel()));
  return out;
}

}  // namespace sclera
