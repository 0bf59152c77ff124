#include <cmath>
#include <cstdio>

#include <opencv2/imgproc.hpp>

#include "sclera/data_pipeline.hpp"
#include "sclera/error.hpp"
#include "sclera/image_io.hpp"
#include "sclera/rng.hpp"

namespace sclera::data {

void validate_toy_spec(const ToyDatasetSpec& spec) {
  if (spec.count_labeled < 0 || spec.count_unlabeled < 0 || spec.count_val < 0 || spec.count_test < 0)
    throw ConfigError("toy dataset counts must be non-negative");
  if (spec.height < 32 || spec.width < 32) throw ConfigError("toy images must be at least 32x32");
}

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Sinusoid {
  double kx, ky, phase, amp;
};

ImageSample render_eye(const std::string& id, int H, int W, Rng& rng, bool with_mask) {
  const double cx = W * (0.5 + uniform(rng, -0.08, 0.08));
  const double cy = H * (0.5 + uniform(rng, -0.06, 0.06));
  const double a = W * uniform(rng, 0.36, 0.44);
  const double b = H * uniform(rng, 0.18, 0.24);
  const double tilt = uniform(rng, -0.15, 0.15);
  const double ix = cx + a * 0.5 * uniform(rng, -0.35, 0.35);
  const double iy = cy + H * uniform(rng, -0.04, 0.04);
  const double iris_r = b * uniform(rng, 1.0, 1.25);
  const double pupil_r = iris_r * uniform(rng, 0.35, 0.5);

  const double skin = uniform(rng, 0.35, 0.55);
  const double sclera = uniform(rng, 0.75, 0.92);
  const double iris = uniform(rng, 0.15, 0.32);
  const double pupil = uniform(rng, 0.02, 0.08);

  std::vector<Sinusoid> texture(4);
  for (auto& s : texture) {
    s.kx = uniform(rng, 0.05, 0.6);
    s.ky = uniform(rng, 0.05, 0.6);
    s.phase = uniform(rng, 0, 2 * kPi);
    s.amp = uniform(rng, 0.01, 0.035);
  }
  struct Vessel {
    double y0, amp, freq, phase;
  };
  std::vector<Vessel> vessels(static_cast<std::size_t>(uniform_int(rng, 2, 4)));
  for (auto& v : vessels) {
    v.y0 = cy + uniform(rng, -0.8, 0.8) * b;
    v.amp = uniform(rng, 0.5, 2.5) * H / 64.0;
    v.freq = uniform(rng, 0.1, 0.3) * 64.0 / W;
    v.phase = uniform(rng, 0, 2 * kPi);
  }
  const double grad_strength = uniform(rng, -0.4, 0.4);
  const double grad_dir = uniform(rng, 0, 2 * kPi);

  cv::Mat gray(H, W, CV_32FC1);
  cv::Mat mask(H, W, CV_8UC1);
  const double ct = std::cos(tilt), st = std::sin(tilt);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const double u = ct * dx + st * dy, v = -st * dx + ct * dy;
      const bool in_eye = (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
      const double ir = std::hypot(x + 0.5 - ix, y + 0.5 - iy);
      const bool in_iris = ir <= iris_r;
      const bool is_sclera = in_eye && !in_iris;

      double value = skin;
      if (in_eye) value = in_iris ? (ir <= pupil_r ? pupil : iris) : sclera;
      if (is_sclera) {
        for (const auto& vs : vessels) {
          const double yc = vs.y0 + vs.amp * std::sin(vs.freq * x + vs.phase);
          if (std::abs(y + 0.5 - yc) < 0.6) value -= 0.12;
        }
      }
      for (const auto& s : texture) value += s.amp * std::sin(s.kx * x + s.ky * y + s.phase);
      value += uniform(rng, -0.02, 0.02);
      const double g = ((x - W / 2.0) * std::cos(grad_dir) + (y - H / 2.0) * std::sin(grad_dir)) / W;
      value *= 1.0 + grad_strength * g;

      gray.at<float>(y, x) = static_cast<float>(value);
      mask.at<std::uint8_t>(y, x) = is_sclera ? 1 : 0;
    }
  }
  cv::GaussianBlur(gray, gray, cv::Size(3, 3), 0.6);

  const auto dots = uniform_int(rng, 1, 3);
  for (std::int64_t d = 0; d < dots; ++d) {
    const double ang = uniform(rng, 0, 2 * kPi);
    const double rad = uniform(rng, 0.2, 0.9) * iris_r;
    const cv::Point c(static_cast<int>(ix + rad * std::cos(ang)), static_cast<int>(iy + rad * std::sin(ang)));
    const int dot_r = std::max(1, static_cast<int>(std::lround(uniform(rng, 0.8, 1.8) * W / 64.0)));
    cv::circle(gray, c, dot_r, cv::Scalar(1.0), cv::FILLED);
  }

  cv::min(cv::max(gray, 0.0), 1.0, gray);
  // Quantize through 8 bits so the in-memory sample matches what is written to disk.
  cv::Mat unit = to_unit_float(to_u8(gray));
  ImageSample sample;
  sample.id = id;
  cv::cvtColor(unit, sample.image, cv::COLOR_GRAY2RGB);
  if (with_mask) sample.mask = mask;
  return sample;
}

std::string make_id(const char* part, int i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "toy_%s_%04d", part, i);
  return buf;
}

}  // namespace

DatasetSplit generate_toy_dataset(const ToyDatasetSpec& spec) {
  validate_toy_spec(spec);
  DatasetSplit split;
  // Separate streams keep each partition stable when another count changes.
  auto make = [&](const char* part, int count, std::uint64_t stream, bool with_mask) {
    Rng rng = make_rng(spec.seed, stream);
    std::vector<ImageSample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(render_eye(make_id(part, i), spec.height, spec.width, rng, with_mask));
    return out;
  };
  split.train_labeled = make("lab", spec.count_labeled, 1, true);
  split.train_unlabeled = make("unl", spec.count_unlabeled, 2, false);
  split.validation = make("val", spec.count_val, 3, true);
  split.test = make("test", spec.count_test, 4, true);
  return split;
}

}  // namespace sclera::data
