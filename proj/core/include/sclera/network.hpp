#pragma once

#include <cstdint>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/batchnorm.h>
#include <torch/nn/modules/container/modulelist.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/modules/normalization.h>
#include <torch/nn/pimpl.h>

namespace sclera::net {

/// Normalization after each 3x3 convolution.
enum class Norm { Batch, Group };

/// One residual U-block. `height` counts the encoder levels including the
/// dilated bottom; the dilated ("F") variant keeps resolution and grows the
/// dilation rate with depth instead of pooling.
struct RsuConfig {
  int height = 4;
  int in_ch = 3;
  int mid_ch = 16;
  int out_ch = 64;
  bool dilated = false;
  Norm norm = Norm::Group;
};

/// Nested-U encoder-decoder.
///
/// The encoder stage heights are the first `encoder_stages` entries of
/// {8, 7, 6, 5, 4, F, F}; decoder stage i mirrors encoder stage i. Channel
/// widths follow the published U2Net table scaled by base_channels / 64:
///
///   stage   enc (mid, out)      dec (mid, out)
///   1       (b/2, b)            (b/4, b)
///   2       (b/2, 2b)           (b/2, b)
///   3       (b,   4b)           (b,   2b)
///   4       (2b,  8b)           (2b,  4b)
///   5       (4b,  8b)           (4b,  8b)
///   6       (4b,  8b)           (4b,  8b)
///   7       (4b,  8b)           -
struct U2NetPlusConfig {
  int in_channels = 3;
  int num_classes = 2;
  int base_channels = 64;
  int height = 256;
  int width = 256;
  int encoder_stages = 7;
  Norm norm = Norm::Group;

  void validate() const;
  /// Input sides must be divisible by this.
  int size_multiple() const { return 1 << (encoder_stages - 1); }
};

std::vector<RsuConfig> encoder_table(const U2NetPlusConfig& config);
/// Decoder stages ordered De_1 ... De_{n-1}.
std::vector<RsuConfig> decoder_table(const U2NetPlusConfig& config);

/// Side maps are ordered S_side^(1..n) = De_1 ... De_{n-1}, En_n. All tensors
/// are [B, P, H, W] at input resolution.
struct NetworkOutputs {
  std::vector<torch::Tensor> side_logits;
  std::vector<torch::Tensor> side_probs;
  torch::Tensor fused_logits;
  torch::Tensor fused_probs;
};

class ConvBnReluImpl : public torch::nn::Module {
 public:
  ConvBnReluImpl(int in_ch, int out_ch, int dilation, Norm norm);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_{nullptr};
  torch::nn::BatchNorm2d bn_{nullptr};
  torch::nn::GroupNorm gn_{nullptr};
};
TORCH_MODULE(ConvBnRelu);

class RsuBlockImpl : public torch::nn::Module {
 public:
  explicit RsuBlockImpl(const RsuConfig& config);
  torch::Tensor forward(const torch::Tensor& x);
  const RsuConfig& config() const { return config_; }

 private:
  RsuConfig config_;
  ConvBnRelu input_{nullptr};
  torch::nn::ModuleList encoder_;
  torch::nn::ModuleList decoder_;
};
TORCH_MODULE(RsuBlock);

class U2NetPlusImpl : public torch::nn::Module {
 public:
  explicit U2NetPlusImpl(const U2NetPlusConfig& config);

  /// [B, C, H, W] images in [0,1] to side and fused softmax maps.
  NetworkOutputs forward(const torch::Tensor& images);

  const U2NetPlusConfig& config() const { return config_; }
  std::int64_t parameter_count() const;

 private:
  U2NetPlusConfig config_;
  torch::nn::ModuleList encoder_;
  torch::nn::ModuleList decoder_;
  torch::nn::ModuleList side_heads_;
  torch::nn::Conv2d fuse_{nullptr};
};
TORCH_MODULE(U2NetPlus);

U2NetPlus build_model(const U2NetPlusConfig& config);

/// Copies parameters and buffers of `src` into `dst` (same architecture).
void copy_weights(U2NetPlus& dst, const U2NetPlus& src);

}  // namespace sclera::net
