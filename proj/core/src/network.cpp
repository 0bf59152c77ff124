#include "sclera/network.hpp"

#include <numeric>

#include <torch/torch.h>

#include "sclera/error.hpp"

namespace sclera::net {

namespace F = torch::nn::functional;

namespace {

torch::Tensor upsample_like(const torch::Tensor& x, const torch::Tensor& like) {
  if (x.size(2) == like.size(2) && x.size(3) == like.size(3)) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{like.size(2), like.size(3)})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::Tensor pool(const torch::Tensor& x) {
  return F::max_pool2d(x, F::MaxPool2dFuncOptions(2).stride(2).ceil_mode(true));
}

constexpr int kHeights[] = {8, 7, 6, 5, 4, 4, 4};

}  // namespace

void U2NetPlusConfig::validate() const {
  if (encoder_stages < 2 || encoder_stages > 7) throw ConfigError("encoder_stages must be in [2, 7]");
  if (in_channels < 1 || num_classes < 2) throw ConfigError("need >= 1 input channel and >= 2 classes");
  if (base_channels < 4 || base_channels % 4 != 0) throw ConfigError("base_channels must be a positive multiple of 4");
  const int m = size_multiple();
  if (height < m || width < m || height % m != 0 || width % m != 0)
    throw ConfigError("input size " + std::to_string(width) + "x" + std::to_string(height) +
                      " must be a positive multiple of " + std::to_string(m));
}

std::vector<RsuConfig> encoder_table(const U2NetPlusConfig& c) {
  const int b = c.base_channels;
  const int mids[] = {b / 2, b / 2, b, 2 * b, 4 * b, 4 * b, 4 * b};
  const int outs[] = {b, 2 * b, 4 * b, 8 * b, 8 * b, 8 * b, 8 * b};
  std::vector<RsuConfig> table;
  for (int i = 0; i < c.encoder_stages; ++i) {
    RsuConfig r;
    r.height = kHeights[i];
    r.dilated = i >= 5;
    r.norm = c.norm;
    r.in_ch = i == 0 ? c.in_channels : outs[i - 1];
    r.mid_ch = mids[i];
    r.out_ch = outs[i];
    table.push_back(r);
  }
  return table;
}

std::vector<RsuConfig> decoder_table(const U2NetPlusConfig& c) {
  const auto enc = encoder_table(c);
  const int b = c.base_channels;
  const int n = c.encoder_stages;
  std::vector<RsuConfig> table(static_cast<std::size_t>(n - 1));
  // Built top-down: De_{n-1} consumes En_n (upsampled) and En_{n-1}.
  int below = enc.back().out_ch;
  for (int i = n - 2; i >= 0; --i) {
    RsuConfig r;
    r.height = enc[static_cast<std::size_t>(i)].height;
    r.dilated = enc[static_cast<std::size_t>(i)].dilated;
    r.norm = c.norm;
    r.in_ch = below + enc[static_cast<std::size_t>(i)].out_ch;
    r.mid_ch = i == 0 ? std::max(1, b / 4) : enc[static_cast<std::size_t>(i)].mid_ch;
    r.out_ch = i == 0 ? b : enc[static_cast<std::size_t>(i - 1)].out_ch;
    table[static_cast<std::size_t>(i)] = r;
    below = r.out_ch;
  }
  return table;
}

ConvBnReluImpl::ConvBnReluImpl(int in_ch, int out_ch, int dilation, Norm norm) {
  conv_ = register_module("conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_ch, out_ch, 3)
                                                        .padding(dilation)
                                                        .dilation(dilation)
                                                        .bias(false)));
  if (norm == Norm::Batch) {
    bn_ = register_module("bn", torch::nn::BatchNorm2d(out_ch));
  } else {
    // At least two channels per group so 1x1 bottoms still normalize over more than one value.
    const int groups = std::gcd(std::max(1, out_ch / 2), 8);
    gn_ = register_module("gn", torch::nn::GroupNorm(groups, out_ch));
  }
}

torch::Tensor ConvBnReluImpl::forward(const torch::Tensor& x) {
  const auto y = conv_(x);
  return torch::relu(bn_ ? bn_(y) : gn_(y));
}

RsuBlockImpl::RsuBlockImpl(const RsuConfig& config) : config_(config) {
  if (config.height < 2) throw ConfigError("RSU height must be >= 2");
  const int L = config.height;
  input_ = register_module("input", ConvBnRelu(config.in_ch, config.out_ch, 1, config.norm));
  // Encoder levels 1..L; the last level is the dilated bottom.
  for (int i = 1; i <= L; ++i) {
    const int in = i == 1 ? config.out_ch : config.mid_ch;
    const int dilation = config.dilated ? (1 << (i - 1)) : (i == L ? 2 : 1);
    encoder_->push_back(ConvBnRelu(in, config.mid_ch, dilation, config.norm));
  }
  // Decoder levels L-1..1, stored in that order.
  for (int i = L - 1; i >= 1; --i) {
    const int out = i == 1 ? config.out_ch : config.mid_ch;
    const int dilation = config.dilated ? (1 << (i - 1)) : 1;
    decoder_->push_back(ConvBnRelu(2 * config.mid_ch, out, dilation, config.norm));
  }
  register_module("enc", encoder_);
  register_module("dec", decoder_);
}

torch::Tensor RsuBlockImpl::forward(const torch::Tensor& x) {
  const int L = config_.height;
  const auto hx_in = input_(x);
  std::vector<torch::Tensor> skips;
  skips.reserve(static_cast<std::size_t>(L));
  torch::Tensor hx = hx_in;
  for (int i = 0; i < L; ++i) {
    if (i > 0 && !config_.dilated && i < L - 1) hx = pool(hx);
    hx = encoder_[static_cast<std::size_t>(i)]->as<ConvBnRelu>()->forward(hx);
    skips.push_back(hx);
  }
  // skips[L-1] is the bottom; decoder level j pairs with skips[L-2-j].
  torch::Tensor d = skips[static_cast<std::size_t>(L - 1)];
  for (int j = 0; j < L - 1; ++j) {
    const auto& skip = skips[static_cast<std::size_t>(L - 2 - j)];
    if (!config_.dilated) d = upsample_like(d, skip);
    d = decoder_[static_cast<std::size_t>(j)]->as<ConvBnRelu>()->forward(torch::cat({d, skip}, 1));
  }
  return d + hx_in;
}

U2NetPlusImpl::U2NetPlusImpl(const U2NetPlusConfig& config) : config_(config) {
  config.validate();
  const auto enc = encoder_table(config);
  const auto dec = decoder_table(config);
  for (const auto& r : enc) encoder_->push_back(RsuBlock(r));
  for (const auto& r : dec) decoder_->push_back(RsuBlock(r));
  const int P = config.num_classes;
  for (const auto& r : dec)
    side_heads_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(r.out_ch, P, 3).padding(1)));
  side_heads_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(enc.back().out_ch, P, 3).padding(1)));
  fuse_ = torch::nn::Conv2d(torch::nn::Conv2dOptions(P * config.encoder_stages, P, 1));
  register_module("encoder", encoder_);
  register_module("decoder", decoder_);
  register_module("side", side_heads_);
  register_module("fuse", fuse_);
}

NetworkOutputs U2NetPlusImpl::forward(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(1) != config_.in_channels || images.size(2) != config_.height ||
      images.size(3) != config_.width)
    throw ShapeError("network input must be [B, " + std::to_string(config_.in_channels) + ", " +
                     std::to_string(config_.height) + ", " + std::to_string(config_.width) + "]");
  const int n = config_.encoder_stages;

  std::vector<torch::Tensor> enc_out;
  enc_out.reserve(static_cast<std::size_t>(n));
  torch::Tensor hx = images;
  for (int i = 0; i < n; ++i) {
    if (i > 0) hx = pool(hx);
    hx = encoder_[static_cast<std::size_t>(i)]->as<RsuBlock>()->forward(hx);
    enc_out.push_back(hx);
  }

  std::vector<torch::Tensor> dec_out(static_cast<std::size_t>(n - 1));
  torch::Tensor d = enc_out.back();
  for (int i = n - 2; i >= 0; --i) {
    const auto& skip = enc_out[static_cast<std::size_t>(i)];
    d = decoder_[static_cast<std::size_t>(i)]->as<RsuBlock>()->forward(torch::cat({upsample_like(d, skip), skip}, 1));
    dec_out[static_cast<std::size_t>(i)] = d;
  }

  NetworkOutputs out;
  const auto& ref = dec_out.front();
  for (int i = 0; i < n; ++i) {
    const auto& feat = i < n - 1 ? dec_out[static_cast<std::size_t>(i)] : enc_out.back();
    auto logits = side_heads_[static_cast<std::size_t>(i)]->as<torch::nn::Conv2d>()->forward(feat);
    out.side_logits.push_back(upsample_like(logits, ref));
  }
  out.fused_logits = fuse_(torch::cat(out.side_logits, 1));
  for (const auto& l : out.side_logits) out.side_probs.push_back(torch::softmax(l, 1));
  out.fused_probs = torch::softmax(out.fused_logits, 1);
  return out;
}

std::int64_t U2NetPlusImpl::parameter_count() const {
  std::int64_t count = 0;
  for (const auto& p : parameters()) count += p.numel();
  return count;
}

U2NetPlus build_model(const U2NetPlusConfig& config) { return U2NetPlus(config); }

void copy_weights(U2NetPlus& dst, const U2NetPlus& src) {
  torch::NoGradGuard guard;
  auto dp = dst->named_parameters(true);
  for (const auto& item : src->named_parameters(true)) dp[item.key()].copy_(item.value());
  auto db = dst->named_buffers(true);
  for (const auto& item : src->named_buffers(true)) db[item.key()].copy_(item.value());
}

}  // namespace sclera::net
