#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wsseg/error.hpp"
#include "wsseg/loss.hpp"
#include "wsseg/nn/ops.hpp"
#include "wsseg/types.hpp"

namespace wsseg::nn {

enum class Upsample { bilinear, transposed };

inline std::string_view to_string(Upsample u) {
  return u == Upsample::bilinear ? "bilinear" : "transposed";
}

struct ModelConfig {
  int depth = 4;
  int base_channels = 32;
  int in_channels = 1;
  int out_classes = 2;
  Upsample upsample = Upsample::bilinear;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void validate(const ModelConfig& cfg) {
  if (cfg.depth < 1) throw ConfigError("model depth must be >= 1");
  if (cfg.depth > 8) throw ConfigError("model depth must be <= 8");
  if (cfg.base_channels < 4) throw ConfigError("base_channels must be >= 4");
  if (cfg.in_channels < 1) throw ConfigError("in_channels must be >= 1");
  if (cfg.out_classes != 2) throw ConfigError("out_classes must be 2 (ship/background)");
}

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
};

template <typename T>
struct ModelParams {
  static constexpr std::uint32_t kFormatVersion = 1;

  ModelConfig config;
  std::uint32_t format_version = kFormatVersion;
  std::vector<NamedTensor> table;
  std::vector<std::vector<T>> values;

  std::size_t tensor_count() const { return table.size(); }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& v : values) n += v.size();
    return n;
  }
  std::span<const T> operator[](std::size_t i) const { return values[i]; }
  std::span<T> operator[](std::size_t i) { return values[i]; }

  ModelParams zeros_like() const {
    ModelParams z = *this;
    for (auto& v : z.values) std::fill(v.begin(), v.end(), T{0});
    return z;
  }

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.config = config;
    out.format_version = format_version;
    out.table = table;
    for (const auto& v : values) out.values.emplace_back(v.begin(), v.end());
    return out;
  }
};

/// Tensor indices of one convolution inside ModelParams.
struct ConvSlot {
  std::size_t weight = 0, bias = 0;
  int in = 0, out = 0, kernel = 3;
};

struct BlockSlots {
  ConvSlot conv1, conv2;
};

/// Standard U-Net topology: per stage two 3x3 conv + ReLU, 2x max-pool
/// down, 2x upsampling + skip concatenation up, 1x1 head and softmax.
struct UNetLayout {
  ModelConfig config;
  std::vector<BlockSlots> encoder;  // stage 0..depth-1
  BlockSlots bottleneck;
  std::vector<BlockSlots> decoder;  // indexed by stage 0..depth-1
  std::vector<ConvSlot> up;         // transposed upsampling only
  ConvSlot head;
  std::vector<NamedTensor> table;

  explicit UNetLayout(const ModelConfig& cfg) : config(cfg) {
    validate(cfg);
    auto ch = [&](int stage) { return cfg.base_channels << stage; };
    auto add_conv = [&](const std::string& name, int in, int out, int k) {
      ConvSlot s{table.size(), table.size() + 1, in, out, k};
      if (k == 2)
        table.push_back({name + ".weight", {out, 2, 2, in}});
      else
        table.push_back({name + ".weight", {out, in, k, k}});
      table.push_back({name + ".bias", {out}});
      return s;
    };
    auto add_block = [&](const std::string& name, int in, int out) {
      BlockSlots b;
      b.conv1 = add_conv(name + ".conv1", in, out, 3);
      b.conv2 = add_conv(name + ".conv2", out, out, 3);
      return b;
    };
    int in = cfg.in_channels;
    for (int s = 0; s < cfg.depth; ++s) {
      encoder.push_back(add_block("enc" + std::to_string(s), in, ch(s)));
      in = ch(s);
    }
    bottleneck = add_block("bottleneck", in, ch(cfg.depth));
    decoder.resize(cfg.depth);
    up.resize(cfg.depth);
    for (int s = cfg.depth - 1; s >= 0; --s) {
      const std::string name = "dec" + std::to_string(s);
      int cat = 0;
      if (cfg.upsample == Upsample::transposed) {
        up[s] = add_conv(name + ".up", ch(s + 1), ch(s), 2);
        cat = 2 * ch(s);
      } else {
        cat = ch(s + 1) + ch(s);
      }
      decoder[s] = add_block(name, cat, ch(s));
    }
    head = add_conv("head", ch(0), cfg.out_classes, 1);
  }
};

inline std::size_t element_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

/// Fresh parameters: weights ~ N(0, 2/fan_in), biases zero.
template <typename T>
ModelParams<T> build_model(const ModelConfig& config, std::uint64_t seed) {
  const UNetLayout layout(config);
  ModelParams<T> p;
  p.config = config;
  p.table = layout.table;
  std::mt19937_64 rng(seed);
  for (const auto& t : p.table) {
    std::vector<T> v(element_count(t.shape), T{0});
    if (t.shape.size() == 4) {
      const int fan_in = t.name.ends_with(".up.weight") ? t.shape[3]
                                                        : t.shape[1] * t.shape[2] * t.shape[3];
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
      for (auto& x : v) x = static_cast<T>(dist(rng));
    }
    p.values.push_back(std::move(v));
  }
  return p;
}

template <typename T>
struct BlockCache {
  Raster<T> in, mid, out;
};

/// Activations retained by a forward pass for the backward pass.
template <typename T>
struct ForwardCache {
  int height = 0, width = 0;          // caller's extent
  int padded_h = 0, padded_w = 0;
  std::vector<BlockCache<T>> encoder;
  std::vector<std::vector<std::uint8_t>> pool_argmax;
  BlockCache<T> bottleneck;
  std::vector<Raster<T>> up_in;       // decoder input from the stage below
  std::vector<BlockCache<T>> decoder;
  Raster<T> head_in;
  Raster<T> probs;                    // padded extent
};

/// Evaluates the network. Instances hold scratch memory; use one per thread.
template <typename T>
class UNet {
 public:
  explicit UNet(const ModelConfig& config) : layout_(config) {}

  const UNetLayout& layout() const { return layout_; }

  /// Padded extent for an input; reflected padding may at most double a side.
  std::pair<int, int> padded_extent(int height, int width) const {
    const int m = 1 << layout_.config.depth;
    const int ph = (height + m - 1) / m * m, pw = (width + m - 1) / m * m;
    if (ph > 2 * height || pw > 2 * width)
      throw ShapeError("input " + std::to_string(height) + "x" + std::to_string(width) +
                       " too small for depth " + std::to_string(layout_.config.depth));
    return {ph, pw};
  }

  BasicPrediction<T> forward(const ModelParams<T>& params, const Raster<T>& input,
                             ForwardCache<T>* cache = nullptr) {
    check(params);
    if (input.channels() != layout_.config.in_channels)
      throw ShapeError("input has " + std::to_string(input.channels()) + " channels, model expects " +
                       std::to_string(layout_.config.in_channels));
    ForwardCache<T> local;
    ForwardCache<T>& c = cache ? *cache : local;
    const int depth = layout_.config.depth;
    c.height = input.height();
    c.width = input.width();
    std::tie(c.padded_h, c.padded_w) = padded_extent(input.height(), input.width());
    c.encoder.assign(depth, {});
    c.pool_argmax.assign(depth, {});
    c.decoder.assign(depth, {});
    c.up_in.assign(depth, {});

    Raster<T> x = (c.padded_h == input.height() && c.padded_w == input.width())
                      ? input
                      : reflect_pad(input, c.padded_h, c.padded_w);
    for (int s = 0; s < depth; ++s) {
      block_forward(params, layout_.encoder[s], std::move(x), c.encoder[s]);
      x = maxpool2_forward(c.encoder[s].out, c.pool_argmax[s]);
    }
    block_forward(params, layout_.bottleneck, std::move(x), c.bottleneck);
    Raster<T> y = c.bottleneck.out;
    for (int s = depth - 1; s >= 0; --s) {
      Raster<T> up;
      if (layout_.config.upsample == Upsample::transposed) {
        const auto& slot = layout_.up[s];
        up = upconv2_forward<T>(y, params[slot.weight], params[slot.bias], slot.out, ws_);
      } else {
        up = upsample2_forward(y);
      }
      c.up_in[s] = std::move(y);
      block_forward(params, layout_.decoder[s], concat_channels(c.encoder[s].out, up),
                    c.decoder[s]);
      y = c.decoder[s].out;
    }
    c.head_in = std::move(y);
    const auto& h = layout_.head;
    c.probs = softmax2_forward(conv1x1_forward<T>(c.head_in, params[h.weight], params[h.bias], h.out));
    BasicPrediction<T> pred(c.padded_h == c.height && c.padded_w == c.width
                                ? c.probs
                                : crop_top_left(c.probs, c.height, c.width));
    if (!cache) c = ForwardCache<T>{};
    return pred;
  }

  /// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(probs) on
  /// the caller's extent.
  void backward(const ModelParams<T>& params, const ForwardCache<T>& c, const Raster<T>& dprobs,
                ModelParams<T>& grads) {
    check(params);
    if (dprobs.height() != c.height || dprobs.width() != c.width || dprobs.channels() != 2)
      throw ShapeError("probability gradient does not match the forward extent");
    const int depth = layout_.config.depth;
    Raster<T> dp(c.padded_h, c.padded_w, 2, T{0});
    for (int ch = 0; ch < 2; ++ch)
      for (int r = 0; r < c.height; ++r)
        std::copy_n(&dprobs(r, 0, ch), c.width, &dp(r, 0, ch));
    const Raster<T> dlogits = softmax2_backward(c.probs, dp);
    const auto& h = layout_.head;
    Raster<T> dy = conv1x1_backward<T>(c.head_in, params[h.weight], dlogits, grads[h.weight],
                                       grads[h.bias]);
    std::vector<Raster<T>> dskip(depth);
    for (int s = 0; s < depth; ++s) {
      Raster<T> dcat = block_backward(params, layout_.decoder[s], c.decoder[s], std::move(dy), grads);
      Raster<T> dup;
      split_channels(dcat, c.encoder[s].out.channels(), dskip[s], dup);
      if (layout_.config.upsample == Upsample::transposed) {
        const auto& slot = layout_.up[s];
        dy = upconv2_backward<T>(c.up_in[s], params[slot.weight], dup, grads[slot.weight],
                                 grads[slot.bias], ws_);
      } else {
        dy = upsample2_backward(dup);
      }
    }
    Raster<T> dx = block_backward(params, layout_.bottleneck, c.bottleneck, std::move(dy), grads);
    for (int s = depth - 1; s >= 0; --s) {
      Raster<T> dpre = maxpool2_backward(dx, c.pool_argmax[s], c.encoder[s].out.height(),
                                         c.encoder[s].out.width());
      auto& a = dpre.data();
      const auto& b = dskip[s].data();
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
      dx = block_backward(params, layout_.encoder[s], c.encoder[s], std::move(dpre), grads,
                          /*need_input_grad=*/s > 0);
    }
  }

 private:
  void check(const ModelParams<T>& params) const {
    if (params.table.size() != layout_.table.size() || !(params.config == layout_.config))
      throw ShapeTableError("parameters do not match the model configuration");
  }

  void block_forward(const ModelParams<T>& p, const BlockSlots& b, Raster<T> in,
                     BlockCache<T>& c) {
    c.in = std::move(in);
    c.mid = conv3x3_forward<T>(c.in, p[b.conv1.weight], p[b.conv1.bias], b.conv1.out, ws_);
    relu_inplace(c.mid);
    c.out = conv3x3_forward<T>(c.mid, p[b.conv2.weight], p[b.conv2.bias], b.conv2.out, ws_);
    relu_inplace(c.out);
  }

  Raster<T> block_backward(const ModelParams<T>& p, const BlockSlots& b, const BlockCache<T>& c,
                           Raster<T> dout, ModelParams<T>& g, bool need_input_grad = true) {
    relu_backward_inplace(c.out, dout);
    Raster<T> dmid;
    conv3x3_backward<T>(c.mid, p[b.conv2.weight], dout, g[b.conv2.weight], g[b.conv2.bias], &dmid,
                        ws_);
    relu_backward_inplace(c.mid, dmid);
    Raster<T> din;
    conv3x3_backward<T>(c.in, p[b.conv1.weight], dmid, g[b.conv1.weight], g[b.conv1.bias],
                        need_input_grad ? &din : nullptr, ws_);
    return din;
  }

  UNetLayout layout_;
  Workspace<T> ws_;
};

/// Converts an image to the network's scalar type. Three-channel inputs
/// are rejected for single-channel models; grayscale them first.
template <typename T>
Raster<T> to_network_input(const ImageSample& image) {
  Raster<T> r(image.height(), image.width(), image.channels());
  std::copy(image.pixels.data().begin(), image.pixels.data().end(), r.data().begin());
  return r;
}

/// Per-pixel class probabilities for one image.
template <typename T>
Prediction forward(const ModelParams<T>& params, const ImageSample& image) {
  UNet<T> net(params.config);
  const auto p = net.forward(params, to_network_input<T>(image));
  Prediction out(p.height(), p.width());
  std::copy(p.probs.data().begin(), p.probs.data().end(), out.probs.data().begin());
  return out;
}

}  // namespace wsseg::nn
