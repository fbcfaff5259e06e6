#pragma once

// FCN-8s forward inference on a VGG16 backbone, CPU only.
//
// Layer geometry follows the canonical FCN-8s design: conv1_1 is padded by
// 100 so every pooling stage stays valid for small inputs, skip connections
// are cropped at fixed offsets (5 for pool4, 9 for pool3) and the stride-8
// upsampled map is cropped at offset 31 back to the input size.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tumorseg/binary_io.hpp"
#include "tumorseg/parallel.hpp"
#include "tumorseg/random.hpp"
#include "tumorseg/score_map.hpp"
#include "tumorseg/volume.hpp"

namespace tumorseg::fcn {

/// Height x width x channels activation, channel-fastest.
struct FeatureMap2D {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  FeatureMap2D() = default;
  FeatureMap2D(int h, int w, int c, float fill = 0.0f) : height(h), width(w), channels(c) {
    if (h <= 0 || w <= 0 || c <= 0) {
      throw Error(ErrorCode::ShapeMismatch, "feature map dims must be positive: " + std::to_string(h) + "x" +
                                                std::to_string(w) + "x" + std::to_string(c));
    }
    data.assign(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c), fill);
  }

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels) +
           static_cast<std::size_t>(c);
  }
  float& at(int y, int x, int c) { return data[index(y, x, c)]; }
  float at(int y, int x, int c) const { return data[index(y, x, c)]; }
  const float* pixel(int y, int x) const { return data.data() + index(y, x, 0); }
  float* pixel(int y, int x) { return data.data() + index(y, x, 0); }

  friend bool operator==(const FeatureMap2D&, const FeatureMap2D&) = default;
};

enum class LayerKind : std::uint8_t { Conv = 0, TransposedConv = 1 };
enum class Activation : std::uint8_t { None = 0, Relu = 1 };

struct ConvLayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  int kernel_h = 1;
  int kernel_w = 1;
  int in_channels = 1;
  int out_channels = 1;
  int stride = 1;
  int pad = 0;
  Activation activation = Activation::None;
  std::vector<float> weights;  // (out, in, kh, kw)
  std::vector<float> bias;     // (out)

  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * static_cast<std::size_t>(in_channels) *
           static_cast<std::size_t>(kernel_h) * static_cast<std::size_t>(kernel_w);
  }

  std::size_t weight_index(int o, int i, int ky, int kx) const {
    return ((static_cast<std::size_t>(o) * static_cast<std::size_t>(in_channels) + static_cast<std::size_t>(i)) *
                static_cast<std::size_t>(kernel_h) +
            static_cast<std::size_t>(ky)) *
               static_cast<std::size_t>(kernel_w) +
           static_cast<std::size_t>(kx);
  }
  float& weight(int o, int i, int ky, int kx) { return weights[weight_index(o, i, ky, kx)]; }
  float weight(int o, int i, int ky, int kx) const { return weights[weight_index(o, i, ky, kx)]; }

  void validate() const {
    if (kernel_h <= 0 || kernel_w <= 0 || in_channels <= 0 || out_channels <= 0) {
      throw Error(ErrorCode::ShapeMismatch, name + ": non-positive layer shape");
    }
    if (stride < 1 || pad < 0) throw Error(ErrorCode::ShapeMismatch, name + ": stride must be >= 1, pad >= 0");
    if (weights.size() != weight_count()) throw Error(ErrorCode::ShapeMismatch, name + ": weight count");
    if (bias.size() != static_cast<std::size_t>(out_channels)) {
      throw Error(ErrorCode::ShapeMismatch, name + ": bias count");
    }
  }

  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

inline ConvLayerSpec make_layer(std::string name, LayerKind kind, int kh, int kw, int cin, int cout, int stride,
                                int pad, Activation act) {
  ConvLayerSpec l{std::move(name), kind, kh, kw, cin, cout, stride, pad, act, {}, {}};
  l.weights.assign(l.weight_count(), 0.0f);
  l.bias.assign(static_cast<std::size_t>(cout), 0.0f);
  return l;
}

inline int conv_output_size(int in, int kernel, int stride, int pad) {
  const int span = in + 2 * pad - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

inline int transposed_output_size(int in, int kernel, int stride, int pad) {
  return (in - 1) * stride + kernel - 2 * pad;
}

inline FeatureMap2D conv2d(const FeatureMap2D& input, const ConvLayerSpec& layer) {
  layer.validate();
  if (input.channels != layer.in_channels) {
    throw Error(ErrorCode::ChannelMismatch, layer.name + ": input has " + std::to_string(input.channels) +
                                                " channels, layer expects " + std::to_string(layer.in_channels));
  }
  const int oh = conv_output_size(input.height, layer.kernel_h, layer.stride, layer.pad);
  const int ow = conv_output_size(input.width, layer.kernel_w, layer.stride, layer.pad);
  if (oh <= 0 || ow <= 0) {
    throw Error(ErrorCode::ShapeMismatch, layer.name + ": non-positive output size for input " +
                                              std::to_string(input.height) + "x" + std::to_string(input.width));
  }
  const int cin = layer.in_channels;
  const int cout = layer.out_channels;
  const int kh = layer.kernel_h;
  const int kw = layer.kernel_w;

  // Repack to [ky][kx][ic][oc] so the innermost update is a contiguous axpy over oc.
  std::vector<float> packed(layer.weight_count());
  for (int o = 0; o < cout; ++o)
    for (int i = 0; i < cin; ++i)
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx)
          packed[((static_cast<std::size_t>(ky) * kw + kx) * cin + i) * cout + o] = layer.weight(o, i, ky, kx);

  FeatureMap2D out(oh, ow, cout);
  constexpr int kTile = 8;
  parallel_for(static_cast<std::size_t>(oh), [&](std::size_t begin, std::size_t end) {
    std::vector<float> acc(static_cast<std::size_t>(kTile) * cout);
    for (int oy = static_cast<int>(begin); oy < static_cast<int>(end); ++oy) {
      for (int ox0 = 0; ox0 < ow; ox0 += kTile) {
        const int tile = std::min(kTile, ow - ox0);
        for (int t = 0; t < tile; ++t) std::copy(layer.bias.begin(), layer.bias.end(), acc.begin() + t * cout);
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * layer.stride - layer.pad + ky;
          if (iy < 0 || iy >= input.height) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const float* wk = packed.data() + (static_cast<std::size_t>(ky) * kw + kx) * cin * cout;
            for (int t = 0; t < tile; ++t) {
              const int ix = (ox0 + t) * layer.stride - layer.pad + kx;
              if (ix < 0 || ix >= input.width) continue;
              const float* px = input.pixel(iy, ix);
              float* a = acc.data() + static_cast<std::size_t>(t) * cout;
              for (int i = 0; i < cin; ++i) {
                const float v = px[i];
                if (v == 0.0f) continue;
                const float* w = wk + static_cast<std::size_t>(i) * cout;
                for (int o = 0; o < cout; ++o) a[o] += v * w[o];
              }
            }
          }
        }
        for (int t = 0; t < tile; ++t) {
          float* dst = out.pixel(oy, ox0 + t);
          const float* a = acc.data() + static_cast<std::size_t>(t) * cout;
          if (layer.activation == Activation::Relu) {
            for (int o = 0; o < cout; ++o) dst[o] = a[o] > 0.0f ? a[o] : 0.0f;
          } else {
            std::copy(a, a + cout, dst);
          }
        }
      }
    }
  });
  return out;
}

/// Fractionally strided convolution, the adjoint of conv2d with the same
/// kernel read as (in -> out) transposed. `pad` crops the full output.
inline FeatureMap2D transposed_conv2d(const FeatureMap2D& input, const ConvLayerSpec& layer) {
  layer.validate();
  if (input.channels != layer.in_channels) {
    throw Error(ErrorCode::ChannelMismatch, layer.name + ": input has " + std::to_string(input.channels) +
                                                " channels, layer expects " + std::to_string(layer.in_channels));
  }
  const int oh = transposed_output_size(input.height, layer.kernel_h, layer.stride, layer.pad);
  const int ow = transposed_output_size(input.width, layer.kernel_w, layer.stride, layer.pad);
  if (oh <= 0 || ow <= 0) throw Error(ErrorCode::ShapeMismatch, layer.name + ": non-positive output size");
  const int cin = layer.in_channels;
  const int cout = layer.out_channels;
  const int kh = layer.kernel_h;
  const int kw = layer.kernel_w;
  const int s = layer.stride;

  std::vector<float> packed(layer.weight_count());
  for (int o = 0; o < cout; ++o)
    for (int i = 0; i < cin; ++i)
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx)
          packed[((static_cast<std::size_t>(ky) * kw + kx) * cin + i) * cout + o] = layer.weight(o, i, ky, kx);

  FeatureMap2D out(oh, ow, cout);
  // Gather form: each output pixel sums the inputs whose stamp covers it.
  parallel_for(static_cast<std::size_t>(oh), [&](std::size_t begin, std::size_t end) {
    for (int oy = static_cast<int>(begin); oy < static_cast<int>(end); ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        float* a = out.pixel(oy, ox);
        std::copy(layer.bias.begin(), layer.bias.end(), a);
        for (int ky = 0; ky < kh; ++ky) {
          const int ty = oy + layer.pad - ky;
          if (ty < 0 || ty % s != 0) continue;
          const int iy = ty / s;
          if (iy >= input.height) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int tx = ox + layer.pad - kx;
            if (tx < 0 || tx % s != 0) continue;
            const int ix = tx / s;
            if (ix >= input.width) continue;
            const float* px = input.pixel(iy, ix);
            const float* wk = packed.data() + (static_cast<std::size_t>(ky) * kw + kx) * cin * cout;
            for (int i = 0; i < cin; ++i) {
              const float v = px[i];
              const float* w = wk + static_cast<std::size_t>(i) * cout;
              for (int o = 0; o < cout; ++o) a[o] += v * w[o];
            }
          }
        }
        if (layer.activation == Activation::Relu) {
          for (int o = 0; o < cout; ++o) a[o] = std::max(a[o], 0.0f);
        }
      }
    }
  });
  return out;
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
inline FeatureMap2D maxpool2d(const FeatureMap2D& input) {
  if (input.height < 2 || input.width < 2) {
    throw Error(ErrorCode::ShapeMismatch, "max pooling needs at least 2x2 input");
  }
  FeatureMap2D out(input.height / 2, input.width / 2, input.channels);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const float* a = input.pixel(2 * y, 2 * x);
      const float* b = input.pixel(2 * y, 2 * x + 1);
      const float* c = input.pixel(2 * y + 1, 2 * x);
      const float* d = input.pixel(2 * y + 1, 2 * x + 1);
      float* o = out.pixel(y, x);
      for (int ch = 0; ch < input.channels; ++ch) o[ch] = std::max(std::max(a[ch], b[ch]), std::max(c[ch], d[ch]));
    }
  }
  return out;
}

inline FeatureMap2D crop(const FeatureMap2D& input, int offset, int height, int width) {
  if (offset < 0 || offset + height > input.height || offset + width > input.width || height <= 0 || width <= 0) {
    throw Error(ErrorCode::OutOfBounds, "crop window " + std::to_string(height) + "x" + std::to_string(width) +
                                            " at offset " + std::to_string(offset) + " exceeds " +
                                            std::to_string(input.height) + "x" + std::to_string(input.width));
  }
  FeatureMap2D out(height, width, input.channels);
  for (int y = 0; y < height; ++y) {
    const float* src = input.pixel(offset + y, offset);
    std::copy(src, src + static_cast<std::size_t>(width) * input.channels, out.pixel(y, 0));
  }
  return out;
}

/// Adds `skip`, cropped at `offset` to the size of `coarse`, onto `coarse`.
inline FeatureMap2D fuse_skip(const FeatureMap2D& coarse, const FeatureMap2D& skip, int offset) {
  if (coarse.channels != skip.channels) {
    throw Error(ErrorCode::ChannelMismatch, "fuse_skip: channel counts differ");
  }
  const FeatureMap2D cropped = crop(skip, offset, coarse.height, coarse.width);
  FeatureMap2D out = coarse;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += cropped.data[i];
  return out;
}

inline void softmax_inplace(FeatureMap2D& map) {
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      float* p = map.pixel(y, x);
      const float m = *std::max_element(p, p + map.channels);
      double sum = 0.0;
      for (int c = 0; c < map.channels; ++c) {
        p[c] = std::exp(p[c] - m);
        sum += p[c];
      }
      for (int c = 0; c < map.channels; ++c) p[c] = static_cast<float>(p[c] / sum);
    }
  }
}

// ---------------------------------------------------------------------------
// Architecture

/// Channel widths of the five VGG16 conv blocks and the fc6/fc7 layers. The
/// canonical network is {64, 128, 256, 512, 512} / 4096; narrower variants
/// keep the same geometry.
struct FcnWidths {
  std::array<int, 5> blocks{64, 128, 256, 512, 512};
  int fc = 4096;

  static FcnWidths vgg16() { return {}; }
  friend bool operator==(const FcnWidths&, const FcnWidths&) = default;
};

inline constexpr int kConvPerBlock[5] = {2, 2, 3, 3, 3};
inline constexpr int kInputChannels = 3;
inline constexpr int kPool4Offset = 5;
inline constexpr int kPool3Offset = 9;
inline constexpr int kFinalOffset = 31;
inline constexpr int kFirstPad = 100;
inline constexpr int kMinInputSize = 26;

/// Expected layers in file order, with weights left empty.
inline std::vector<ConvLayerSpec> architecture(const FcnWidths& w) {
  std::vector<ConvLayerSpec> layers;
  int cin = kInputChannels;
  for (int b = 0; b < 5; ++b) {
    for (int c = 0; c < kConvPerBlock[b]; ++c) {
      const std::string name = "conv" + std::to_string(b + 1) + "_" + std::to_string(c + 1);
      const int pad = (b == 0 && c == 0) ? kFirstPad : 1;
      layers.push_back({name, LayerKind::Conv, 3, 3, cin, w.blocks[b], 1, pad, Activation::Relu, {}, {}});
      cin = w.blocks[b];
    }
  }
  layers.push_back({"fc6", LayerKind::Conv, 7, 7, w.blocks[4], w.fc, 1, 0, Activation::Relu, {}, {}});
  layers.push_back({"fc7", LayerKind::Conv, 1, 1, w.fc, w.fc, 1, 0, Activation::Relu, {}, {}});
  layers.push_back({"score_fr", LayerKind::Conv, 1, 1, w.fc, kNumClasses, 1, 0, Activation::None, {}, {}});
  layers.push_back({"score_pool4", LayerKind::Conv, 1, 1, w.blocks[3], kNumClasses, 1, 0, Activation::None, {}, {}});
  layers.push_back({"score_pool3", LayerKind::Conv, 1, 1, w.blocks[2], kNumClasses, 1, 0, Activation::None, {}, {}});
  layers.push_back(
      {"upscore2", LayerKind::TransposedConv, 4, 4, kNumClasses, kNumClasses, 2, 0, Activation::None, {}, {}});
  layers.push_back(
      {"upscore_pool4", LayerKind::TransposedConv, 4, 4, kNumClasses, kNumClasses, 2, 0, Activation::None, {}, {}});
  layers.push_back(
      {"upscore8", LayerKind::TransposedConv, 16, 16, kNumClasses, kNumClasses, 8, 0, Activation::None, {}, {}});
  return layers;
}

enum LayerId : std::size_t {
  kConvLayers = 13,
  kFc6 = 13,
  kFc7,
  kScoreFr,
  kScorePool4,
  kScorePool3,
  kUpscore2,
  kUpscorePool4,
  kUpscore8,
  kLayerCount,
};

class FcnWeights {
 public:
  FcnWeights() = default;

  /// Validates the layer list against the FCN-8s table; block widths are
  /// taken from the file itself and then checked for consistency.
  explicit FcnWeights(std::vector<ConvLayerSpec> layers) : layers_(std::move(layers)) { validate(); }

  const std::vector<ConvLayerSpec>& layers() const { return layers_; }
  const ConvLayerSpec& layer(std::size_t id) const { return layers_.at(id); }
  const FcnWidths& widths() const { return widths_; }

  const ConvLayerSpec& layer(std::string_view name) const {
    for (const auto& l : layers_)
      if (l.name == name) return l;
    throw Error(ErrorCode::InvalidArgument, "no layer named " + std::string(name));
  }

  friend bool operator==(const FcnWeights&, const FcnWeights&) = default;

 private:
  void validate() {
    if (layers_.size() != kLayerCount) {
      throw Error(ErrorCode::ShapeMismatch,
                  "expected " + std::to_string(kLayerCount) + " layers, got " + std::to_string(layers_.size()));
    }
    std::size_t first_in_block = 0;
    for (int b = 0; b < 5; ++b) {
      widths_.blocks[static_cast<std::size_t>(b)] = layers_[first_in_block].out_channels;
      first_in_block += static_cast<std::size_t>(kConvPerBlock[b]);
    }
    widths_.fc = layers_[kFc6].out_channels;
    const auto expected = architecture(widths_);
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const auto& e = expected[i];
      const auto& l = layers_[i];
      if (l.name != e.name) throw Error(ErrorCode::ShapeMismatch, e.name + " (found " + l.name + ")");
      if (l.kind != e.kind || l.kernel_h != e.kernel_h || l.kernel_w != e.kernel_w ||
          l.in_channels != e.in_channels || l.out_channels != e.out_channels || l.stride != e.stride ||
          l.pad != e.pad || l.activation != e.activation) {
        throw Error(ErrorCode::ShapeMismatch, e.name);
      }
      try {
        l.validate();
      } catch (const Error&) {
        throw Error(ErrorCode::ShapeMismatch, e.name);
      }
    }
  }

  std::vector<ConvLayerSpec> layers_;
  FcnWidths widths_{};
};

/// Bilinear upsampling kernel of size k on the channel diagonal.
inline void fill_bilinear(ConvLayerSpec& layer) {
  const int k = layer.kernel_h;
  const double factor = (k + 1) / 2;
  const double center = (k % 2 == 1) ? factor - 1.0 : factor - 0.5;
  std::fill(layer.weights.begin(), layer.weights.end(), 0.0f);
  for (int c = 0; c < std::min(layer.in_channels, layer.out_channels); ++c) {
    for (int y = 0; y < k; ++y) {
      for (int x = 0; x < layer.kernel_w; ++x) {
        const double v = (1.0 - std::abs(y - center) / factor) * (1.0 - std::abs(x - center) / factor);
        layer.weight(c, c, y, x) = static_cast<float>(v);
      }
    }
  }
}

inline FcnWeights zero_weights(const FcnWidths& widths) {
  auto layers = architecture(widths);
  for (auto& l : layers) {
    l.weights.assign(l.weight_count(), 0.0f);
    l.bias.assign(static_cast<std::size_t>(l.out_channels), 0.0f);
  }
  return FcnWeights(std::move(layers));
}

/// He-normal convolutions and bilinear upsampling, seeded.
inline FcnWeights random_weights(const FcnWidths& widths, std::uint64_t seed) {
  auto layers = architecture(widths);
  for (std::size_t li = 0; li < layers.size(); ++li) {
    auto& l = layers[li];
    l.weights.assign(l.weight_count(), 0.0f);
    l.bias.assign(static_cast<std::size_t>(l.out_channels), 0.0f);
    if (l.kind == LayerKind::TransposedConv) {
      fill_bilinear(l);
      continue;
    }
    Rng rng = make_rng(seed, li);
    const double sd = std::sqrt(2.0 / (static_cast<double>(l.in_channels) * l.kernel_h * l.kernel_w));
    for (auto& w : l.weights) w = static_cast<float>(sd * standard_normal(rng));
    for (auto& b : l.bias) b = static_cast<float>(0.01 * standard_normal(rng));
  }
  return FcnWeights(std::move(layers));
}

// ---------------------------------------------------------------------------
// Weight file: "FCNW", u32 version = 1, u32 layer count, then per layer
// u32 name length, name bytes, u32 kh, kw, cin, cout, stride, pad, u8 kind,
// u8 activation, float32 weights (out, in, kh, kw), float32 biases.

inline std::vector<char> encode_weights(const FcnWeights& weights) {
  ByteWriter w;
  w.put_bytes("FCNW");
  w.put<std::uint32_t>(1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(weights.layers().size()));
  for (const auto& l : weights.layers()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(l.name.size()));
    w.put_bytes(l.name);
    for (int v : {l.kernel_h, l.kernel_w, l.in_channels, l.out_channels, l.stride, l.pad}) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(v));
    }
    w.put(static_cast<std::uint8_t>(l.kind));
    w.put(static_cast<std::uint8_t>(l.activation));
    w.put_span<float>(l.weights);
    w.put_span<float>(l.bias);
  }
  return std::move(w.bytes());
}

inline FcnWeights decode_weights(std::span<const char> bytes, const std::string& context = "weights") {
  ByteReader r(bytes, context);
  if (r.get_string(4) != "FCNW") throw Error(ErrorCode::BadMagic, context + ": expected FCNW");
  if (r.get<std::uint32_t>() != 1) throw Error(ErrorCode::BadHeader, context + ": unsupported version");
  const auto count = r.get<std::uint32_t>();
  if (count > 1024) throw Error(ErrorCode::BadHeader, context + ": implausible layer count");
  std::vector<ConvLayerSpec> layers;
  layers.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    ConvLayerSpec l;
    const auto name_len = r.get<std::uint32_t>();
    if (name_len > r.remaining()) throw Error(ErrorCode::Truncated, context + ": layer name");
    l.name = r.get_string(name_len);
    std::uint32_t shape[6];
    for (auto& v : shape) v = r.get<std::uint32_t>();
    for (auto v : shape) {
      if (v > (1u << 20)) throw Error(ErrorCode::ShapeMismatch, l.name);
    }
    l.kernel_h = static_cast<int>(shape[0]);
    l.kernel_w = static_cast<int>(shape[1]);
    l.in_channels = static_cast<int>(shape[2]);
    l.out_channels = static_cast<int>(shape[3]);
    l.stride = static_cast<int>(shape[4]);
    l.pad = static_cast<int>(shape[5]);
    const auto kind = r.get<std::uint8_t>();
    const auto act = r.get<std::uint8_t>();
    if (kind > 1 || act > 1) throw Error(ErrorCode::BadHeader, context + ": bad kind/activation for " + l.name);
    l.kind = static_cast<LayerKind>(kind);
    l.activation = static_cast<Activation>(act);
    const std::size_t n = l.weight_count();
    if (n * sizeof(float) > r.remaining()) throw Error(ErrorCode::Truncated, context + ": weights of " + l.name);
    l.weights.resize(n);
    r.get_span<float>(l.weights);
    l.bias.resize(static_cast<std::size_t>(l.out_channels));
    r.get_span<float>(l.bias);
    layers.push_back(std::move(l));
  }
  return FcnWeights(std::move(layers));
}

inline void save_weights(const FcnWeights& weights, const std::filesystem::path& path) {
  atomic_write_file(path, encode_weights(weights));
}

inline FcnWeights load_weights(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_weights(bytes, path.string());
}

// ---------------------------------------------------------------------------
// Forward pass

/// Raw (pre-softmax) class scores for one slice; output matches input size.
inline FeatureMap2D fcn8s_logits(const FeatureMap2D& slice, const FcnWeights& w) {
  if (slice.channels != kInputChannels) {
    throw Error(ErrorCode::ChannelMismatch, "FCN input must have 3 channels (FLAIR, T1c, T2)");
  }
  if (slice.height < kMinInputSize || slice.width < kMinInputSize) {
    throw Error(ErrorCode::ShapeMismatch, "FCN input must be at least " + std::to_string(kMinInputSize) + " pixels");
  }
  FeatureMap2D x = slice;
  FeatureMap2D pool3;
  FeatureMap2D pool4;
  std::size_t li = 0;
  for (int b = 0; b < 5; ++b) {
    for (int c = 0; c < kConvPerBlock[b]; ++c) x = conv2d(x, w.layer(li++));
    x = maxpool2d(x);
    if (b == 2) pool3 = x;
    if (b == 3) pool4 = x;
  }
  x = conv2d(x, w.layer(kFc6));
  x = conv2d(x, w.layer(kFc7));
  x = conv2d(x, w.layer(kScoreFr));
  x = transposed_conv2d(x, w.layer(kUpscore2));
  x = fuse_skip(x, conv2d(pool4, w.layer(kScorePool4)), kPool4Offset);
  x = transposed_conv2d(x, w.layer(kUpscorePool4));
  x = fuse_skip(x, conv2d(pool3, w.layer(kScorePool3)), kPool3Offset);
  x = transposed_conv2d(x, w.layer(kUpscore8));
  return crop(x, kFinalOffset, slice.height, slice.width);
}

/// Per-pixel class probabilities (softmax of the FCN-8s scores).
inline FeatureMap2D fcn8s_forward_slice(const FeatureMap2D& slice, const FcnWeights& w) {
  FeatureMap2D out = fcn8s_logits(slice, w);
  softmax_inplace(out);
  return out;
}

/// One axial plane as a (ny, nx, 3) map in FLAIR, T1c, T2 channel order.
inline FeatureMap2D axial_slice(const MultimodalVolume& mv, int z) {
  const Dims& d = mv.dims();
  FeatureMap2D s(d.ny, d.nx, 3);
  for (int y = 0; y < d.ny; ++y)
    for (int x = 0; x < d.nx; ++x)
      for (int m = 0; m < 3; ++m) s.at(y, x, m) = mv.channel(m).at(x, y, z);
  return s;
}

inline void store_slice(ScoreMap& scores, int z, const FeatureMap2D& probs) {
  const Dims& d = scores.dims();
  for (int y = 0; y < d.ny; ++y) {
    for (int x = 0; x < d.nx; ++x) {
      auto dst = scores.voxel(linear_index(d, x, y, z));
      const float* src = probs.pixel(y, x);
      std::copy(src, src + kNumClasses, dst.begin());
    }
  }
}

/// Runs the 2D network on every axial slice independently and stacks the
/// results along z. `order` only changes the processing sequence.
inline ScoreMap score_volume(const MultimodalVolume& mv, const FcnWeights& w, std::span<const int> order = {}) {
  ScoreMap scores(mv.dims());
  std::vector<int> sequence(static_cast<std::size_t>(mv.dims().nz));
  std::iota(sequence.begin(), sequence.end(), 0);
  if (!order.empty()) {
    if (order.size() != sequence.size()) throw Error(ErrorCode::InvalidArgument, "slice order length");
    sequence.assign(order.begin(), order.end());
    auto sorted = sequence;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i] != static_cast<int>(i)) throw Error(ErrorCode::InvalidArgument, "slice order is not a permutation");
    }
  }
  for (int z : sequence) {
    if (z < 0 || z >= mv.dims().nz) throw Error(ErrorCode::OutOfBounds, "slice index");
    store_slice(scores, z, fcn8s_forward_slice(axial_slice(mv, z), w));
  }
  return scores;
}

}  // namespace tumorseg::fcn
