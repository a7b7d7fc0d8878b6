#include "abstractnet/zeroconv.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace abstractnet {
namespace {

constexpr double kLeak = 0.5;

void require_feature_map(const Tensor& x, std::size_t channels, const char* what) {
  if (x.rank() != 3) throw ShapeError(std::string(what) + ": expected a rank-3 feature map, got " + shape_string(x.shape()));
  if (x.channels() != channels) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(channels) +
                     " channels, got " + shape_string(x.shape()));
  }
}

struct ConvGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

// Gradients of <upstream, conv3x3_forward(x, weight, bias)>.
ConvGrads conv3x3_backward(const Tensor& x, const Tensor& weight, const Tensor& upstream,
                           bool want_param_grads) {
  const std::size_t cout = weight.extent(0);
  const std::size_t cin = weight.extent(1);
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  ConvGrads g{Tensor(x.shape()), Tensor(), Tensor()};
  if (want_param_grads) {
    g.weight = Tensor(weight.shape());
    g.bias = Tensor({cout});
  }
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        const double up = upstream.at(o, y, xx);
        if (want_param_grads) g.bias[o] += up;
        for (std::size_t i = 0; i < cin; ++i) {
          for (int ky = 0; ky < 3; ++ky) {
            const long sy = static_cast<long>(y) + ky - 1;
            if (sy < 0 || sy >= static_cast<long>(h)) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const long sx = static_cast<long>(xx) + kx - 1;
              if (sx < 0 || sx >= static_cast<long>(w)) continue;
              const std::size_t widx = ((o * cin + i) * 3 + ky) * 3 + kx;
              g.input.at(i, sy, sx) += weight[widx] * up;
              if (want_param_grads) g.weight[widx] += x.at(i, sy, sx) * up;
            }
          }
        }
      }
    }
  }
  return g;
}

struct BlockCache {
  Tensor pre;     // conv1 output
  Tensor hidden;  // activation(pre)
  Tensor out;
};

BlockCache block_forward_cached(const NetBlock& block, const Tensor& x) {
  require_feature_map(x, block.channels(), "block_forward");
  BlockCache cache;
  cache.pre = conv3x3_forward(x, block.conv1_weight.value, block.conv1_bias.value);
  cache.hidden = cache.pre;
  for (double& v : cache.hidden.values()) v = activate(block.activation, v);
  cache.out = conv3x3_forward(cache.hidden, block.conv2_weight.value, block.conv2_bias.value);
  return cache;
}

struct BlockGrads {
  Tensor input;
  Tensor conv1_weight, conv1_bias, conv2_weight, conv2_bias;
};

BlockGrads block_backward(const NetBlock& block, const Tensor& x, const BlockCache& cache,
                          const Tensor& upstream, bool want_param_grads) {
  ConvGrads g2 = conv3x3_backward(cache.hidden, block.conv2_weight.value, upstream, want_param_grads);
  Tensor d_pre = std::move(g2.input);
  for (std::size_t i = 0; i < d_pre.size(); ++i) {
    d_pre[i] *= activate_derivative(block.activation, cache.pre[i]);
  }
  ConvGrads g1 = conv3x3_backward(x, block.conv1_weight.value, d_pre, want_param_grads);
  return {std::move(g1.input), std::move(g1.weight), std::move(g1.bias), std::move(g2.weight),
          std::move(g2.bias)};
}

struct PointwiseGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

PointwiseGrads zero_conv_backward(const ZeroConv& z, const Tensor& x, const Tensor& upstream) {
  const std::size_t cout = z.out_channels();
  const std::size_t cin = z.in_channels();
  const std::size_t plane = x.height() * x.width();
  PointwiseGrads g{Tensor(x.shape()), Tensor(z.weight.value.shape()), Tensor(z.bias.value.shape())};
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t p = 0; p < plane; ++p) {
      const double up = upstream[o * plane + p];
      g.bias[o] += up;
      for (std::size_t i = 0; i < cin; ++i) {
        g.weight[o * cin + i] += x[i * plane + p] * up;
        g.input[i * plane + p] += z.weight.value[o * cin + i] * up;
      }
    }
  }
  return g;
}

void fnv_mix(std::uint64_t& h, const Tensor& t) {
  for (double v : t.values()) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
}

}  // namespace

double activate(Activation act, double a) {
  switch (act) {
    case Activation::kSilu: return a / (1.0 + std::exp(-a));
    case Activation::kLeakySilu: return a * (kLeak + (1.0 - kLeak) / (1.0 + std::exp(-a)));
    case Activation::kTanh: return std::tanh(a);
    case Activation::kIdentity: return a;
  }
  return a;
}

double activate_derivative(Activation act, double a) {
  switch (act) {
    case Activation::kSilu: {
      const double s = 1.0 / (1.0 + std::exp(-a));
      return s * (1.0 + a * (1.0 - s));
    }
    case Activation::kLeakySilu: {
      const double s = 1.0 / (1.0 + std::exp(-a));
      return kLeak + (1.0 - kLeak) * s * (1.0 + a * (1.0 - s));
    }
    case Activation::kTanh: {
      const double t = std::tanh(a);
      return 1.0 - t * t;
    }
    case Activation::kIdentity: return 1.0;
  }
  return 1.0;
}

const char* activation_name(Activation act) {
  switch (act) {
    case Activation::kSilu: return "silu";
    case Activation::kLeakySilu: return "leaky_silu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "identity";
}

Activation parse_activation(const std::string& name) {
  if (name == "silu") return Activation::kSilu;
  if (name == "leaky_silu") return Activation::kLeakySilu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation: " + name);
}

NetBlock NetBlock::zeros(std::size_t channels, Activation act) {
  NetBlock b;
  b.activation = act;
  b.conv1_weight = Param(Tensor({channels, channels, 3, 3}));
  b.conv1_bias = Param(Tensor({channels}));
  b.conv2_weight = Param(Tensor({channels, channels, 3, 3}));
  b.conv2_bias = Param(Tensor({channels}));
  return b;
}

NetBlock NetBlock::random(std::size_t channels, Rng& rng, double weight_gain, double bias_std,
                          Activation act) {
  NetBlock b;
  b.activation = act;
  const double wstd = weight_gain / std::sqrt(9.0 * static_cast<double>(channels));
  b.conv1_weight = Param(random_normal({channels, channels, 3, 3}, rng, wstd));
  b.conv1_bias = Param(random_normal({channels}, rng, bias_std));
  b.conv2_weight = Param(random_normal({channels, channels, 3, 3}, rng, wstd));
  b.conv2_bias = Param(random_normal({channels}, rng, bias_std));
  return b;
}

void NetBlock::set_locked(bool locked) {
  for (Param* p : params()) p->locked = locked;
}

std::vector<Param*> NetBlock::params() {
  return {&conv1_weight, &conv1_bias, &conv2_weight, &conv2_bias};
}

std::vector<const Param*> NetBlock::params() const {
  return {&conv1_weight, &conv1_bias, &conv2_weight, &conv2_bias};
}

ZeroConv::ZeroConv(std::size_t in_channels, std::size_t out_channels)
    : weight(Tensor({out_channels, in_channels, 1, 1})), bias(Tensor({out_channels})) {}

std::vector<Param*> ControlNetBlock::trainable_params() {
  std::vector<Param*> out;
  for (Param* p : all_params()) {
    if (!p->locked) out.push_back(p);
  }
  return out;
}

std::vector<Param*> ControlNetBlock::all_params() {
  std::vector<Param*> out = locked.params();
  for (Param* p : copy.params()) out.push_back(p);
  for (Param* p : {&z1.weight, &z1.bias, &z2.weight, &z2.bias}) out.push_back(p);
  return out;
}

std::vector<const Param*> ControlNetBlock::all_params() const {
  std::vector<const Param*> out = locked.params();
  for (const Param* p : copy.params()) out.push_back(p);
  for (const Param* p : {&z1.weight, &z1.bias, &z2.weight, &z2.bias}) out.push_back(p);
  return out;
}

std::vector<std::string> ControlNetBlock::param_names() {
  return {"locked.conv1.weight", "locked.conv1.bias", "locked.conv2.weight", "locked.conv2.bias",
          "copy.conv1.weight",   "copy.conv1.bias",   "copy.conv2.weight",   "copy.conv2.bias",
          "z1.weight",           "z1.bias",           "z2.weight",           "z2.bias"};
}

ControlNetBlock init_controlnet(const NetBlock& locked, std::size_t cond_channels) {
  ControlNetBlock cb;
  cb.locked = locked;
  cb.locked.set_locked(true);
  cb.copy = locked;
  cb.copy.set_locked(false);
  for (Param* p : cb.locked.params()) p->zero_grad();
  for (Param* p : cb.copy.params()) p->zero_grad();
  const std::size_t c = locked.channels();
  cb.z1 = ZeroConv(cond_channels, c);
  cb.z2 = ZeroConv(c, c);
  return cb;
}

Tensor conv3x3_forward(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 4 || weight.extent(2) != 3 || weight.extent(3) != 3) {
    throw ShapeError("conv3x3: weight must be (C_out, C_in, 3, 3), got " + shape_string(weight.shape()));
  }
  const std::size_t cout = weight.extent(0);
  const std::size_t cin = weight.extent(1);
  require_feature_map(x, cin, "conv3x3");
  if (bias.shape() != Shape{cout}) throw ShapeError("conv3x3: bias shape " + shape_string(bias.shape()));
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  Tensor out({cout, h, w});
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        double acc = bias[o];
        for (std::size_t i = 0; i < cin; ++i) {
          for (int ky = 0; ky < 3; ++ky) {
            const long sy = static_cast<long>(y) + ky - 1;
            if (sy < 0 || sy >= static_cast<long>(h)) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const long sx = static_cast<long>(xx) + kx - 1;
              if (sx < 0 || sx >= static_cast<long>(w)) continue;
              acc += weight[((o * cin + i) * 3 + ky) * 3 + kx] * x.at(i, sy, sx);
            }
          }
        }
        out.at(o, y, xx) = acc;
      }
    }
  }
  return out;
}

Tensor block_forward(const NetBlock& block, const Tensor& x) {
  return block_forward_cached(block, x).out;
}

Tensor zero_conv_forward(const ZeroConv& z, const Tensor& x) {
  const std::size_t cout = z.out_channels();
  const std::size_t cin = z.in_channels();
  require_feature_map(x, cin, "zero_conv_forward");
  const std::size_t plane = x.height() * x.width();
  Tensor out({cout, x.height(), x.width()});
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t p = 0; p < plane; ++p) {
      double acc = z.bias.value[o];
      for (std::size_t i = 0; i < cin; ++i) acc += z.weight.value[o * cin + i] * x[i * plane + p];
      out[o * plane + p] = acc;
    }
  }
  return out;
}

namespace {

void require_condition(const ControlNetBlock& cb, const Tensor& x, const Tensor& c) {
  require_feature_map(x, cb.locked.channels(), "controlnet_forward (x)");
  require_feature_map(c, cb.z1.in_channels(), "controlnet_forward (c)");
  if (c.height() != x.height() || c.width() != x.width()) {
    throw ShapeError("controlnet_forward: condition spatial dims " + shape_string(c.shape()) +
                     " differ from input " + shape_string(x.shape()));
  }
}

}  // namespace

Tensor controlnet_forward(const ControlNetBlock& cb, const Tensor& x, const Tensor& c) {
  require_condition(cb, x, c);
  Tensor y = block_forward(cb.locked, x);
  const Tensor branch = block_forward(cb.copy, x + zero_conv_forward(cb.z1, c));
  y += zero_conv_forward(cb.z2, branch);
  return y;
}

ControlNetGradients& ControlNetGradients::operator+=(const ControlNetGradients& o) {
  copy_conv1_weight += o.copy_conv1_weight;
  copy_conv1_bias += o.copy_conv1_bias;
  copy_conv2_weight += o.copy_conv2_weight;
  copy_conv2_bias += o.copy_conv2_bias;
  z1_weight += o.z1_weight;
  z1_bias += o.z1_bias;
  z2_weight += o.z2_weight;
  z2_bias += o.z2_bias;
  x += o.x;
  c += o.c;
  return *this;
}

ControlNetGradients compute_gradients(const ControlNetBlock& cb, const Tensor& x, const Tensor& c,
                                      const Tensor& upstream) {
  require_condition(cb, x, c);
  const BlockCache locked_cache = block_forward_cached(cb.locked, x);
  require_same_shape(locked_cache.out, upstream, "backward (upstream)");
  const Tensor u = x + zero_conv_forward(cb.z1, c);
  const BlockCache copy_cache = block_forward_cached(cb.copy, u);

  ControlNetGradients g;
  PointwiseGrads gz2 = zero_conv_backward(cb.z2, copy_cache.out, upstream);
  BlockGrads gcopy = block_backward(cb.copy, u, copy_cache, gz2.input, true);
  PointwiseGrads gz1 = zero_conv_backward(cb.z1, c, gcopy.input);
  BlockGrads glocked = block_backward(cb.locked, x, locked_cache, upstream, false);

  g.z2_weight = std::move(gz2.weight);
  g.z2_bias = std::move(gz2.bias);
  g.copy_conv1_weight = std::move(gcopy.conv1_weight);
  g.copy_conv1_bias = std::move(gcopy.conv1_bias);
  g.copy_conv2_weight = std::move(gcopy.conv2_weight);
  g.copy_conv2_bias = std::move(gcopy.conv2_bias);
  g.z1_weight = std::move(gz1.weight);
  g.z1_bias = std::move(gz1.bias);
  g.x = std::move(glocked.input);
  g.x += gcopy.input;
  g.c = std::move(gz1.input);
  return g;
}

void store_gradients(ControlNetBlock& cb, const ControlNetGradients& g) {
  cb.copy.conv1_weight.grad = g.copy_conv1_weight;
  cb.copy.conv1_bias.grad = g.copy_conv1_bias;
  cb.copy.conv2_weight.grad = g.copy_conv2_weight;
  cb.copy.conv2_bias.grad = g.copy_conv2_bias;
  cb.z1.weight.grad = g.z1_weight;
  cb.z1.bias.grad = g.z1_bias;
  cb.z2.weight.grad = g.z2_weight;
  cb.z2.bias.grad = g.z2_bias;
}

ControlNetGradients backward(ControlNetBlock& cb, const Tensor& x, const Tensor& c,
                             const Tensor& upstream) {
  ControlNetGradients g = compute_gradients(cb, x, c, upstream);
  store_gradients(cb, g);
  return g;
}

void sgd_step(ControlNetBlock& cb, double learning_rate) {
  for (Param* p : cb.trainable_params()) {
    auto& v = p->value.values();
    const auto& g = p->grad.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= learning_rate * g[i];
  }
}

Tensor raster_to_condition(const Raster& control, std::size_t channels, std::size_t height,
                           std::size_t width) {
  const Raster small = resize_nearest(control, static_cast<int>(width), static_cast<int>(height));
  Tensor c({channels, height, width});
  for (std::size_t k = 0; k < channels; ++k) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        c.at(k, y, x) = small.pixel(static_cast<int>(x), static_cast<int>(y))[k % 3] / 255.0;
      }
    }
  }
  return c;
}

Tensor infer(const ControlNetBlock& cb, const Raster& control, const Tensor& x) {
  require_feature_map(x, cb.locked.channels(), "infer");
  const Tensor c = raster_to_condition(control, cb.z1.in_channels(), x.height(), x.width());
  return controlnet_forward(cb, x, c);
}

std::uint64_t locked_fingerprint(const ControlNetBlock& cb) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Param* p : cb.locked.params()) fnv_mix(h, p->value);
  return h;
}

}  // namespace abstractnet
