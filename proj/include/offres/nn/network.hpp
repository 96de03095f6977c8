#pragma once

#include "conv3d.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace offres::nn {

struct NetConfig
{
  int n_res_blocks = 3;
  int channels = 32;
  int kernel = 5;
  bool global_skip = true;
  double learning_rate = 1e-4;
  double lr_decay = 1.0; // learning rate multiplier applied after each epoch
  int patch = 32;
  int patch_stride = 16;
  int batch = 1;
  std::uint64_t seed = 0;
  double output_init_scale = 0.01; // multiplies the He std of conv_out

  void validate() const
  {
    require(n_res_blocks >= 0, "n_res_blocks must be >= 0");
    require(channels >= 1, "channels must be >= 1");
    require(kernel >= 1 && kernel % 2 == 1, "kernel must be odd");
    require(patch >= kernel, "patch must be >= kernel");
    require(patch_stride >= 1 && patch_stride <= patch, "patch_stride must lie in [1, patch]");
    require(batch >= 1, "batch must be >= 1");
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive");
    require(lr_decay > 0.0 && lr_decay <= 1.0, "lr_decay must lie in (0, 1]");
    require(output_init_scale >= 0.0 && std::isfinite(output_init_scale), "output_init_scale must be >= 0");
  }

  int conv_count() const { return 2 * n_res_blocks + 2; }
  /// Voxels on each side that influence one output voxel.
  int receptive_radius() const { return conv_count() * (kernel / 2); }
};

/// Learnable tensors in graph order: conv_in, (conv_a, conv_b) per block, conv_out.
template <typename S>
struct Layers
{
  std::vector<Conv3d<S>> conv;

  Conv3d<S> &in() { return conv.front(); }
  Conv3d<S> const &in() const { return conv.front(); }
  Conv3d<S> &out() { return conv.back(); }
  Conv3d<S> const &out() const { return conv.back(); }
  Conv3d<S> const &block_a(int b) const { return conv[1 + 2 * b]; }
  Conv3d<S> const &block_b(int b) const { return conv[2 + 2 * b]; }
  int blocks() const { return static_cast<int>(conv.size() - 2) / 2; }

  static Layers zeros_like(NetConfig const &cfg)
  {
    Layers l;
    l.conv.emplace_back(2, cfg.channels, cfg.kernel);
    for (int b = 0; b < cfg.n_res_blocks; ++b) {
      l.conv.emplace_back(cfg.channels, cfg.channels, cfg.kernel);
      l.conv.emplace_back(cfg.channels, cfg.channels, cfg.kernel);
    }
    l.conv.emplace_back(cfg.channels, 2, cfg.kernel);
    return l;
  }

  std::vector<std::string> names() const
  {
    std::vector<std::string> n{"conv_in"};
    for (int b = 0; b < blocks(); ++b) {
      n.push_back("block" + std::to_string(b) + ".conv_a");
      n.push_back("block" + std::to_string(b) + ".conv_b");
    }
    n.push_back("conv_out");
    return n;
  }
};

template <typename S>
struct AdamState
{
  Layers<S> m, v;
  std::int64_t step = 0;
};

template <typename S>
struct NetParams
{
  NetConfig cfg;
  Layers<S> layers;
  AdamState<S> adam;
};

template <typename S>
using Grads = Layers<S>;

/// He-normal weights (std sqrt(2 / fan_in)), zero biases, zeroed optimizer state.
/// The output convolution is drawn with its std scaled by output_init_scale, so an
/// untrained net with the global skip starts close to the identity.
template <typename S = float>
NetParams<S> net_init(NetConfig const &cfg)
{
  cfg.validate();
  NetParams<S> p{cfg, Layers<S>::zeros_like(cfg), {Layers<S>::zeros_like(cfg), Layers<S>::zeros_like(cfg), 0}};
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> nd;
  for (std::size_t l = 0; l < p.layers.conv.size(); ++l) {
    auto &c = p.layers.conv[l];
    double const gain = l + 1 == p.layers.conv.size() ? cfg.output_init_scale : 1.0;
    double const sd = gain * std::sqrt(2.0 / c.fan_in());
    for (Eigen::Index i = 0; i < c.weight.size(); ++i) { c.weight.data()[i] = static_cast<S>(sd * nd(rng)); }
  }
  return p;
}

template <typename S>
Tensor<S> to_channels(ComplexVolume const &x)
{
  Tensor<S> t(2, x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    t.v[i] = static_cast<S>(x[i].real());
    t.v[i + x.size()] = static_cast<S>(x[i].imag());
  }
  return t;
}

template <typename S>
ComplexVolume from_channels(Tensor<S> const &t, std::array<double, 3> spacing = {1.0, 1.0, 1.0})
{
  require(t.channels == 2, "complex output needs exactly two channels");
  ComplexVolume x(t.shape, Cx{}, spacing);
  for (std::size_t i = 0; i < x.size(); ++i) { x[i] = Cx(t.v[i], t.v[i + x.size()]); }
  return x;
}

/// Intermediate activations kept for backpropagation.
template <typename S>
struct ForwardCache
{
  Tensor<S> x;              // input channels
  Tensor<S> h0;             // ReLU(conv_in(x))
  std::vector<Tensor<S>> a; // ReLU(conv_a(h)) per block
  std::vector<Tensor<S>> h; // block outputs
  Tensor<S> y;
};

template <typename S>
ForwardCache<S> forward_cached(NetParams<S> const &p, Tensor<S> x)
{
  int const k = p.cfg.kernel;
  require(x.channels == 2, "network input needs two channels");
  require(x.shape.x >= k && x.shape.y >= k && x.shape.z >= k, "network input is smaller than the kernel");
  ForwardCache<S> c;
  c.x = std::move(x);
  auto const &L = p.layers;
  conv_forward(L.in(), c.x, c.h0);
  relu_inplace(c.h0);
  Tensor<S> const *h = &c.h0;
  c.a.resize(L.blocks());
  c.h.resize(L.blocks());
  for (int b = 0; b < L.blocks(); ++b) {
    conv_forward(L.block_a(b), *h, c.a[b]);
    relu_inplace(c.a[b]);
    conv_forward(L.block_b(b), c.a[b], c.h[b]);
    for (std::size_t i = 0; i < c.h[b].v.size(); ++i) { c.h[b].v[i] += h->v[i]; }
    h = &c.h[b];
  }
  conv_forward(L.out(), *h, c.y);
  if (p.cfg.global_skip) {
    for (std::size_t i = 0; i < c.y.v.size(); ++i) { c.y.v[i] += c.x.v[i]; }
  }
  return c;
}

template <typename S>
Tensor<S> net_forward(NetParams<S> const &p, Tensor<S> x)
{
  return std::move(forward_cached(p, std::move(x)).y);
}

template <typename S>
ComplexVolume net_forward(NetParams<S> const &p, ComplexVolume const &x)
{
  return from_channels(net_forward(p, to_channels<S>(x)), x.spacing());
}

/// Mean absolute difference over voxels and both channels.
template <typename S>
double loss_l1(Tensor<S> const &pred, Tensor<S> const &target)
{
  require(pred.channels == target.channels && pred.shape == target.shape, "loss_l1 shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.v.size(); ++i) { s += std::abs(static_cast<double>(pred.v[i]) - target.v[i]); }
  return s / pred.v.size();
}

inline double loss_l1(ComplexVolume const &pred, ComplexVolume const &target)
{
  require_same_shape(pred.shape(), target.shape(), "loss_l1");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    s += std::abs(pred[i].real() - target[i].real()) + std::abs(pred[i].imag() - target[i].imag());
  }
  return s / (2.0 * pred.size());
}

/// Loss and accumulated parameter gradients (added into `g`, scaled by `weight`).
template <typename S>
double net_backward(NetParams<S> const &p, Tensor<S> const &x, Tensor<S> const &target, Grads<S> &g, S weight = S(1))
{
  auto c = forward_cached(p, x);
  double const loss = loss_l1(c.y, target);
  auto const &L = p.layers;
  // dL/dy with the subgradient of |.| at 0 taken as 0.
  Tensor<S> dy(c.y.channels, c.y.shape);
  S const scale = weight / static_cast<S>(c.y.v.size());
  for (std::size_t i = 0; i < dy.v.size(); ++i) {
    S const d = c.y.v[i] - target.v[i];
    dy.v[i] = d > S(0) ? scale : (d < S(0) ? -scale : S(0));
  }
  Tensor<S> dh, tmp, da;
  int const nb = L.blocks();
  Tensor<S> const &h_last = nb > 0 ? c.h[nb - 1] : c.h0;
  conv_backward(L.out(), h_last, dy, g.out().weight, g.out().bias, &dh);
  for (int b = nb - 1; b >= 0; --b) {
    Tensor<S> const &h_in = b > 0 ? c.h[b - 1] : c.h0;
    conv_backward(L.block_b(b), c.a[b], dh, g.conv[2 + 2 * b].weight, g.conv[2 + 2 * b].bias, &da);
    for (std::size_t i = 0; i < da.v.size(); ++i) {
      if (c.a[b].v[i] <= S(0)) { da.v[i] = S(0); }
    }
    conv_backward(L.block_a(b), h_in, da, g.conv[1 + 2 * b].weight, g.conv[1 + 2 * b].bias, &tmp);
    for (std::size_t i = 0; i < dh.v.size(); ++i) { dh.v[i] += tmp.v[i]; }
  }
  for (std::size_t i = 0; i < dh.v.size(); ++i) {
    if (c.h0.v[i] <= S(0)) { dh.v[i] = S(0); }
  }
  conv_backward(L.in(), c.x, dh, g.in().weight, g.in().bias, static_cast<Tensor<S> *>(nullptr));
  return loss;
}

struct AdamOptions
{
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam update with bias correction. Non-finite gradients raise DivergenceError before any change.
template <typename S>
void adam_step(NetParams<S> &p, Grads<S> const &g, double lr, AdamOptions const &opt = {})
{
  for (auto const &c : g.conv) {
    require<DivergenceError>(c.weight.allFinite() && c.bias.allFinite(), "non-finite gradient; training diverged");
  }
  p.adam.step += 1;
  double const t = static_cast<double>(p.adam.step);
  double const c1 = 1.0 - std::pow(opt.beta1, t), c2 = 1.0 - std::pow(opt.beta2, t);
  auto update = [&](S *w, S *m, S *v, S const *gr, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      m[i] = static_cast<S>(opt.beta1 * m[i] + (1.0 - opt.beta1) * gr[i]);
      v[i] = static_cast<S>(opt.beta2 * v[i] + (1.0 - opt.beta2) * static_cast<double>(gr[i]) * gr[i]);
      double const mh = m[i] / c1, vh = v[i] / c2;
      w[i] = static_cast<S>(w[i] - lr * mh / (std::sqrt(vh) + opt.eps));
    }
  };
  for (std::size_t l = 0; l < p.layers.conv.size(); ++l) {
    auto &w = p.layers.conv[l];
    auto &m = p.adam.m.conv[l];
    auto &v = p.adam.v.conv[l];
    update(w.weight.data(), m.weight.data(), v.weight.data(), g.conv[l].weight.data(), w.weight.size());
    update(w.bias.data(), m.bias.data(), v.bias.data(), g.conv[l].bias.data(), w.bias.size());
  }
}

template <typename S>
bool all_finite(Layers<S> const &l)
{
  for (auto const &c : l.conv) {
    if (!c.weight.allFinite() || !c.bias.allFinite()) { return false; }
  }
  return true;
}

} // namespace offres::nn
