#pragma once

#include "../error.hpp"
#include "../volume.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstring>
#include <vector>

namespace offres::nn {

template <typename S>
using RowMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Multi-channel volume, layout [channel][z][y][x] with x fastest.
template <typename S>
struct Tensor
{
  int channels = 0;
  Shape3 shape{};
  std::vector<S> v;

  Tensor() = default;
  Tensor(int c, Shape3 s, S fill = S(0))
    : channels(c)
    , shape(s)
    , v(static_cast<std::size_t>(c) * s.voxels(), fill)
  {
  }

  std::size_t plane_size() const { return static_cast<std::size_t>(shape.x) * shape.y; }
  std::size_t channel_size() const { return shape.voxels(); }
  S *plane(int c, int z) { return v.data() + (static_cast<std::size_t>(c) * shape.z + z) * plane_size(); }
  S const *plane(int c, int z) const { return v.data() + (static_cast<std::size_t>(c) * shape.z + z) * plane_size(); }
  S &at(int c, int x, int y, int z) { return plane(c, z)[static_cast<std::size_t>(y) * shape.x + x]; }
  S const &at(int c, int x, int y, int z) const { return plane(c, z)[static_cast<std::size_t>(y) * shape.x + x]; }
  void zero() { std::fill(v.begin(), v.end(), S(0)); }
};

/// 3D convolution (cross-correlation) with zero padding that preserves the shape.
template <typename S>
struct Conv3d
{
  int cin = 0, cout = 0, k = 0;
  RowMatrix<S> weight; // cout x (cin * k^3), column index ((dz * cin + ci) * k + dy) * k + dx
  Vector<S> bias;

  Conv3d() = default;
  Conv3d(int in, int out, int kernel)
    : cin(in)
    , cout(out)
    , k(kernel)
    , weight(RowMatrix<S>::Zero(out, static_cast<Eigen::Index>(in) * kernel * kernel * kernel))
    , bias(Vector<S>::Zero(out))
  {
    require(in >= 1 && out >= 1, "convolution channel counts must be >= 1");
    require(kernel >= 1 && kernel % 2 == 1, "convolution kernel must be odd");
  }

  int fan_in() const { return cin * k * k * k; }
};

namespace detail {

// Columns contributed by input plane zz to one output plane: rows index (ci, dy, dx),
// columns index (y, x). Planes outside the volume are never requested.
template <typename S>
void im2col_slice(Tensor<S> const &in, int k, int zz, RowMatrix<S> &col)
{
  int const p = k / 2, W = in.shape.x, H = in.shape.y;
  std::size_t const hw = in.plane_size();
  col.resize(static_cast<Eigen::Index>(in.channels) * k * k, static_cast<Eigen::Index>(hw));
  Eigen::Index r = 0;
  for (int ci = 0; ci < in.channels; ++ci) {
    S const *src = in.plane(ci, zz);
    for (int dy = 0; dy < k; ++dy) {
      for (int dx = 0; dx < k; ++dx, ++r) {
        S *dst = col.data() + r * hw;
        int const sx = dx - p;
        int const x0 = std::max(0, -sx), x1 = std::min(W, W - sx);
        for (int y = 0; y < H; ++y) {
          int const yy = y + dy - p;
          S *row = dst + static_cast<std::size_t>(y) * W;
          if (yy < 0 || yy >= H || x0 >= x1) {
            std::fill(row, row + W, S(0));
            continue;
          }
          std::fill(row, row + x0, S(0));
          std::memcpy(row + x0, src + static_cast<std::size_t>(yy) * W + x0 + sx, sizeof(S) * (x1 - x0));
          std::fill(row + x1, row + W, S(0));
        }
      }
    }
  }
}

// Scatter-add of a slice column matrix into input-gradient plane zz.
template <typename S>
void col2im_slice_add(RowMatrix<S> const &col, int k, int zz, Tensor<S> &grad_in)
{
  int const p = k / 2, W = grad_in.shape.x, H = grad_in.shape.y;
  std::size_t const hw = grad_in.plane_size();
  Eigen::Index r = 0;
  for (int ci = 0; ci < grad_in.channels; ++ci) {
    S *dst = grad_in.plane(ci, zz);
    for (int dy = 0; dy < k; ++dy) {
      for (int dx = 0; dx < k; ++dx, ++r) {
        S const *src = col.data() + r * hw;
        int const sx = dx - p;
        int const x0 = std::max(0, -sx), x1 = std::min(W, W - sx);
        for (int y = 0; y < H; ++y) {
          int const yy = y + dy - p;
          if (yy < 0 || yy >= H) { continue; }
          S const *s = src + static_cast<std::size_t>(y) * W;
          S *d = dst + static_cast<std::size_t>(yy) * W + sx;
          for (int x = x0; x < x1; ++x) { d[x] += s[x]; }
        }
      }
    }
  }
}

template <typename S>
using PlaneMap = Eigen::Map<RowMatrix<S>, 0, Eigen::OuterStride<>>;
template <typename S>
using ConstPlaneMap = Eigen::Map<RowMatrix<S> const, 0, Eigen::OuterStride<>>;

} // namespace detail

template <typename S>
void conv_forward(Conv3d<S> const &c, Tensor<S> const &in, Tensor<S> &out)
{
  require(in.channels == c.cin, "convolution input channel mismatch");
  require(in.shape.min() >= c.k, "input " + in.shape.str() + " is smaller than the kernel");
  out = Tensor<S>(c.cout, in.shape);
  auto const hw = static_cast<Eigen::Index>(in.plane_size());
  auto const stride = static_cast<Eigen::Index>(in.channel_size());
  auto const slice = static_cast<Eigen::Index>(c.cin) * c.k * c.k;
  int const p = c.k / 2;
  RowMatrix<S> col;
  // Each input plane is unfolded once and feeds the k output planes that see it.
  for (int zz = 0; zz < in.shape.z; ++zz) {
    detail::im2col_slice(in, c.k, zz, col);
    for (int dz = 0; dz < c.k; ++dz) {
      int const z = zz - dz + p;
      if (z < 0 || z >= in.shape.z) { continue; }
      detail::PlaneMap<S> y(out.plane(0, z), c.cout, hw, Eigen::OuterStride<>(stride));
      y.noalias() += c.weight.middleCols(dz * slice, slice) * col;
    }
  }
  for (int co = 0; co < c.cout; ++co) {
    S *o = out.plane(co, 0);
    S const b = c.bias[co];
    for (std::size_t i = 0; i < out.channel_size(); ++i) { o[i] += b; }
  }
}

/// Accumulates weight/bias gradients and, when grad_in is non-null, writes the input gradient.
template <typename S>
void conv_backward(Conv3d<S> const &c,
                   Tensor<S> const &in,
                   Tensor<S> const &grad_out,
                   RowMatrix<S> &grad_w,
                   Vector<S> &grad_b,
                   Tensor<S> *grad_in)
{
  auto const hw = static_cast<Eigen::Index>(in.plane_size());
  auto const stride = static_cast<Eigen::Index>(in.channel_size());
  auto const slice = static_cast<Eigen::Index>(c.cin) * c.k * c.k;
  int const p = c.k / 2;
  if (grad_in) { *grad_in = Tensor<S>(c.cin, in.shape); }
  for (int co = 0; co < c.cout; ++co) {
    S const *g = grad_out.plane(co, 0);
    S acc = S(0);
    for (std::size_t i = 0; i < grad_out.channel_size(); ++i) { acc += g[i]; }
    grad_b[co] += acc;
  }
  RowMatrix<S> col, dcol;
  for (int zz = 0; zz < in.shape.z; ++zz) {
    detail::im2col_slice(in, c.k, zz, col);
    if (grad_in) { dcol = RowMatrix<S>::Zero(slice, hw); }
    for (int dz = 0; dz < c.k; ++dz) {
      int const z = zz - dz + p;
      if (z < 0 || z >= in.shape.z) { continue; }
      detail::ConstPlaneMap<S> dy(grad_out.plane(0, z), c.cout, hw, Eigen::OuterStride<>(stride));
      grad_w.middleCols(dz * slice, slice).noalias() += dy * col.transpose();
      if (grad_in) { dcol.noalias() += c.weight.middleCols(dz * slice, slice).transpose() * dy; }
    }
    if (grad_in) { detail::col2im_slice_add(dcol, c.k, zz, *grad_in); }
  }
}

template <typename S>
void relu_inplace(Tensor<S> &t)
{
  for (auto &x : t.v) { x = x > S(0) ? x : S(0); }
}

} // namespace offres::nn
