#pragma once

#include "error.hpp"
#include "volume.hpp"

#include <cmath>
#include <vector>

namespace offres {

enum class Border
{
  zero,        // samples outside the volume count as zero
  renormalize, // weights are rescaled to the part of the kernel inside the volume
};

/// Normalized 1D Gaussian taps on [-ceil(3 sigma), ceil(3 sigma)].
inline std::vector<double> gaussian_taps(double sigma)
{
  require(sigma >= 0.0 && std::isfinite(sigma), "Gaussian sigma must be non-negative");
  if (sigma == 0.0) { return {1.0}; }
  int const r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> t(2 * r + 1);
  double s = 0.0;
  for (int i = -r; i <= r; ++i) { s += t[i + r] = std::exp(-0.5 * i * i / (sigma * sigma)); }
  for (auto &x : t) { x /= s; }
  return t;
}

namespace detail {

template <typename T>
void convolve_axis(Volume<T> &v, std::vector<double> const &taps, int axis, Border border)
{
  Shape3 const s = v.shape();
  int const r = static_cast<int>(taps.size() / 2);
  int const len = s[axis];
  std::size_t const stride = axis == 0 ? 1 : (axis == 1 ? static_cast<std::size_t>(s.x) : static_cast<std::size_t>(s.x) * s.y);
  int const n1 = axis == 0 ? s.y : s.x;
  int const n2 = axis == 2 ? s.y : s.z;
  std::vector<T> line(len);
  for (int b = 0; b < n2; ++b) {
    for (int a = 0; a < n1; ++a) {
      std::size_t base = 0;
      if (axis == 0) { base = v.index(0, a, b); }
      if (axis == 1) { base = v.index(a, 0, b); }
      if (axis == 2) { base = v.index(a, b, 0); }
      for (int i = 0; i < len; ++i) { line[i] = v[base + i * stride]; }
      for (int i = 0; i < len; ++i) {
        T acc{};
        double wsum = 0.0;
        for (int d = -r; d <= r; ++d) {
          int const j = i + d;
          if (j < 0 || j >= len) { continue; }
          acc += line[j] * taps[d + r];
          wsum += taps[d + r];
        }
        v[base + i * stride] = border == Border::renormalize ? acc / wsum : acc;
      }
    }
  }
}

} // namespace detail

/// Separable Gaussian smoothing with the kernel truncated at 3 sigma.
template <typename T>
Volume<T> gaussian_smooth(Volume<T> v, double sigma, Border border = Border::zero)
{
  auto const taps = gaussian_taps(sigma);
  if (taps.size() == 1) { return v; }
  for (int axis = 0; axis < 3; ++axis) { detail::convolve_axis(v, taps, axis, border); }
  return v;
}

/// Sum over the cube [r - h, r + h]^3 with zero padding, via running sums per axis.
inline RealVolume box_sum(RealVolume v, int half_width)
{
  require(half_width >= 0, "window half-width must be >= 0");
  if (half_width == 0) { return v; }
  Shape3 const s = v.shape();
  for (int axis = 0; axis < 3; ++axis) {
    int const len = s[axis];
    std::size_t const stride = axis == 0 ? 1 : (axis == 1 ? static_cast<std::size_t>(s.x) : static_cast<std::size_t>(s.x) * s.y);
    int const n1 = axis == 0 ? s.y : s.x;
    int const n2 = axis == 2 ? s.y : s.z;
    std::vector<double> prefix(len + 1);
    for (int b = 0; b < n2; ++b) {
      for (int a = 0; a < n1; ++a) {
        std::size_t base = axis == 0 ? v.index(0, a, b) : (axis == 1 ? v.index(a, 0, b) : v.index(a, b, 0));
        for (int i = 0; i < len; ++i) { prefix[i + 1] = prefix[i] + v[base + i * stride]; }
        for (int i = 0; i < len; ++i) {
          int const lo = std::max(0, i - half_width), hi = std::min(len, i + half_width + 1);
          v[base + i * stride] = prefix[hi] - prefix[lo];
        }
      }
    }
  }
  return v;
}

/// Gaussian average of `values` over voxels where mask != 0; voxels outside the mask get `fill`.
inline RealVolume masked_smooth(RealVolume const &values, Mask const &mask, double sigma, double fill = 0.0)
{
  require_same_shape(values.shape(), mask.shape(), "masked_smooth");
  RealVolume num(values.shape()), den(values.shape());
  for (std::size_t i = 0; i < values.size(); ++i) {
    num[i] = mask[i] ? values[i] : 0.0;
    den[i] = mask[i] ? 1.0 : 0.0;
  }
  num = gaussian_smooth(std::move(num), sigma);
  den = gaussian_smooth(std::move(den), sigma);
  RealVolume out(values.shape(), fill, values.spacing());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (mask[i] && den[i] > 0.0) { out[i] = num[i] / den[i]; }
  }
  return out;
}

} // namespace offres
