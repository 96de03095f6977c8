#pragma once

#include "error.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace offres {

using Cx = std::complex<double>;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Index3
{
  int x = 0, y = 0, z = 0;
  friend bool operator==(Index3 const &, Index3 const &) = default;
};

/// Extent of a 3D array. x is the fastest-varying axis.
struct Shape3
{
  int x = 0, y = 0, z = 0;

  constexpr std::size_t voxels() const
  {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  constexpr int operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  constexpr int min() const { return std::min(x, std::min(y, z)); }
  constexpr bool contains(Index3 const &i) const
  {
    return i.x >= 0 && i.y >= 0 && i.z >= 0 && i.x < x && i.y < y && i.z < z;
  }
  static constexpr Shape3 cube(int n) { return {n, n, n}; }
  std::string str() const
  {
    return std::to_string(x) + "x" + std::to_string(y) + "x" + std::to_string(z);
  }
  friend bool operator==(Shape3 const &, Shape3 const &) = default;
};

/// Dense 3D array with voxel spacing, stored x-fastest (column-major).
template <typename T>
class Volume
{
public:
  using value_type = T;

  Volume() = default;
  explicit Volume(Shape3 shape, T fill = T{}, std::array<double, 3> spacing_mm = {1.0, 1.0, 1.0})
    : shape_(shape)
    , spacing_(spacing_mm)
  {
    require(shape.x >= 1 && shape.y >= 1 && shape.z >= 1, "volume shape must be positive, got " + shape.str());
    data_.assign(shape.voxels(), fill);
  }

  Shape3 shape() const { return shape_; }
  std::array<double, 3> const &spacing() const { return spacing_; }
  void set_spacing(std::array<double, 3> s) { spacing_ = s; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(int ix, int iy, int iz) const
  {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(shape_.x) *
             (static_cast<std::size_t>(iy) + static_cast<std::size_t>(shape_.y) * static_cast<std::size_t>(iz));
  }
  T &operator()(int ix, int iy, int iz) { return data_[index(ix, iy, iz)]; }
  T const &operator()(int ix, int iy, int iz) const { return data_[index(ix, iy, iz)]; }
  T &operator()(Index3 i) { return data_[index(i.x, i.y, i.z)]; }
  T const &operator()(Index3 i) const { return data_[index(i.x, i.y, i.z)]; }
  T &operator[](std::size_t i) { return data_[i]; }
  T const &operator[](std::size_t i) const { return data_[i]; }

  T *data() { return data_.data(); }
  T const *data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<T const> values() const { return data_; }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  friend bool operator==(Volume const &a, Volume const &b)
  {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

private:
  Shape3 shape_{};
  std::array<double, 3> spacing_{1.0, 1.0, 1.0};
  std::vector<T> data_;
};

using ComplexVolume = Volume<Cx>;
using RealVolume = Volume<double>;
using Mask = Volume<unsigned char>;

/// Per-voxel off-resonance frequency in Hz.
class FieldMap : public Volume<double>
{
public:
  using Volume<double>::Volume;
  FieldMap() = default;
  explicit FieldMap(Volume<double> v)
    : Volume<double>(std::move(v))
  {
  }
};

template <typename T>
bool all_finite(Volume<T> const &v)
{
  for (auto const &x : v) {
    if constexpr (std::is_same_v<T, Cx>) {
      if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) { return false; }
    } else {
      if (!std::isfinite(static_cast<double>(x))) { return false; }
    }
  }
  return true;
}

inline void require_same_shape(Shape3 a, Shape3 b, char const *what)
{
  require(a == b, std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
}

inline RealVolume magnitude(ComplexVolume const &v)
{
  RealVolume m(v.shape(), 0.0, v.spacing());
  for (std::size_t i = 0; i < v.size(); ++i) { m[i] = std::abs(v[i]); }
  return m;
}

inline double max_abs(ComplexVolume const &v)
{
  double m = 0.0;
  for (auto const &x : v) { m = std::max(m, std::abs(x)); }
  return m;
}

inline double l2_norm(std::span<Cx const> v)
{
  double s = 0.0;
  for (auto const &x : v) { s += std::norm(x); }
  return std::sqrt(s);
}

/// ||a - b|| / ||b|| over complex values.
inline double relative_l2(std::span<Cx const> a, std::span<Cx const> b)
{
  require(a.size() == b.size(), "relative_l2: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

} // namespace offres
