#pragma once

#include "error.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace offres {

/*
 * Kaiser-Bessel gridding kernel of full width W (in oversampled grid units)
 * with the shape parameter chosen from the oversampling ratio:
 *
 *   beta = pi * sqrt((W/alpha)^2 (alpha - 1/2)^2 - 0.8)
 *
 * Spatial values come from a dense lookup table; the Fourier transform is
 * evaluated in closed form for deapodization.
 */
class KaiserBessel
{
public:
  KaiserBessel(double width, double oversamp)
    : width_(width)
    , half_(0.5 * width)
  {
    require(width >= 2.0, "kernel width must be >= 2");
    require(oversamp >= 1.25, "oversampling must be >= 1.25");
    double const a = (width / oversamp) * (oversamp - 0.5);
    beta_ = std::numbers::pi * std::sqrt(std::max(a * a - 0.8, 1e-6));
    table_.resize(kTablePerUnit * static_cast<std::size_t>(std::ceil(half_)) + 2);
    for (std::size_t i = 0; i < table_.size(); ++i) {
      table_[i] = exact(static_cast<double>(i) / kTablePerUnit);
    }
  }

  double width() const { return width_; }
  double beta() const { return beta_; }

  /// Kernel value at offset d (grid units); zero outside |d| <= W/2.
  double operator()(double d) const
  {
    d = std::abs(d);
    if (d > half_) { return 0.0; }
    double const x = d * kTablePerUnit;
    auto const i = static_cast<std::size_t>(x);
    double const f = x - static_cast<double>(i);
    return table_[i] + f * (table_[i + 1] - table_[i]);
  }

  double exact(double d) const
  {
    d = std::abs(d);
    if (d > half_) { return 0.0; }
    double const u = 2.0 * d / width_;
    return std::cyl_bessel_i(0.0, beta_ * std::sqrt(std::max(0.0, 1.0 - u * u)));
  }

  /// Continuous Fourier transform at nu cycles per grid unit.
  double transform(double nu) const
  {
    double const x = std::numbers::pi * width_ * nu;
    double const z2 = beta_ * beta_ - x * x;
    if (std::abs(z2) < 1e-12) { return width_; }
    if (z2 > 0.0) {
      double const z = std::sqrt(z2);
      return width_ * std::sinh(z) / z;
    }
    double const z = std::sqrt(-z2);
    return width_ * std::sin(z) / z;
  }

private:
  static constexpr std::size_t kTablePerUnit = 8192;
  double width_;
  double half_;
  double beta_ = 0.0;
  std::vector<double> table_;
};

} // namespace offres
