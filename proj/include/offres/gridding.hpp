#pragma once

#include "fft.hpp"
#include "kernel.hpp"
#include "parallel.hpp"
#include "trajectory.hpp"
#include "volume.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace offres {

struct GridOptions
{
  double oversamp = 2.0;
  double kernel_width = 4.0;
};

/*
 * Precomputed convolution plan between a fixed set of k-space positions and
 * an oversampled periodic Cartesian grid. Sample k (cycles/FOV) maps to grid
 * coordinate u = k * G / N. Image voxel index i corresponds to position
 * r = i - N/2, stored on the oversampled grid at r mod G, so no shifts are
 * needed around the FFT.
 *
 * Spreading is parallel over grid z-planes: each plane visits the samples
 * touching it in ascending sample order, so the accumulated values do not
 * depend on the thread count.
 */
class Gridder
{
public:
  Gridder(std::span<KPoint const> k, int n, GridOptions opt = {})
    : n_(n)
    , g_(2 * static_cast<int>(std::ceil(0.5 * opt.oversamp * n)))
    , p_(static_cast<int>(std::floor(opt.kernel_width)) + 1)
    , kb_(opt.kernel_width, opt.oversamp)
    , ns_(k.size())
    , fwd_(Shape3::cube(g_), FFTW_FORWARD)
    , bwd_(Shape3::cube(g_), FFTW_BACKWARD)
  {
    require(n >= 8 && n % 2 == 0, "gridding needs an even matrix size >= 8");
    require(ns_ > 0, "cannot grid an empty trajectory");
    require(ns_ < (std::size_t{1} << 31), "too many samples");
    double const half = 0.5 * opt.kernel_width;
    double const scale = static_cast<double>(g_) / n_;
    start_.resize(ns_);
    w_.resize(ns_ * 3 * p_);
    for (std::size_t j = 0; j < ns_; ++j) {
      for (int a = 0; a < 3; ++a) {
        double const u = k[j][a] * scale;
        int const s = static_cast<int>(std::ceil(u - half));
        start_[j][a] = s;
        for (int q = 0; q < p_; ++q) { w_[(j * 3 + a) * p_ + q] = kb_(u - (s + q)); }
      }
    }
    // CSR lists of (sample, z-offset) per grid plane.
    plane_offset_.assign(g_ + 1, 0);
    for (std::size_t j = 0; j < ns_; ++j) {
      for (int q = 0; q < p_; ++q) { ++plane_offset_[wrap(start_[j][2] + q) + 1]; }
    }
    for (int z = 0; z < g_; ++z) { plane_offset_[z + 1] += plane_offset_[z]; }
    plane_entry_.resize(plane_offset_[g_]);
    std::vector<std::size_t> fill(plane_offset_.begin(), plane_offset_.end() - 1);
    for (std::size_t j = 0; j < ns_; ++j) {
      for (int q = 0; q < p_; ++q) {
        plane_entry_[fill[wrap(start_[j][2] + q)]++] = Entry{static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(q)};
      }
    }
    deapod_.resize(n_);
    for (int i = 0; i < n_; ++i) { deapod_[i] = 1.0 / kb_.transform(static_cast<double>(i - n_ / 2) / g_); }
  }

  int matrix() const { return n_; }
  int grid() const { return g_; }
  std::size_t samples() const { return ns_; }
  KaiserBessel const &kernel() const { return kb_; }

  /// Convolve sample values onto the oversampled grid (no FFT).
  void spread(std::span<Cx const> v, FftBuffer &grid) const
  {
    require(v.size() == ns_, "spread: value count mismatch");
    require(grid.size() == static_cast<std::size_t>(g_) * g_ * g_, "spread: grid size mismatch");
    grid.zero();
    std::size_t const plane = static_cast<std::size_t>(g_) * g_;
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (int z = 0; z < g_; ++z) {
      Cx *out = grid.data() + plane * z;
      for (std::size_t e = plane_offset_[z]; e < plane_offset_[z + 1]; ++e) {
        auto const [j, q] = plane_entry_[e];
        Cx const vz = v[j] * weight(j, 2, q);
        int const sy = start_[j][1], sx = start_[j][0];
        for (int b = 0; b < p_; ++b) {
          Cx const vy = vz * weight(j, 1, b);
          Cx *row = out + static_cast<std::size_t>(wrap(sy + b)) * g_;
          for (int c = 0; c < p_; ++c) { row[wrap(sx + c)] += vy * weight(j, 0, c); }
        }
      }
    }
  }

  /// Kernel-weighted read of the grid at every sample position.
  void interpolate(FftBuffer const &grid, std::span<Cx> out) const
  {
    require(out.size() == ns_, "interpolate: output count mismatch");
    std::size_t const plane = static_cast<std::size_t>(g_) * g_;
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t jj = 0; jj < static_cast<std::int64_t>(ns_); ++jj) {
      auto const j = static_cast<std::size_t>(jj);
      Cx acc{};
      for (int q = 0; q < p_; ++q) {
        Cx const *pz = grid.data() + plane * wrap(start_[j][2] + q);
        Cx accy{};
        for (int b = 0; b < p_; ++b) {
          Cx const *row = pz + static_cast<std::size_t>(wrap(start_[j][1] + b)) * g_;
          Cx accx{};
          for (int c = 0; c < p_; ++c) { accx += row[wrap(start_[j][0] + c)] * weight(j, 0, c); }
          accy += accx * weight(j, 1, b);
        }
        acc += accy * weight(j, 2, q);
      }
      out[j] = acc;
    }
  }

  /// Spread, inverse FFT, deapodize and crop: approximates
  /// scale * sum_j v_j exp(+i 2 pi k_j . r / N).
  ComplexVolume adjoint(std::span<Cx const> v, double scale = 1.0) const
  {
    FftBuffer grid(static_cast<std::size_t>(g_) * g_ * g_);
    spread(v, grid);
    bwd_.execute(grid);
    ComplexVolume img(Shape3::cube(n_));
    for (int z = 0; z < n_; ++z) {
      for (int y = 0; y < n_; ++y) {
        Cx const *row = grid.data() + (static_cast<std::size_t>(wrap(z - n_ / 2)) * g_ + wrap(y - n_ / 2)) * g_;
        double const dzy = deapod_[z] * deapod_[y] * scale;
        for (int x = 0; x < n_; ++x) { img(x, y, z) = row[wrap(x - n_ / 2)] * (deapod_[x] * dzy); }
      }
    }
    return img;
  }

  /// Deapodize, zero-pad, FFT and interpolate: approximates
  /// sum_r img(r) exp(-i 2 pi k_j . r / N).
  std::vector<Cx> forward(ComplexVolume const &img) const
  {
    require(img.shape() == Shape3::cube(n_), "forward gridding expects a " + Shape3::cube(n_).str() + " image");
    FftBuffer grid(static_cast<std::size_t>(g_) * g_ * g_);
    for (int z = 0; z < n_; ++z) {
      for (int y = 0; y < n_; ++y) {
        Cx *row = grid.data() + (static_cast<std::size_t>(wrap(z - n_ / 2)) * g_ + wrap(y - n_ / 2)) * g_;
        double const dzy = deapod_[z] * deapod_[y];
        for (int x = 0; x < n_; ++x) { row[wrap(x - n_ / 2)] = img(x, y, z) * (deapod_[x] * dzy); }
      }
    }
    fwd_.execute(grid);
    std::vector<Cx> out(ns_);
    interpolate(grid, out);
    return out;
  }

private:
  struct Entry
  {
    std::uint32_t sample;
    std::uint32_t offset;
  };

  int wrap(int i) const
  {
    int const m = i % g_;
    return m < 0 ? m + g_ : m;
  }
  double weight(std::size_t j, int axis, int q) const { return w_[(j * 3 + axis) * p_ + q]; }

  int n_, g_, p_;
  KaiserBessel kb_;
  std::size_t ns_;
  std::vector<std::array<int, 3>> start_;
  std::vector<double> w_;
  std::vector<std::size_t> plane_offset_;
  std::vector<Entry> plane_entry_;
  std::vector<double> deapod_;
  Fft3 fwd_, bwd_;
};

} // namespace offres
