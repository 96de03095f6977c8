#pragma once

#include "volume.hpp"

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <memory>
#include <mutex>

namespace offres {

namespace detail {
inline std::mutex &fftw_planner_mutex()
{
  static std::mutex m;
  return m;
}
struct FftwFree
{
  void operator()(void *p) const { fftw_free(p); }
};
struct PlanDestroy
{
  void operator()(fftw_plan p) const
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
} // namespace detail

/// SIMD-aligned complex buffer owned by FFTW's allocator.
class FftBuffer
{
public:
  explicit FftBuffer(std::size_t n)
    : n_(n)
    , ptr_(static_cast<Cx *>(fftw_malloc(sizeof(Cx) * n)))
  {
    if (!ptr_) { throw std::bad_alloc(); }
    std::memset(static_cast<void *>(ptr_.get()), 0, sizeof(Cx) * n);
  }
  Cx *data() { return ptr_.get(); }
  Cx const *data() const { return ptr_.get(); }
  std::size_t size() const { return n_; }
  Cx &operator[](std::size_t i) { return ptr_.get()[i]; }
  Cx const &operator[](std::size_t i) const { return ptr_.get()[i]; }
  void zero() { std::memset(static_cast<void *>(ptr_.get()), 0, sizeof(Cx) * n_); }

private:
  std::size_t n_;
  std::unique_ptr<Cx, detail::FftwFree> ptr_;
};

/*
 * In-place unnormalized 3D DFT of a cubic-or-not x-fastest array. The plan is
 * built once against a scratch buffer and executed on caller buffers with the
 * new-array interface, so one plan can serve concurrent callers.
 */
class Fft3
{
public:
  Fft3(Shape3 shape, int sign)
    : shape_(shape)
  {
    FftBuffer scratch(shape.voxels());
    std::lock_guard lock(detail::fftw_planner_mutex());
    auto *p = reinterpret_cast<fftw_complex *>(scratch.data());
    plan_.reset(fftw_plan_dft_3d(shape.z, shape.y, shape.x, p, p, sign, FFTW_ESTIMATE));
    if (!plan_) { throw Error("fftw", "fftw planning failed"); }
  }

  void execute(FftBuffer &buf) const
  {
    require(buf.size() == shape_.voxels(), "fft buffer size mismatch");
    auto *p = reinterpret_cast<fftw_complex *>(buf.data());
    fftw_execute_dft(plan_.get(), p, p);
  }

  Shape3 shape() const { return shape_; }

private:
  Shape3 shape_;
  std::unique_ptr<std::remove_pointer_t<fftw_plan>, detail::PlanDestroy> plan_;
};

/// Unnormalized forward DFT (e^{-i}) of a volume, mainly for tests.
inline ComplexVolume fft3(ComplexVolume const &v, int sign = FFTW_FORWARD)
{
  FftBuffer buf(v.size());
  std::copy(v.begin(), v.end(), buf.data());
  Fft3(v.shape(), sign).execute(buf);
  ComplexVolume out(v.shape(), Cx{}, v.spacing());
  std::copy(buf.data(), buf.data() + buf.size(), out.data());
  return out;
}

} // namespace offres
