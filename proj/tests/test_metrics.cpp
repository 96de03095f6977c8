#include "support.hpp"

#include <offres/filters.hpp>
#include <offres/metrics.hpp>

#include <catch2/catch_amalgamated.hpp>

using namespace offres;
using Catch::Approx;

namespace {

// Direct per-voxel SSIM with an explicit 3D Gaussian window, renormalized at the border.
double ssim_bruteforce(ComplexVolume const &x, ComplexVolume const &ref, double sigma)
{
  Shape3 const s = x.shape();
  int const r = static_cast<int>(std::ceil(3 * sigma));
  double L = 0.0;
  for (auto const &v : ref) { L = std::max(L, std::abs(v)); }
  double const c1 = std::pow(0.01 * L, 2), c2 = std::pow(0.03 * L, 2);
  double total = 0.0;
  for (int z = 0; z < s.z; ++z) {
    for (int y = 0; y < s.y; ++y) {
      for (int x0 = 0; x0 < s.x; ++x0) {
        double w = 0, ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
        for (int dz = -r; dz <= r; ++dz) {
          for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
              int const xx = x0 + dx, yy = y + dy, zz = z + dz;
              if (!s.contains({xx, yy, zz})) { continue; }
              double const g = std::exp(-(dx * dx + dy * dy + dz * dz) / (2 * sigma * sigma));
              double const a = std::abs(x(xx, yy, zz)), b = std::abs(ref(xx, yy, zz));
              w += g;
              ma += g * a;
              mb += g * b;
              aa += g * a * a;
              bb += g * b * b;
              ab += g * a * b;
            }
          }
        }
        ma /= w;
        mb /= w;
        double const va = aa / w - ma * ma, vb = bb / w - mb * mb, cov = ab / w - ma * mb;
        total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      }
    }
  }
  return total / x.size();
}

ComplexVolume flipped(ComplexVolume const &v)
{
  Shape3 const s = v.shape();
  ComplexVolume out(s);
  for (int z = 0; z < s.z; ++z) {
    for (int y = 0; y < s.y; ++y) {
      for (int x = 0; x < s.x; ++x) { out(x, y, z) = v(s.x - 1 - x, y, s.z - 1 - z); }
    }
  }
  return out;
}

} // namespace

TEST_CASE("nrmse", "[metrics]")
{
  auto const ref = test::random_volume(Shape3{7, 6, 5}, 1);
  auto const x = test::random_volume(Shape3{7, 6, 5}, 2);
  CHECK(nrmse(ref, ref) == 0.0);
  CHECK(nrmse(ComplexVolume(ref.shape()), ref) == Approx(1.0).epsilon(1e-15));
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += std::pow(std::abs(x[i]) - std::abs(ref[i]), 2);
    den += std::pow(std::abs(ref[i]), 2);
  }
  CHECK(nrmse(x, ref) == Approx(std::sqrt(num / den)).epsilon(1e-12));
  auto xs = x, rs = ref;
  for (auto &v : xs) { v *= 3.5; }
  for (auto &v : rs) { v *= 3.5; }
  CHECK(nrmse(xs, rs) == Approx(nrmse(x, ref)).epsilon(1e-12));
  CHECK(nrmse(flipped(x), flipped(ref)) == Approx(nrmse(x, ref)).epsilon(1e-12));
  CHECK_THROWS_AS(nrmse(x, ComplexVolume(x.shape())), ValidationError);
  CHECK_THROWS_AS(nrmse(x, ComplexVolume(Shape3::cube(3))), ValidationError);
}

TEST_CASE("psnr", "[metrics]")
{
  auto const ref = test::random_volume(Shape3::cube(6), 3);
  CHECK(psnr(ref, ref) == kPsnrIdentical);
  CHECK(std::isinf(psnr(ref, ref)));

  // Every magnitude off by exactly max|ref| gives 0 dB.
  double const peak = max_abs(ref);
  auto shifted = ref;
  for (auto &v : shifted) { v = std::polar(std::abs(v) + peak, std::arg(v)); }
  CHECK(psnr(shifted, ref) == Approx(0.0).margin(1e-10));

  auto const x = test::random_volume(Shape3::cube(6), 4);
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) { se += std::pow(std::abs(x[i]) - std::abs(ref[i]), 2); }
  CHECK(psnr(x, ref) == Approx(20 * std::log10(peak / std::sqrt(se / x.size()))).epsilon(1e-12));
  auto xs = x, rs = ref;
  for (auto &v : xs) { v *= 0.25; }
  for (auto &v : rs) { v *= 0.25; }
  CHECK(psnr(xs, rs) == Approx(psnr(x, ref)).epsilon(1e-12));
  CHECK_THROWS_AS(psnr(x, ComplexVolume(x.shape())), ValidationError);
}

TEST_CASE("ssim", "[metrics]")
{
  auto const ref = test::smooth_volume(8, 2);
  auto const x = test::random_volume(Shape3::cube(8), 7);
  CHECK(ssim(ref, ref) == Approx(1.0).epsilon(1e-12));
  auto rot = ref;
  for (auto &v : rot) { v *= std::polar(1.0, 0.7); }
  CHECK(ssim(rot, ref) == Approx(1.0).epsilon(1e-12));
  auto half = ref;
  for (auto &v : half) { v *= 0.5; }
  CHECK(ssim(half, ref) < 1.0);

  CHECK(ssim(x, ref) == Approx(ssim_bruteforce(x, ref, 1.5)).epsilon(1e-10));
  CHECK(ssim(half, ref) == Approx(ssim_bruteforce(half, ref, 1.5)).epsilon(1e-10));
  double const v = ssim(x, ref);
  CHECK((v >= -1.0 && v <= 1.0));
  CHECK(ssim(flipped(x), flipped(ref)) == Approx(v).epsilon(1e-12));
}

TEST_CASE("gaussian smoothing and box sums", "[metrics][filters]")
{
  auto const taps = gaussian_taps(1.5);
  CHECK(taps.size() == 11);
  CHECK(std::accumulate(taps.begin(), taps.end(), 0.0) == Approx(1.0).epsilon(1e-15));
  CHECK(gaussian_taps(0.0) == std::vector<double>{1.0});

  // Renormalized smoothing keeps a constant field constant, zero padding darkens the border.
  RealVolume ones(Shape3{9, 7, 5}, 1.0);
  for (double v : gaussian_smooth(ones, 2.0, Border::renormalize)) { CHECK(v == Approx(1.0).epsilon(1e-12)); }
  auto const padded = gaussian_smooth(ones, 2.0, Border::zero);
  CHECK(padded(0, 0, 0) < padded(4, 3, 2));

  // Box sum against brute force.
  RealVolume v(Shape3{6, 5, 4});
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u;
  for (auto &x : v) { x = u(rng); }
  auto const b = box_sum(v, 1);
  for (int z = 0; z < 4; ++z) {
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 6; ++x) {
        double s = 0.0;
        for (int dz = -1; dz <= 1; ++dz) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              if (v.shape().contains({x + dx, y + dy, z + dz})) { s += v(x + dx, y + dy, z + dz); }
            }
          }
        }
        CHECK(b(x, y, z) == Approx(s).epsilon(1e-12));
      }
    }
  }
  CHECK(box_sum(v, 0) == v);

  // Masked smoothing averages only inside the mask.
  Mask m(v.shape(), 0);
  RealVolume f(v.shape(), 0.0);
  for (std::size_t i = 0; i < v.size(); i += 2) {
    m[i] = 1;
    f[i] = 7.0;
  }
  auto const sm = masked_smooth(f, m, 1.0);
  for (std::size_t i = 0; i < v.size(); ++i) { CHECK(sm[i] == (m[i] ? Approx(7.0).epsilon(1e-12) : Approx(0.0))); }
}

TEST_CASE("iterate_apply", "[metrics]")
{
  auto const v = test::random_volume(Shape3::cube(4), 1);
  // Idempotent mock: zero every voxel with a negative real part.
  auto clamp = [](ComplexVolume const &x) {
    ComplexVolume y = x;
    for (auto &c : y) { c = c.real() < 0.0 ? Cx{} : c; }
    return y;
  };
  auto const r = iterate_apply(clamp, v, 4);
  REQUIRE(r.volumes.size() == 5);
  REQUIRE(r.diff_nrms.size() == 4);
  CHECK(r.diff_nrms[0] == 1.0);
  for (int k = 1; k < 4; ++k) { CHECK(r.diff_nrms[k] == 0.0); }

  auto const geo = iterate_apply([](ComplexVolume const &x) {
    ComplexVolume y = x;
    for (auto &c : y) { c *= 0.5; }
    return y;
  }, v, 3);
  CHECK(geo.diff_nrms[1] == Approx(0.5));
  CHECK(geo.diff_nrms[2] == Approx(0.25));
  CHECK_THROWS_AS(iterate_apply(clamp, v, 1), ValidationError);
}
