#pragma once

#include "error.hpp"
#include "volume.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace offres {

using KPoint = std::array<double, 3>;

struct TrajectoryMeta
{
  int grid_size = 32;   // N, samples live in [-N/2, N/2]^3
  double fov_cm = 22.0; // isotropic field of view
  double t_read = 1.18e-3;
};

/*
 * Non-Cartesian k-space samples in cycles/FOV with per-sample readout time,
 * interleaf id and density-compensation weight. Interleaves are stored
 * contiguously and each starts at t = 0.
 *
 * Timestamps are kept as base times times a cumulative scale so that
 * stretching the readout twice composes exactly.
 */
class ConesTrajectory
{
public:
  ConesTrajectory() = default;

  ConesTrajectory(TrajectoryMeta meta,
                  std::vector<KPoint> k,
                  std::vector<double> t,
                  std::vector<int> interleaf,
                  std::vector<double> dcf)
    : meta_(meta)
    , k_(std::move(k))
    , base_t_(std::move(t))
    , interleaf_(std::move(interleaf))
    , dcf_(std::move(dcf))
  {
    check_structure();
  }

  std::size_t size() const { return k_.size(); }
  TrajectoryMeta meta() const
  {
    TrajectoryMeta m = meta_;
    m.t_read = meta_.t_read * time_scale_;
    return m;
  }
  int grid_size() const { return meta_.grid_size; }
  double k_max() const { return 0.5 * meta_.grid_size; }
  double t_read() const { return meta_.t_read * time_scale_; }
  double time_scale() const { return time_scale_; }

  KPoint const &k(std::size_t j) const { return k_[j]; }
  std::span<KPoint const> points() const { return k_; }
  double t(std::size_t j) const { return base_t_[j] * time_scale_; }
  std::vector<double> timestamps() const
  {
    std::vector<double> out(base_t_.size());
    for (std::size_t j = 0; j < out.size(); ++j) { out[j] = t(j); }
    return out;
  }
  int interleaf(std::size_t j) const { return interleaf_[j]; }
  std::span<int const> interleaf_index() const { return interleaf_; }
  std::span<double const> dcf() const { return dcf_; }

  void set_dcf(std::vector<double> w)
  {
    require(w.size() == k_.size(), "dcf length does not match sample count");
    for (double x : w) { require(std::isfinite(x) && x >= 0.0, "dcf must be finite and non-negative"); }
    dcf_ = std::move(w);
  }

  ConesTrajectory with_time_scale(double factor) const
  {
    ConesTrajectory out = *this;
    out.time_scale_ = time_scale_ * factor;
    return out;
  }

  /// Number of samples in each interleaf, in storage order.
  std::vector<int> interleaf_counts() const
  {
    std::vector<int> counts;
    for (std::size_t j = 0; j < k_.size(); ++j) {
      if (j == 0 || interleaf_[j] != interleaf_[j - 1]) { counts.push_back(0); }
      ++counts.back();
    }
    return counts;
  }

  /// True when every sample lies inside the k_max sphere (with relative slack).
  bool within_sphere(double rel_tol = 1e-9) const
  {
    double const lim = k_max() * (1.0 + rel_tol);
    return std::all_of(k_.begin(), k_.end(), [&](KPoint const &p) {
      return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) <= lim;
    });
  }

  bool same_positions(ConesTrajectory const &o) const { return meta_.grid_size == o.meta_.grid_size && k_ == o.k_; }

private:
  void check_structure() const
  {
    require(meta_.grid_size >= 8 && meta_.grid_size % 2 == 0, "grid size must be even and >= 8");
    require(meta_.t_read > 0.0, "readout duration must be positive");
    require(base_t_.size() == k_.size() && interleaf_.size() == k_.size() && dcf_.size() == k_.size(),
            "trajectory arrays must have identical lengths");
    double const box = 0.5 * meta_.grid_size * (1.0 + 1e-9);
    for (auto const &p : k_) {
      for (double c : p) { require(std::isfinite(c) && std::abs(c) <= box, "k-space sample outside [-N/2, N/2]"); }
    }
    for (double w : dcf_) { require(std::isfinite(w) && w >= 0.0, "dcf must be finite and non-negative"); }
    for (std::size_t j = 0; j < k_.size(); ++j) {
      bool const first = j == 0 || interleaf_[j] != interleaf_[j - 1];
      if (first) {
        require(base_t_[j] == 0.0, "each interleaf must start at t = 0");
        if (j > 0) { require(interleaf_[j] > interleaf_[j - 1], "interleaves must be stored contiguously"); }
      } else {
        require(base_t_[j] > base_t_[j - 1], "timestamps must increase strictly within an interleaf");
      }
    }
  }

  TrajectoryMeta meta_{};
  std::vector<KPoint> k_;
  std::vector<double> base_t_;
  std::vector<int> interleaf_;
  std::vector<double> dcf_;
  double time_scale_ = 1.0;
};

struct ConesParams
{
  int n_cones = 48;
  int interleaves_per_cone = 6;
  int samples_per_interleaf = 320;
  double t_read = 1.18e-3;
  double twist = 3.0;
  int grid_size = 32;
  double fov_cm = 22.0;
};

namespace detail {

// Dirichlet kernel sin(pi k) / sin(pi k / N) along one axis.
inline double dirichlet(double k, int n)
{
  double const den = std::sin(std::numbers::pi * k / n);
  if (std::abs(den) < 1e-12) { return static_cast<double>(n); }
  return std::sin(std::numbers::pi * k) / den;
}

} // namespace detail

/// Mean of the adjoint reconstruction of an all-ones image's k-space,
/// (1/N^6) sum_j w_j |D(k_j)|^2 evaluated in closed form.
inline double dc_gain(std::span<KPoint const> k, std::span<double const> w, int n)
{
  double const n6 = std::pow(static_cast<double>(n), 6);
  double s = 0.0;
  for (std::size_t j = 0; j < k.size(); ++j) {
    double d = 1.0;
    for (int a = 0; a < 3; ++a) {
      double const x = detail::dirichlet(k[j][a], n);
      d *= x * x;
    }
    s += w[j] * d;
  }
  return s / n6;
}

/// Rescales dcf so that an all-ones image reconstructs with unit mean.
inline std::vector<double> normalize_dcf(std::span<KPoint const> k, std::vector<double> w, int n)
{
  double const g = dc_gain(k, w, n);
  require(g > 0.0 && std::isfinite(g), "dcf has no weight near the k-space origin");
  for (auto &x : w) { x /= g; }
  return w;
}

inline ConesTrajectory generate_cones(ConesParams const &p)
{
  require(p.n_cones >= 1 && p.interleaves_per_cone >= 1, "cone and interleaf counts must be >= 1");
  require(p.samples_per_interleaf >= 3, "samples_per_interleaf must be >= 3");
  require(p.t_read > 0.0, "t_read must be positive");
  require(p.grid_size >= 8 && p.grid_size % 2 == 0, "grid_size must be even and >= 8");
  require(std::isfinite(p.twist), "twist must be finite");
  require(p.fov_cm > 0.0, "fov must be positive");

  double const kmax = 0.5 * p.grid_size;
  double const golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  int const ns = p.samples_per_interleaf;
  std::size_t const total = static_cast<std::size_t>(p.n_cones) * p.interleaves_per_cone * ns;

  std::vector<KPoint> k;
  std::vector<double> t, w;
  std::vector<int> il;
  k.reserve(total);
  t.reserve(total);
  w.reserve(total);
  il.reserve(total);

  int leaf = 0;
  for (int c = 0; c < p.n_cones; ++c) {
    // cos(theta) evenly spaced over [-1 + eps, 1 - eps]; eps = 1/(2 n_cones) keeps the
    // polar caps covered. A single cone sits at 90 degrees.
    double const eps = 0.5 / p.n_cones;
    double const cos_t = p.n_cones == 1 ? 0.0 : -1.0 + eps + c * (2.0 - 2.0 * eps) / (p.n_cones - 1);
    double const sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
    for (int i = 0; i < p.interleaves_per_cone; ++i, ++leaf) {
      double const phi0 = std::fmod(leaf * golden, kTwoPi);
      for (int j = 0; j < ns; ++j) {
        double const frac = static_cast<double>(j) / (ns - 1);
        double const r = j == ns - 1 ? kmax : kmax * frac;
        double const phi = phi0 + kTwoPi * p.twist * frac;
        k.push_back({r * sin_t * std::cos(phi), r * sin_t * std::sin(phi), r * cos_t});
        t.push_back(j == ns - 1 ? p.t_read : p.t_read * frac);
        w.push_back(r * r);
        il.push_back(leaf);
      }
      // The DC sample takes the mean of the interleaf's two smallest nonzero weights.
      std::size_t const base = k.size() - ns;
      w[base] = 0.5 * (w[base + 1] + w[base + 2]);
    }
  }
  w = normalize_dcf(k, std::move(w), p.grid_size);
  return ConesTrajectory(TrajectoryMeta{p.grid_size, p.fov_cm, p.t_read}, std::move(k), std::move(t), std::move(il),
                         std::move(w));
}

inline ConesTrajectory scale_readout(ConesTrajectory const &traj, double factor)
{
  require(factor > 0.0 && std::isfinite(factor), "readout scale factor must be positive");
  return traj.with_time_scale(factor);
}

struct FeasibilityReport
{
  double max_gradient_mT_per_m = 0.0;
  double max_slew_T_per_m_per_s = 0.0;
  bool gradient_ok = true;
  bool slew_ok = true;
  bool feasible() const { return gradient_ok && slew_ok; }
};

inline constexpr double kGammaBarHzPerT = 42.577478518e6;

/// Finite-difference gradient and slew per interleaf.
inline FeasibilityReport check_feasibility(ConesTrajectory const &traj,
                                           double fov_cm,
                                           double gmax_mT_per_m = 40.0,
                                           double smax_T_per_m_per_s = 150.0)
{
  require(fov_cm > 0.0 && gmax_mT_per_m > 0.0 && smax_T_per_m_per_s > 0.0, "physical limits must be positive");
  double const per_m = 100.0 / fov_cm; // cycles/FOV -> cycles/m
  FeasibilityReport rep;
  std::size_t start = 0;
  for (int count : traj.interleaf_counts()) {
    require(count >= 3, "interleaf with fewer than 3 samples cannot be checked");
    std::vector<std::array<double, 3>> g(count - 1);
    std::vector<double> tm(count - 1);
    for (int j = 0; j + 1 < count; ++j) {
      std::size_t const a = start + j, b = a + 1;
      double const dt = traj.t(b) - traj.t(a);
      for (int ax = 0; ax < 3; ++ax) {
        g[j][ax] = (traj.k(b)[ax] - traj.k(a)[ax]) * per_m / dt / kGammaBarHzPerT; // T/m
      }
      tm[j] = 0.5 * (traj.t(a) + traj.t(b));
      double const gn = std::sqrt(g[j][0] * g[j][0] + g[j][1] * g[j][1] + g[j][2] * g[j][2]);
      rep.max_gradient_mT_per_m = std::max(rep.max_gradient_mT_per_m, 1e3 * gn);
    }
    for (int j = 0; j + 1 < count - 1; ++j) {
      double const dt = tm[j + 1] - tm[j];
      double s2 = 0.0;
      for (int ax = 0; ax < 3; ++ax) {
        double const d = (g[j + 1][ax] - g[j][ax]) / dt;
        s2 += d * d;
      }
      rep.max_slew_T_per_m_per_s = std::max(rep.max_slew_T_per_m_per_s, std::sqrt(s2));
    }
    start += count;
  }
  rep.gradient_ok = rep.max_gradient_mT_per_m <= gmax_mT_per_m;
  rep.slew_ok = rep.max_slew_T_per_m_per_s <= smax_T_per_m_per_s;
  return rep;
}

} // namespace offres
