// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. `acceptance 4 5` runs only criteria 4 and 5.

#include "gradcheck.hpp"
#include "support.hpp"

#include <offres/autofocus.hpp>
#include <offres/dataset.hpp>
#include <offres/dcf.hpp>
#include <offres/evaluation.hpp>
#include <offres/forward.hpp>
#include <offres/parallel.hpp>
#include <offres/phantom.hpp>
#include <offres/recon.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>

using namespace offres;
namespace fs = std::filesystem;

namespace {

struct Outcome
{
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double rel_diff(std::span<Cx const> a, std::span<Cx const> b)
{
  double n = 0.0, d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    n += std::norm(a[i] - b[i]);
    d += std::norm(b[i]);
  }
  return std::sqrt(n / d);
}

double l2(std::span<Cx const> a)
{
  double s = 0.0;
  for (Cx v : a) { s += std::norm(v); }
  return std::sqrt(s);
}

KSpaceData random_kspace(std::size_t n, unsigned seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  KSpaceData ks;
  ks.values.resize(n);
  for (auto &v : ks.values) { v = {nd(rng), nd(rng)}; }
  return ks;
}

std::string fmt(char const *f, auto... args)
{
  char b[512];
  std::snprintf(b, sizeof b, f, args...);
  return b;
}

std::string slurp(fs::path const &p)
{
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

ConesTrajectory const &cones32()
{
  static ConesTrajectory const t = refine_dcf_pipemenon(generate_cones(ConesParams{}));
  return t;
}

ConesTrajectory const &cones16()
{
  static ConesTrajectory const t = generate_cones(test::small_cones());
  return t;
}

// Readout durations of the 3x3 PSF grid and the long-readout evaluation.
constexpr double kShortRead = 1.18e-3;
constexpr double kLongFactor = 3.35e-3 / kShortRead;

// ---- 1-6: component properties ---------------------------------------------------

Outcome gridding_fidelity()
{
  auto const &traj = cones16();
  Shape3 const s = Shape3::cube(16);
  auto const ks = random_kspace(traj.size(), 3);
  auto const fast = grid_adjoint(ks, traj, s, GridOptions{2.0, 4.0});
  auto const slow = naive_adjoint_oracle(ks, traj, s);
  double const err = rel_diff(fast.values(), slow.values());

  auto const x = test::random_volume(s, 5);
  auto const y = random_kspace(traj.size(), 6);
  auto const fx = grid_forward(x, traj, GridOptions{2.0, 4.0});
  auto const ay = grid_adjoint(y, traj, s, GridOptions{2.0, 4.0}, AdjointFlags{false, false});
  Cx const lhs = test::inner(fx.values, y.values), rhs = test::inner(x.values(), ay.values());
  double const adj = std::abs(lhs - rhs) / (l2(fx.values) * l2(y.values));
  return {err < 5e-3 && adj < 1e-2, fmt("adjoint vs oracle rel L2 %.2e (< 5e-3), adjointness %.2e (< 1e-2)", err, adj)};
}

Outcome phase_identities()
{
  auto const &traj = cones16();
  auto const ks = random_kspace(traj.size(), 9);
  double worst_demod = 0.0;
  for (double f : {-1000.0, -333.0, 125.0, 500.0, 997.0}) {
    worst_demod = std::max(worst_demod, rel_diff(demodulate_global(add_global_offres(ks, traj, f), traj, f).values, ks.values));
  }
  Shape3 const s = Shape3::cube(16);
  auto const img = gen_vessel_phantom(s, 2, 4);
  auto const base = forward_exact(img, constant_field_map(s, 0.0), traj);
  double worst_fact = 0.0;
  for (double f : {-430.0, 1000.0}) {
    auto const direct = forward_exact(img, constant_field_map(s, f), traj);
    worst_fact = std::max(worst_fact, rel_diff(direct.values, add_global_offres(base, traj, f).values));
  }
  return {worst_demod <= 1e-12 && worst_fact <= 1e-10,
          fmt("demodulate o inject %.2e (<= 1e-12), global-phase factorization %.2e (<= 1e-10)", worst_demod, worst_fact)};
}

Outcome segmentation_convergence()
{
  auto const &traj = cones16();
  Shape3 const s = Shape3::cube(16);
  auto const img = gen_vessel_phantom(s, 2, 3);
  auto const fmap = gen_field_map(s, 250.0, 4, 3);
  auto const exact = forward_exact(img, fmap, traj);
  std::vector<double> err;
  for (int nb : {2, 4, 8, 16}) { err.push_back(rel_diff(forward_freq_segmented(img, fmap, traj, nb).values, exact.values)); }
  bool ok = err.back() < 1e-2;
  for (std::size_t i = 1; i < err.size(); ++i) { ok = ok && err[i] < err[i - 1]; }
  return {ok, fmt("rel error for 2/4/8/16 bins: %.2e %.2e %.2e %.2e (strictly decreasing, last < 1e-2)", err[0], err[1], err[2], err[3])};
}

Outcome psf_monotonicity()
{
  Shape3 const s = Shape3::cube(32);
  Index3 const c{16, 16, 16};
  double const factors[] = {1.0, 2.0, kLongFactor};
  double const freqs[] = {0.0, 250.0, 500.0};
  double r[3][3];
  for (int a = 0; a < 3; ++a) {
    auto const traj = scale_readout(cones32(), factors[a]);
    for (int b = 0; b < 3; ++b) { r[a][b] = energy_radius(psf_local(traj, c, freqs[b], s), c); }
  }
  bool ok = true;
  std::string grid;
  for (int a = 0; a < 3; ++a) {
    grid += fmt("%sT=%.2fms:", a ? " | " : "", 1e3 * kShortRead * factors[a]);
    for (int b = 0; b < 3; ++b) {
      grid += fmt(" %.2f", r[a][b]);
      if (b > 0) { ok = ok && r[a][b] >= r[a][b - 1]; }
      if (a > 0) { ok = ok && r[a][b] >= r[a - 1][b]; }
    }
  }
  return {ok, "r90 over f0 = 0/250/500 Hz, " + grid};
}

Outcome autofocus_recovery()
{
  auto const traj = scale_readout(cones32(), kLongFactor);
  Shape3 const s = Shape3::cube(32);
  auto const ks0 = grid_forward(gen_vessel_phantom(s, 3, 21), traj);
  auto const ref = grid_adjoint(ks0, traj, s);
  AutofocusConfig const cfg;
  double const spacing = (cfg.f_max - cfg.f_min) / (cfg.n_freqs - 1);
  bool ok = cfg.n_freqs == 41 && cfg.f_min == -1000.0 && cfg.f_max == 1000.0;
  std::string detail;
  for (double f0 : {-400.0, -200.0, 0.0, 200.0, 400.0}) {
    auto const ks = add_global_offres(ks0, traj, f0);
    auto const res = autofocus_correct(ks, traj, s, cfg);
    std::vector<double> est;
    for (std::size_t i = 0; i < res.fieldmap.size(); ++i) {
      if (res.signal[i]) { est.push_back(res.fieldmap[i]); }
    }
    std::nth_element(est.begin(), est.begin() + est.size() / 2, est.end());
    double const median = est[est.size() / 2];
    double const corrected = nrmse(res.image, ref), plain = nrmse(grid_adjoint(ks, traj, s), ref);
    ok = ok && std::abs(median - f0) <= spacing;
    if (f0 != 0.0) { ok = ok && corrected < plain; }
    detail += fmt("%s%+.0fHz: median %+.0f, nrmse %.3f vs %.3f", detail.empty() ? "" : "; ", f0, median, corrected, plain);
  }
  return {ok, detail};
}

Outcome gradient_check()
{
  auto const r = test::gradient_check(test::tiny_net_config());
  return {r.max_rel_error < 1e-4 && r.checked > 0,
          fmt("max rel error %.2e over %zu coordinates (%zu kink-adjacent skipped), limit 1e-4", r.max_rel_error, r.checked, r.skipped)};
}

// ---- 7-9: trained corrector ---------------------------------------------------------

struct PipelineConfig
{
  int n_phantoms = 7;
  double train_fraction = 5.0 / 7.0;
  std::vector<double> factors{1.5, 2.0, 2.5, 3.0};
  int n_freqs = 11;
  double f_max = 500.0;
  std::uint64_t seed = 2024;
  int epochs = 12;
  nn::NetConfig net = [] {
    nn::NetConfig c;
    c.channels = 32;
    c.n_res_blocks = 3;
    c.kernel = 3;
    c.learning_rate = 1e-3;
    c.lr_decay = 0.85;
    c.patch = 16;
    c.patch_stride = 16;
    c.seed = 7;
    return c;
  }();
};

struct PipelineRun
{
  Manifest manifest, train, test;
  fs::path root;
  nn::TrainResult trained;
  double seconds = 0.0;
};

PipelineRun run_pipeline(PipelineConfig const &pc, fs::path const &root)
{
  auto const t0 = Clock::now();
  fs::remove_all(root);
  PipelineRun run;
  run.root = root;
  run.manifest = build_corpus(pc.n_phantoms, cones32(), pc.factors, default_corpus_freqs(pc.n_freqs, pc.f_max), pc.seed, root);
  std::tie(run.train, run.test) = split_manifest(read_manifest(root / "manifest.json"), pc.train_fraction, pc.seed);
  write_manifest(root / "train.json", run.train);
  write_manifest(root / "test.json", run.test);
  std::fprintf(stderr, "corpus: %zu pairs (%zu train) in %.0f s\n", run.manifest.pairs.size(), run.train.pairs.size(), seconds_since(t0));

  nn::TrainOptions opt;
  opt.epochs = pc.epochs;
  opt.checkpoint_dir = root / "checkpoints";
  opt.on_epoch = [t0](nn::EpochStats const &e) {
    std::fprintf(stderr, "epoch %d: train L1 %.6f, val L1 %.6f (%.0f s)\n", e.epoch, e.train_l1, e.val_l1, seconds_since(t0));
  };
  run.trained = nn::train(pc.net, load_pairs(run.train, root), load_pairs(run.test, root), opt);
  run.seconds = seconds_since(t0);
  return run;
}

struct SweepSummary
{
  std::map<double, std::map<std::string, std::pair<double, double>>> mean; // f -> method -> (nrmse, ssim)
};

Outcome heldout_sweep(PipelineConfig const &pc, PipelineRun const &run)
{
  auto const traj = scale_readout(cones32(), kLongFactor);
  auto const freqs = default_corpus_freqs(pc.n_freqs, pc.f_max);
  SweepSummary sum;
  double const w = 1.0 / run.test.phantoms.size();
  for (auto const &ph : run.test.phantoms) {
    auto const ks = io::read_kspace(run.root / ph.kspace_path);
    auto const rows = sweep_eval(ks, traj, {corrector_none(), corrector_net(run.trained.params)}, freqs,
                                 run.root / ("sweep_p" + std::to_string(ph.phantom_id) + ".csv"));
    for (auto const &r : rows) {
      auto &m = sum.mean[r.f_hz][r.method];
      m.first += w * r.nrmse;
      m.second += w * r.ssim;
    }
  }
  bool ok = run.train.pairs.size() >= 200 && pc.epochs >= 4 && freqs.size() >= 11;
  int checked = 0;
  std::string detail;
  for (auto const &[f, m] : sum.mean) {
    auto const &none = m.at("none");
    auto const &net = m.at("net");
    if (std::abs(f) >= 100.0 - 1e-9) {
      ++checked;
      ok = ok && net.first < none.first && net.second > none.second;
    }
    detail += fmt("%s%+.0f: %.3f/%.3f vs %.3f/%.3f", detail.empty() ? "" : "; ", f, net.first, net.second, none.first, none.second);
  }
  ok = ok && checked >= 10;
  return {ok, fmt("%zu train pairs, %d epochs, %zu held-out phantoms at T=3.35ms; net vs none NRMSE/SSIM per f: ", run.train.pairs.size(),
                  pc.epochs, run.test.phantoms.size()) +
                detail};
}

Outcome iterate_stability(PipelineRun const &run)
{
  auto const traj = scale_readout(cones32(), kLongFactor);
  auto const &ph = run.test.phantoms.front();
  auto const ks = add_global_offres(io::read_kspace(run.root / ph.kspace_path), traj, 300.0);
  auto const blurred = grid_adjoint(ks, traj, Shape3::cube(traj.grid_size()));
  auto const t0 = Clock::now();
  auto const r = iterate_apply(run.trained.params, blurred, 4);
  double const secs = seconds_since(t0);
  bool ok = secs < 60.0;
  for (std::size_t k = 1; k < r.diff_nrms.size(); ++k) { ok = ok && r.diff_nrms[k] <= 0.10; }
  return {ok, fmt("diff norms relative to the first: %.4f %.4f %.4f %.4f (k >= 2 must be <= 0.10), %.1f s", r.diff_nrms[0], r.diff_nrms[1],
                  r.diff_nrms[2], r.diff_nrms[3], secs)};
}

Outcome determinism(PipelineConfig const &pc, PipelineRun const &first, fs::path const &root)
{
  auto const second = run_pipeline(pc, root);
  bool same_files = slurp(first.root / "manifest.json") == slurp(second.root / "manifest.json") &&
                    slurp(first.root / "train.json") == slurp(second.root / "train.json");
  for (auto const &p : first.manifest.pairs) {
    same_files = same_files && slurp(first.root / (p.input_path + ".cfl")) == slurp(second.root / (p.input_path + ".cfl"));
  }
  double worst = 0.0;
  bool same_len = first.trained.history.size() == second.trained.history.size();
  for (std::size_t e = 0; same_len && e < first.trained.history.size(); ++e) {
    worst = std::max({worst, std::abs(first.trained.history[e].train_l1 - second.trained.history[e].train_l1),
                      std::abs(first.trained.history[e].val_l1 - second.trained.history[e].val_l1)});
  }
  return {same_files && same_len && worst <= 1e-10,
          fmt("manifests and %zu input volumes %s; max loss-history difference %.1e (<= 1e-10)", first.manifest.pairs.size(),
              same_files ? "bit-identical" : "DIFFER", worst)};
}

} // namespace

int main(int argc, char **argv)
{
  set_threads(1);
  std::set<int> only;
  for (int i = 1; i < argc; ++i) { only.insert(std::atoi(argv[i])); }
  auto want = [&](int id) { return only.empty() || only.count(id) > 0; };

  int failures = 0;
  auto report = [&](int id, char const *name, double limit_s, auto &&fn) {
    if (!want(id)) { return; }
    auto const t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (std::exception const &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double const secs = seconds_since(t0);
    bool const in_time = limit_s <= 0.0 || secs <= limit_s;
    bool const pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("[%s] criterion %d (%s): %s; %.1f s%s\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
                in_time ? "" : " (over the time limit)");
    std::fflush(stdout);
  };

  report(1, "gridding fidelity", 10.0, gridding_fidelity);
  report(2, "phase identities", 5.0, phase_identities);
  report(3, "frequency-segmentation convergence", 60.0, segmentation_convergence);
  report(4, "PSF monotonicity", 300.0, psf_monotonicity);
  report(5, "autofocus recovery", 600.0, autofocus_recovery);
  report(6, "network gradient check", 120.0, gradient_check);

  if (want(7) || want(8) || want(9)) {
    PipelineConfig const pc;
    auto const base = fs::temp_directory_path() / "offres_acceptance";
    std::optional<PipelineRun> run;
    std::string error;
    try {
      run = run_pipeline(pc, base / "run1");
    } catch (std::exception const &e) {
      error = e.what();
    }
    auto guarded = [&](auto &&fn) {
      return [&, fn]() -> Outcome {
        if (!run) { return {false, "pipeline failed: " + error}; }
        return fn();
      };
    };
    report(7, "held-out frequency sweep", 0.0, guarded([&] { return heldout_sweep(pc, *run); }));
    report(8, "iterated application", 60.0, guarded([&] { return iterate_stability(*run); }));
    report(9, "determinism", 0.0, guarded([&] { return determinism(pc, *run, base / "run2"); }));
    fs::remove_all(base);
  }
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
