#pragma once

#include "forward.hpp"
#include "io.hpp"
#include "nn/train.hpp"
#include "phantom.hpp"
#include "recon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace offres {

struct CorpusOptions
{
  int n_vessels = 3;
  bool use_fieldmap = false; // spatially varying map during the short-readout simulation
  FieldMapParams fieldmap{};
  int fieldmap_bins = 16;
  GridOptions grid{};
};

/// 101 uniform points over +-500 Hz.
inline std::vector<double> default_corpus_freqs(int n = 101, double f_max = 500.0)
{
  require(n >= 1 && f_max >= 0.0, "frequency grid needs n >= 1 and f_max >= 0");
  if (n == 1) { return {0.0}; }
  std::vector<double> f(n);
  for (int i = 0; i < n; ++i) { f[i] = -f_max + 2.0 * f_max * i / (n - 1); }
  return f;
}

struct PhantomRecord
{
  int phantom_id = 0;
  std::uint64_t seed = 0;
  std::string reference_path;
  std::string kspace_path; // short-readout k-space
};

struct PairRecord
{
  int phantom_id = 0;
  std::uint64_t seed = 0;
  double factor = 1.0;
  double f0_hz = 0.0;
  std::string input_path;
  std::string reference_path;
  std::string traj_path;
};

/// Corpus index. File paths are relative to the manifest's directory.
struct Manifest
{
  std::uint64_t seed = 0;
  std::string short_traj_path;
  std::vector<PhantomRecord> phantoms;
  std::vector<PairRecord> pairs;
};

inline io::json to_json(Manifest const &m)
{
  io::json j;
  j["format"] = "offres-corpus";
  j["version"] = 1;
  j["seed"] = m.seed;
  j["short_traj_path"] = m.short_traj_path;
  j["phantoms"] = io::json::array();
  for (auto const &p : m.phantoms) {
    j["phantoms"].push_back(
      {{"phantom_id", p.phantom_id}, {"seed", p.seed}, {"reference_path", p.reference_path}, {"kspace_path", p.kspace_path}});
  }
  j["pairs"] = io::json::array();
  for (auto const &p : m.pairs) {
    j["pairs"].push_back({{"phantom_id", p.phantom_id},
                          {"seed", p.seed},
                          {"factor", p.factor},
                          {"f0_hz", p.f0_hz},
                          {"input_path", p.input_path},
                          {"reference_path", p.reference_path},
                          {"traj_path", p.traj_path}});
  }
  return j;
}

inline Manifest manifest_from_json(io::json const &j)
{
  try {
    if (j.value("format", "") != "offres-corpus") { throw IoError("not a corpus manifest"); }
    Manifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.short_traj_path = j.value("short_traj_path", "");
    for (auto const &p : j.at("phantoms")) {
      m.phantoms.push_back({p.at("phantom_id").get<int>(), p.at("seed").get<std::uint64_t>(),
                            p.at("reference_path").get<std::string>(), p.value("kspace_path", "")});
    }
    for (auto const &p : j.at("pairs")) {
      m.pairs.push_back({p.at("phantom_id").get<int>(), p.at("seed").get<std::uint64_t>(), p.at("factor").get<double>(),
                         p.at("f0_hz").get<double>(), p.at("input_path").get<std::string>(),
                         p.at("reference_path").get<std::string>(), p.at("traj_path").get<std::string>()});
    }
    return m;
  } catch (io::json::exception const &e) {
    throw IoError(std::string("malformed corpus manifest: ") + e.what());
  }
}

inline void write_manifest(io::fs::path const &path, Manifest const &m)
{
  io::write_text_atomic(path, to_json(m).dump(2) + "\n");
}

inline Manifest read_manifest(io::fs::path const &path) { return manifest_from_json(io::read_json(path)); }

/// Per-phantom seed derived from the corpus seed (splitmix64 finalizer).
inline std::uint64_t phantom_seed(std::uint64_t corpus_seed, int index)
{
  std::uint64_t z = corpus_seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace detail {

inline std::string factor_tag(double factor)
{
  char b[32];
  std::snprintf(b, sizeof b, "x%.3f", factor);
  return b;
}

inline std::string freq_tag(double f)
{
  char b[32];
  std::snprintf(b, sizeof b, "f%+.1f", f);
  return b;
}

} // namespace detail

/*
 * Builds (blurred input, reference) pairs. Per phantom the short-readout
 * k-space is simulated and reconstructed as the reference; then for every
 * readout factor the data are regridded onto the stretched trajectory and for
 * every frequency a global off-resonance is added before reconstruction.
 * The manifest is written last, so an interrupted build leaves no manifest.
 */
inline Manifest build_corpus(int n_phantoms,
                             ConesTrajectory const &traj_short,
                             std::vector<double> const &factors,
                             std::vector<double> const &freqs,
                             std::uint64_t seed,
                             io::fs::path const &out_dir,
                             CorpusOptions const &opt = {})
{
  require(n_phantoms >= 1, "corpus needs at least one phantom");
  require(!factors.empty() && !freqs.empty(), "corpus needs readout factors and frequencies");
  for (double f : factors) { require(f > 0.0 && std::isfinite(f), "readout factors must be positive"); }
  for (double f : freqs) { require(std::isfinite(f), "frequencies must be finite"); }
  Shape3 const shape = Shape3::cube(traj_short.grid_size());

  io::fs::create_directories(out_dir);
  Manifest m;
  m.seed = seed;
  m.short_traj_path = "traj/short";
  io::write_trajectory(out_dir / m.short_traj_path, traj_short);

  std::vector<ConesTrajectory> trajs;
  std::vector<std::string> traj_paths;
  for (double f : factors) {
    trajs.push_back(scale_readout(traj_short, f));
    traj_paths.push_back("traj/" + detail::factor_tag(f));
    io::write_trajectory(out_dir / traj_paths.back(), trajs.back());
  }
  Gridder const plan(traj_short.points(), traj_short.grid_size(), opt.grid);

  for (int i = 0; i < n_phantoms; ++i) {
    std::uint64_t const s = phantom_seed(seed, i);
    char dir[32];
    std::snprintf(dir, sizeof dir, "p%04d", i);
    auto const img = gen_vessel_phantom(shape, opt.n_vessels, s);
    KSpaceData ks;
    if (opt.use_fieldmap) {
      auto const fmap = gen_field_map(shape, opt.fieldmap, s ^ 0x5bd1e995ULL);
      ks = forward_freq_segmented(img, fmap, traj_short, opt.fieldmap_bins, opt.grid);
    } else {
      ks = KSpaceData{plan.forward(img), {}};
    }
    ks.traj_ref = "../" + m.short_traj_path;
    auto const reference = grid_adjoint(plan, ks, traj_short);
    PhantomRecord pr{i, s, std::string(dir) + "/reference", std::string(dir) + "/kspace"};
    io::write_volume(out_dir / pr.reference_path, reference);
    io::write_kspace(out_dir / pr.kspace_path, ks);
    m.phantoms.push_back(pr);

    for (std::size_t a = 0; a < factors.size(); ++a) {
      auto const ks_long = regrid_to_trajectory(ks, traj_short, trajs[a], shape, RegridOptions{opt.grid});
      std::optional<Gridder> own;
      if (!trajs[a].same_positions(traj_short)) { own.emplace(trajs[a].points(), trajs[a].grid_size(), opt.grid); }
      Gridder const &plan_long = own ? *own : plan;
      for (double f0 : freqs) {
        auto const blurred = grid_adjoint(plan_long, add_global_offres(ks_long, trajs[a], f0), trajs[a]);
        PairRecord r{i, s, factors[a], f0, std::string(dir) + "/" + detail::factor_tag(factors[a]) + "_" + detail::freq_tag(f0),
                     pr.reference_path, traj_paths[a]};
        io::write_volume(out_dir / r.input_path, blurred);
        m.pairs.push_back(std::move(r));
      }
    }
  }
  write_manifest(out_dir / "manifest.json", m);
  return m;
}

/// Splits by phantom: round(train_fraction * n) phantoms (at least one per side) go to training.
inline std::pair<Manifest, Manifest> split_manifest(Manifest const &m, double train_fraction, std::uint64_t seed)
{
  require(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must lie in (0, 1)");
  std::vector<int> ids;
  for (auto const &p : m.phantoms) { ids.push_back(p.phantom_id); }
  for (auto const &p : m.pairs) { ids.push_back(p.phantom_id); }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  require(ids.size() >= 2, "split needs at least two phantoms");

  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) { std::swap(ids[i - 1], ids[rng() % i]); }
  auto const n = static_cast<long>(ids.size());
  long const n_train = std::clamp(std::lround(train_fraction * n), 1L, n - 1);
  std::set<int> const train_ids(ids.begin(), ids.begin() + n_train);

  std::pair<Manifest, Manifest> out;
  for (Manifest *part : {&out.first, &out.second}) {
    part->seed = m.seed;
    part->short_traj_path = m.short_traj_path;
  }
  for (auto const &p : m.phantoms) { (train_ids.count(p.phantom_id) ? out.first : out.second).phantoms.push_back(p); }
  for (auto const &p : m.pairs) { (train_ids.count(p.phantom_id) ? out.first : out.second).pairs.push_back(p); }
  return out;
}

/// Loads every pair of a manifest; paths resolve against `root`.
inline std::vector<nn::TrainPair> load_pairs(Manifest const &m, io::fs::path const &root)
{
  std::vector<nn::TrainPair> out;
  out.reserve(m.pairs.size());
  std::map<std::string, ComplexVolume> refs;
  for (auto const &p : m.pairs) {
    auto it = refs.find(p.reference_path);
    if (it == refs.end()) { it = refs.emplace(p.reference_path, io::read_volume(root / p.reference_path)).first; }
    out.push_back({io::read_volume(root / p.input_path), it->second});
  }
  return out;
}

} // namespace offres
