#pragma once

#include "error.hpp"
#include "kspace.hpp"
#include "trajectory.hpp"
#include "volume.hpp"

#include <json.hpp>

#include <bit>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace offres::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// Raw array stored as <base>.hdr + <base>.cfl: interleaved float32 (re, im), first dimension fastest.
struct CflArray
{
  std::vector<long> dims;
  std::vector<std::complex<float>> data;
  std::map<std::string, std::string> sections; // extra "# Key" header sections

  std::size_t count() const
  {
    std::size_t n = 1;
    for (long d : dims) { n *= static_cast<std::size_t>(d); }
    return n;
  }
};

/// Accepts "x", "x.cfl" or "x.hdr" and returns "x".
inline fs::path cfl_base(fs::path p)
{
  if (p.extension() == ".cfl" || p.extension() == ".hdr") { p.replace_extension(); }
  return p;
}

inline fs::path with_suffix(fs::path const &base, char const *suffix) { return fs::path(base.string() + suffix); }

inline void ensure_parent(fs::path const &p)
{
  if (p.has_parent_path()) { fs::create_directories(p.parent_path()); }
}

inline void cfl_write(fs::path const &path, CflArray const &a)
{
  require(!a.dims.empty(), "cfl array needs at least one dimension");
  for (long d : a.dims) { require(d >= 1, "cfl dimensions must be >= 1"); }
  require(a.count() == a.data.size(), "cfl data length does not match its dimensions");
  auto const base = cfl_base(path);
  ensure_parent(base);
  {
    std::ofstream h(with_suffix(base, ".hdr"));
    h << "# Dimensions\n";
    for (std::size_t i = 0; i < a.dims.size(); ++i) { h << (i ? " " : "") << a.dims[i]; }
    h << "\n";
    for (auto const &[k, v] : a.sections) { h << "# " << k << "\n" << v << "\n"; }
    if (!h) { throw IoError("cannot write " + with_suffix(base, ".hdr").string()); }
  }
  std::ofstream d(with_suffix(base, ".cfl"), std::ios::binary);
  d.write(reinterpret_cast<char const *>(a.data.data()), static_cast<std::streamsize>(a.data.size() * sizeof(a.data[0])));
  if (!d) { throw IoError("cannot write " + with_suffix(base, ".cfl").string()); }
}

inline CflArray cfl_read(fs::path const &path)
{
  auto const base = cfl_base(path);
  auto const hdr = with_suffix(base, ".hdr"), dat = with_suffix(base, ".cfl");
  std::ifstream h(hdr);
  if (!h) { throw IoError("missing header " + hdr.string()); }
  CflArray a;
  std::string line, key;
  bool have_dims = false;
  while (std::getline(h, line)) {
    if (!line.empty() && line.back() == '\r') { line.pop_back(); }
    if (line.rfind("#", 0) == 0) {
      key = line.substr(1);
      key.erase(0, key.find_first_not_of(' '));
      continue;
    }
    if (key == "Dimensions" && !have_dims) {
      std::istringstream ss(line);
      long d = 0;
      while (ss >> d) {
        if (d < 1) { throw IoError("garbled dimensions in " + hdr.string()); }
        a.dims.push_back(d);
      }
      if (!ss.eof() || a.dims.empty()) { throw IoError("garbled dimensions in " + hdr.string()); }
      have_dims = true;
    } else if (!key.empty() && key != "Dimensions") {
      auto &s = a.sections[key];
      s += (s.empty() ? "" : "\n") + line;
    }
  }
  if (!have_dims) { throw IoError("header " + hdr.string() + " has no dimensions"); }
  std::ifstream d(dat, std::ios::binary | std::ios::ate);
  if (!d) { throw IoError("missing data file " + dat.string()); }
  auto const bytes = static_cast<std::size_t>(d.tellg());
  std::size_t const want = a.count() * sizeof(std::complex<float>);
  if (bytes != want) {
    throw IoError("size mismatch for " + dat.string() + ": header implies " + std::to_string(want) + " bytes, file has " +
                  std::to_string(bytes));
  }
  a.data.resize(a.count());
  d.seekg(0);
  d.read(reinterpret_cast<char *>(a.data.data()), static_cast<std::streamsize>(want));
  if (!d) { throw IoError("short read from " + dat.string()); }
  return a;
}

// ---- volumes -------------------------------------------------------------

inline std::string spacing_str(std::array<double, 3> const &s)
{
  std::ostringstream o;
  o.precision(17);
  o << s[0] << " " << s[1] << " " << s[2];
  return o.str();
}

inline std::array<double, 3> parse_spacing(CflArray const &a)
{
  std::array<double, 3> s{1.0, 1.0, 1.0};
  if (auto it = a.sections.find("Spacing"); it != a.sections.end()) {
    std::istringstream ss(it->second);
    if (!(ss >> s[0] >> s[1] >> s[2])) { throw IoError("garbled spacing section"); }
  }
  return s;
}

inline Shape3 volume_shape(CflArray const &a)
{
  for (std::size_t i = 3; i < a.dims.size(); ++i) {
    if (a.dims[i] != 1) { throw IoError("expected a 3D volume, got a higher-dimensional array"); }
  }
  Shape3 s{1, 1, 1};
  if (a.dims.size() > 0) { s.x = static_cast<int>(a.dims[0]); }
  if (a.dims.size() > 1) { s.y = static_cast<int>(a.dims[1]); }
  if (a.dims.size() > 2) { s.z = static_cast<int>(a.dims[2]); }
  return s;
}

inline void write_volume(fs::path const &path, ComplexVolume const &v)
{
  CflArray a;
  a.dims = {v.shape().x, v.shape().y, v.shape().z};
  a.data.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) { a.data[i] = std::complex<float>(v[i]); }
  a.sections["Spacing"] = spacing_str(v.spacing());
  cfl_write(path, a);
}

inline ComplexVolume read_volume(fs::path const &path)
{
  auto const a = cfl_read(path);
  ComplexVolume v(volume_shape(a), Cx{}, parse_spacing(a));
  for (std::size_t i = 0; i < v.size(); ++i) { v[i] = Cx(a.data[i].real(), a.data[i].imag()); }
  return v;
}

/// Field maps are stored as complex arrays with a zero imaginary part.
inline void write_fieldmap(fs::path const &path, FieldMap const &f)
{
  ComplexVolume v(f.shape(), Cx{}, f.spacing());
  for (std::size_t i = 0; i < f.size(); ++i) { v[i] = f[i]; }
  write_volume(path, v);
}

inline FieldMap read_fieldmap(fs::path const &path)
{
  auto const v = read_volume(path);
  FieldMap f(v.shape(), 0.0, v.spacing());
  for (std::size_t i = 0; i < v.size(); ++i) { f[i] = v[i].real(); }
  return f;
}

// ---- trajectories ----------------------------------------------------------

/// Trajectory <base>.cfl holds a [5, n] array (kx, ky, kz, t, dcf) in the real
/// parts; <base>.json holds grid size, FOV, readout duration and interleaf ids.
inline void write_trajectory(fs::path const &path, ConesTrajectory const &t)
{
  auto const base = cfl_base(path);
  CflArray a;
  a.dims = {5, static_cast<long>(t.size())};
  a.data.resize(5 * t.size());
  for (std::size_t j = 0; j < t.size(); ++j) {
    auto const &k = t.k(j);
    a.data[5 * j + 0] = static_cast<float>(k[0]);
    a.data[5 * j + 1] = static_cast<float>(k[1]);
    a.data[5 * j + 2] = static_cast<float>(k[2]);
    a.data[5 * j + 3] = static_cast<float>(t.t(j));
    a.data[5 * j + 4] = static_cast<float>(t.dcf()[j]);
  }
  cfl_write(base, a);
  json meta;
  meta["grid_size"] = t.grid_size();
  meta["fov_cm"] = t.meta().fov_cm;
  meta["t_read"] = t.t_read();
  meta["n_samples"] = t.size();
  meta["interleaf_counts"] = t.interleaf_counts();
  std::ofstream(with_suffix(base, ".json")) << meta.dump(2) << "\n";
}

inline ConesTrajectory read_trajectory(fs::path const &path)
{
  auto const base = cfl_base(path);
  auto const a = cfl_read(base);
  if (a.dims.size() < 2 || a.dims[0] != 5) { throw IoError("trajectory array must have shape [5, n]"); }
  std::ifstream js(with_suffix(base, ".json"));
  if (!js) { throw IoError("missing trajectory sidecar " + with_suffix(base, ".json").string()); }
  json meta;
  try {
    js >> meta;
  } catch (json::exception const &e) {
    throw IoError("garbled trajectory sidecar: " + std::string(e.what()));
  }
  std::size_t const n = a.count() / 5;
  auto const counts = meta.at("interleaf_counts").get<std::vector<int>>();
  std::vector<KPoint> k(n);
  std::vector<double> tm(n), w(n);
  std::vector<int> il;
  il.reserve(n);
  for (std::size_t i = 0; i < counts.size(); ++i) { il.insert(il.end(), counts[i], static_cast<int>(i)); }
  if (il.size() != n) { throw IoError("interleaf counts do not add up to the sample count"); }
  for (std::size_t j = 0; j < n; ++j) {
    k[j] = {a.data[5 * j].real(), a.data[5 * j + 1].real(), a.data[5 * j + 2].real()};
    tm[j] = a.data[5 * j + 3].real();
    w[j] = a.data[5 * j + 4].real();
  }
  TrajectoryMeta m{meta.at("grid_size").get<int>(), meta.at("fov_cm").get<double>(), meta.at("t_read").get<double>()};
  return ConesTrajectory(m, std::move(k), std::move(tm), std::move(il), std::move(w));
}

// ---- k-space ---------------------------------------------------------------

inline void write_kspace(fs::path const &path, KSpaceData const &ks)
{
  CflArray a;
  a.dims = {1, static_cast<long>(ks.size())};
  a.data.resize(ks.size());
  for (std::size_t j = 0; j < ks.size(); ++j) { a.data[j] = std::complex<float>(ks.values[j]); }
  if (!ks.traj_ref.empty()) { a.sections["Trajectory"] = ks.traj_ref; }
  cfl_write(path, a);
}

inline KSpaceData read_kspace(fs::path const &path)
{
  auto const a = cfl_read(path);
  KSpaceData ks;
  ks.values.resize(a.count());
  for (std::size_t j = 0; j < ks.size(); ++j) { ks.values[j] = Cx(a.data[j].real(), a.data[j].imag()); }
  if (auto it = a.sections.find("Trajectory"); it != a.sections.end()) { ks.traj_ref = it->second; }
  return ks;
}

// ---- small helpers -----------------------------------------------------------

inline json read_json(fs::path const &p)
{
  std::ifstream f(p);
  if (!f) { throw IoError("cannot open " + p.string()); }
  try {
    return json::parse(f);
  } catch (json::exception const &e) {
    throw IoError("invalid JSON in " + p.string() + ": " + e.what());
  }
}

/// Writes via a temporary file and rename so readers never see partial content.
inline void write_text_atomic(fs::path const &p, std::string const &text)
{
  ensure_parent(p);
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    f << text;
    if (!f) { throw IoError("cannot write " + tmp.string()); }
  }
  fs::rename(tmp, p);
}

} // namespace offres::io
