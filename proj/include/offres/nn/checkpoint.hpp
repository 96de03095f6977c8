#pragma once

#include "../io.hpp"
#include "network.hpp"

#include <cstring>
#include <fstream>

namespace offres::nn {

// Checkpoint = <dir>/<stem>.bin (named little-endian float32 tensors) + <dir>/<stem>.json
// (network configuration, optimizer step, tensor index).
//
// Binary layout: "OFFRESNT" magic, uint32 version, uint32 tensor count, then per tensor
// uint32 name length, name bytes, uint32 rank, uint32 dims[rank], float32 values.
// Convolution weights are stored as [cout, cin, kz, ky, kx].

inline constexpr char kCheckpointMagic[8] = {'O', 'F', 'F', 'R', 'E', 'S', 'N', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline io::json config_to_json(NetConfig const &c)
{
  return {{"n_res_blocks", c.n_res_blocks}, {"channels", c.channels},          {"kernel", c.kernel},
          {"global_skip", c.global_skip},   {"learning_rate", c.learning_rate}, {"lr_decay", c.lr_decay}, {"patch", c.patch},
          {"patch_stride", c.patch_stride}, {"batch", c.batch},                 {"seed", c.seed},
          {"output_init_scale", c.output_init_scale}};
}

inline NetConfig config_from_json(io::json const &j)
{
  NetConfig c;
  c.n_res_blocks = j.value("n_res_blocks", c.n_res_blocks);
  c.channels = j.value("channels", c.channels);
  c.kernel = j.value("kernel", c.kernel);
  c.global_skip = j.value("global_skip", c.global_skip);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.patch = j.value("patch", c.patch);
  c.patch_stride = j.value("patch_stride", c.patch_stride);
  c.batch = j.value("batch", c.batch);
  c.seed = j.value("seed", c.seed);
  c.output_init_scale = j.value("output_init_scale", c.output_init_scale);
  return c;
}

namespace detail {

struct NamedTensor
{
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

// Internal weight columns are ordered (dz, ci, dy, dx); files use (ci, dz, dy, dx).
template <typename S>
NamedTensor export_weight(std::string name, Conv3d<S> const &c)
{
  NamedTensor t{std::move(name), {std::uint32_t(c.cout), std::uint32_t(c.cin), std::uint32_t(c.k), std::uint32_t(c.k), std::uint32_t(c.k)}, {}};
  int const k = c.k, k2 = k * k;
  t.values.resize(c.weight.size());
  for (int co = 0; co < c.cout; ++co) {
    for (int ci = 0; ci < c.cin; ++ci) {
      for (int dz = 0; dz < k; ++dz) {
        for (int r = 0; r < k2; ++r) {
          std::size_t const file = ((static_cast<std::size_t>(co) * c.cin + ci) * k + dz) * k2 + r;
          t.values[file] = static_cast<float>(c.weight(co, (dz * c.cin + ci) * k2 + r));
        }
      }
    }
  }
  return t;
}

template <typename S>
void import_weight(NamedTensor const &t, Conv3d<S> &c)
{
  std::vector<std::uint32_t> const want{std::uint32_t(c.cout), std::uint32_t(c.cin), std::uint32_t(c.k), std::uint32_t(c.k), std::uint32_t(c.k)};
  if (t.dims != want) { throw IoError("checkpoint tensor " + t.name + " has unexpected shape"); }
  int const k = c.k, k2 = k * k;
  for (int co = 0; co < c.cout; ++co) {
    for (int ci = 0; ci < c.cin; ++ci) {
      for (int dz = 0; dz < k; ++dz) {
        for (int r = 0; r < k2; ++r) {
          std::size_t const file = ((static_cast<std::size_t>(co) * c.cin + ci) * k + dz) * k2 + r;
          c.weight(co, (dz * c.cin + ci) * k2 + r) = static_cast<S>(t.values[file]);
        }
      }
    }
  }
}

template <typename S>
NamedTensor export_bias(std::string name, Conv3d<S> const &c)
{
  NamedTensor t{std::move(name), {std::uint32_t(c.cout)}, std::vector<float>(c.cout)};
  for (int i = 0; i < c.cout; ++i) { t.values[i] = static_cast<float>(c.bias[i]); }
  return t;
}

template <typename S>
void import_bias(NamedTensor const &t, Conv3d<S> &c)
{
  if (t.dims != std::vector<std::uint32_t>{std::uint32_t(c.cout)}) {
    throw IoError("checkpoint tensor " + t.name + " has unexpected shape");
  }
  for (int i = 0; i < c.cout; ++i) { c.bias[i] = static_cast<S>(t.values[i]); }
}

template <typename T>
void put(std::ostream &o, T v)
{
  o.write(reinterpret_cast<char const *>(&v), sizeof(T));
}

template <typename T>
T get(std::istream &in)
{
  T v{};
  in.read(reinterpret_cast<char *>(&v), sizeof(T));
  if (!in) { throw IoError("truncated checkpoint"); }
  return v;
}

template <typename S>
std::vector<NamedTensor> export_all(NetParams<S> const &p)
{
  std::vector<NamedTensor> out;
  auto const names = p.layers.names();
  struct Group
  {
    char const *prefix;
    Layers<S> const *layers;
  };
  for (Group g : {Group{"", &p.layers}, Group{"adam.m.", &p.adam.m}, Group{"adam.v.", &p.adam.v}}) {
    for (std::size_t l = 0; l < names.size(); ++l) {
      out.push_back(export_weight(g.prefix + names[l] + ".weight", g.layers->conv[l]));
      out.push_back(export_bias(g.prefix + names[l] + ".bias", g.layers->conv[l]));
    }
  }
  return out;
}

} // namespace detail

template <typename S>
void save_checkpoint(io::fs::path const &dir, std::string const &stem, NetParams<S> const &p, io::json extra = {})
{
  io::fs::create_directories(dir);
  auto const tensors = detail::export_all(p);
  auto const bin = dir / (stem + ".bin");
  auto const tmp = dir / (stem + ".bin.tmp");
  {
    std::ofstream o(tmp, std::ios::binary);
    o.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::put<std::uint32_t>(o, kCheckpointVersion);
    detail::put<std::uint32_t>(o, static_cast<std::uint32_t>(tensors.size()));
    for (auto const &t : tensors) {
      detail::put<std::uint32_t>(o, static_cast<std::uint32_t>(t.name.size()));
      o.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      detail::put<std::uint32_t>(o, static_cast<std::uint32_t>(t.dims.size()));
      for (auto d : t.dims) { detail::put<std::uint32_t>(o, d); }
      o.write(reinterpret_cast<char const *>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(float)));
    }
    if (!o) { throw IoError("cannot write " + tmp.string()); }
  }
  io::fs::rename(tmp, bin);

  io::json j;
  j["format"] = "offres-checkpoint";
  j["version"] = kCheckpointVersion;
  j["tensor_file"] = stem + ".bin";
  j["config"] = config_to_json(p.cfg);
  j["adam_step"] = p.adam.step;
  io::json index = io::json::array();
  for (auto const &t : tensors) { index.push_back({{"name", t.name}, {"shape", t.dims}}); }
  j["tensors"] = index;
  if (!extra.is_null()) { j["extra"] = std::move(extra); }
  io::write_text_atomic(dir / (stem + ".json"), j.dump(2) + "\n");
}

/// Loads a checkpoint given its manifest path (<dir>/<stem>.json).
template <typename S = float>
NetParams<S> load_checkpoint(io::fs::path const &manifest)
{
  auto const j = io::read_json(manifest);
  if (j.value("format", "") != "offres-checkpoint") { throw IoError(manifest.string() + " is not a checkpoint manifest"); }
  NetConfig const cfg = config_from_json(j.at("config"));
  cfg.validate();
  NetParams<S> p{cfg, Layers<S>::zeros_like(cfg), {Layers<S>::zeros_like(cfg), Layers<S>::zeros_like(cfg), 0}};
  p.adam.step = j.value("adam_step", std::int64_t{0});

  auto const bin = manifest.parent_path() / j.at("tensor_file").get<std::string>();
  std::ifstream in(bin, std::ios::binary);
  if (!in) { throw IoError("missing tensor file " + bin.string()); }
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) { throw IoError(bin.string() + " has a bad magic number"); }
  if (detail::get<std::uint32_t>(in) != kCheckpointVersion) { throw IoError("unsupported checkpoint version"); }
  auto const count = detail::get<std::uint32_t>(in);
  std::map<std::string, detail::NamedTensor> byname;
  for (std::uint32_t i = 0; i < count; ++i) {
    detail::NamedTensor t;
    t.name.resize(detail::get<std::uint32_t>(in));
    in.read(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    t.dims.resize(detail::get<std::uint32_t>(in));
    std::size_t n = 1;
    for (auto &d : t.dims) { n *= d = detail::get<std::uint32_t>(in); }
    t.values.resize(n);
    in.read(reinterpret_cast<char *>(t.values.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) { throw IoError("truncated checkpoint tensor " + t.name); }
    byname.emplace(t.name, std::move(t));
  }
  auto const names = p.layers.names();
  auto fetch = [&](std::string const &name) -> detail::NamedTensor const & {
    auto it = byname.find(name);
    if (it == byname.end()) { throw IoError("checkpoint lacks tensor " + name); }
    return it->second;
  };
  struct Group
  {
    char const *prefix;
    Layers<S> *layers;
  };
  for (Group g : {Group{"", &p.layers}, Group{"adam.m.", &p.adam.m}, Group{"adam.v.", &p.adam.v}}) {
    for (std::size_t l = 0; l < names.size(); ++l) {
      detail::import_weight(fetch(g.prefix + names[l] + ".weight"), g.layers->conv[l]);
      detail::import_bias(fetch(g.prefix + names[l] + ".bias"), g.layers->conv[l]);
    }
  }
  return p;
}

} // namespace offres::nn
