#pragma once

#include "checkpoint.hpp"
#include "patches.hpp"

#include <cstdio>
#include <functional>
#include <sstream>

namespace offres::nn {

struct TrainPair
{
  ComplexVolume input;
  ComplexVolume target;
};

struct EpochStats
{
  int epoch = 0;
  double train_l1 = 0.0;
  double val_l1 = 0.0;
};

struct TrainOptions
{
  int epochs = 8;
  int start_epoch = 0; // numbering offset when resuming
  io::fs::path checkpoint_dir; // empty: no files written
  std::function<void(EpochStats const &)> on_epoch;
};

struct TrainResult
{
  NetParams<float> params;
  std::vector<EpochStats> history;
};

inline std::string history_csv(std::vector<EpochStats> const &h)
{
  std::ostringstream o;
  o.precision(17);
  o << "epoch,train_l1,val_l1\n";
  for (auto const &e : h) { o << e.epoch << "," << e.train_l1 << "," << e.val_l1 << "\n"; }
  return o.str();
}

namespace detail {

struct PatchRef
{
  std::size_t pair;
  Index3 origin;
};

struct PatchSet
{
  std::vector<Tensor<float>> inputs, targets;
  std::vector<PatchRef> refs;
  Shape3 size{};
};

inline PatchSet make_patch_set(std::vector<TrainPair> const &pairs, NetConfig const &cfg)
{
  PatchSet ps;
  ps.size = Shape3::cube(cfg.patch);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    require_same_shape(pairs[i].input.shape(), pairs[i].target.shape(), "training pair");
    ps.inputs.push_back(to_channels<float>(pairs[i].input));
    ps.targets.push_back(to_channels<float>(pairs[i].target));
    for (Index3 o : patch_grid(pairs[i].input.shape(), cfg.patch, cfg.patch_stride)) { ps.refs.push_back({i, o}); }
  }
  return ps;
}

// Fisher-Yates with a raw 64-bit engine so the order does not depend on the
// standard library's distribution implementations.
inline void shuffle(std::vector<std::size_t> &v, std::mt19937_64 &rng)
{
  for (std::size_t i = v.size(); i > 1; --i) { std::swap(v[i - 1], v[rng() % i]); }
}

inline double evaluate(NetParams<float> const &p, PatchSet const &ps)
{
  if (ps.refs.empty()) { return 0.0; }
  double s = 0.0;
  for (auto const &r : ps.refs) {
    auto const y = net_forward(p, crop(ps.inputs[r.pair], r.origin, ps.size));
    s += loss_l1(y, crop(ps.targets[r.pair], r.origin, ps.size));
  }
  return s / ps.refs.size();
}

} // namespace detail

/*
 * Patch-level minibatch training with Adam. Each epoch visits every patch of
 * every training pair once in a seeded random order; validation loss is the
 * mean patch L1 after the epoch. With a checkpoint directory, parameters are
 * saved as epoch_NNN and latest after every epoch together with history.csv.
 */
inline TrainResult train(NetParams<float> params,
                         std::vector<TrainPair> const &train_set,
                         std::vector<TrainPair> const &val_set,
                         TrainOptions const &opt)
{
  require(!train_set.empty(), "training set is empty");
  require(opt.epochs >= 1, "epochs must be >= 1");
  NetConfig const &cfg = params.cfg;
  cfg.validate();
  auto const tr = detail::make_patch_set(train_set, cfg);
  auto const va = detail::make_patch_set(val_set, cfg);

  TrainResult res{std::move(params), {}};
  auto &p = res.params;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(tr.refs.size());
  auto grads = Layers<float>::zeros_like(cfg);
  int const first_epoch = opt.start_epoch;
  for (int e = 0; e < opt.epochs; ++e) {
    double const lr = cfg.learning_rate * std::pow(cfg.lr_decay, first_epoch + e);
    std::iota(order.begin(), order.end(), std::size_t{0});
    detail::shuffle(order, rng);
    double total = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch) {
      std::size_t const b1 = std::min(order.size(), b0 + cfg.batch);
      for (auto &c : grads.conv) {
        c.weight.setZero();
        c.bias.setZero();
      }
      float const w = 1.0f / static_cast<float>(b1 - b0);
      for (std::size_t i = b0; i < b1; ++i) {
        auto const &r = tr.refs[order[i]];
        double const l = net_backward(p, crop(tr.inputs[r.pair], r.origin, tr.size), crop(tr.targets[r.pair], r.origin, tr.size), grads, w);
        require<DivergenceError>(std::isfinite(l), "non-finite training loss at epoch " + std::to_string(e + 1));
        total += l;
      }
      adam_step(p, grads, lr);
    }
    EpochStats st{first_epoch + e + 1, total / order.size(), detail::evaluate(p, va)};
    require<DivergenceError>(std::isfinite(st.val_l1), "non-finite validation loss at epoch " + std::to_string(st.epoch));
    res.history.push_back(st);
    if (!opt.checkpoint_dir.empty()) {
      char stem[32];
      std::snprintf(stem, sizeof stem, "epoch_%03d", st.epoch);
      io::json const extra{{"epoch", st.epoch}, {"train_l1", st.train_l1}, {"val_l1", st.val_l1}};
      save_checkpoint(opt.checkpoint_dir, stem, p, extra);
      save_checkpoint(opt.checkpoint_dir, "latest", p, extra);
      io::write_text_atomic(opt.checkpoint_dir / "history.csv", history_csv(res.history));
    }
    if (opt.on_epoch) { opt.on_epoch(st); }
  }
  return res;
}

inline TrainResult train(NetConfig const &cfg,
                         std::vector<TrainPair> const &train_set,
                         std::vector<TrainPair> const &val_set,
                         TrainOptions const &opt)
{
  return train(net_init<float>(cfg), train_set, val_set, opt);
}

} // namespace offres::nn
