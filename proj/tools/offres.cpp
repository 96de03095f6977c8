// Command-line front end: one binary, one subcommand per pipeline stage.
// Every stage reads and writes files only, so any stage can be rerun alone.

#include <offres/autofocus.hpp>
#include <offres/config.hpp>
#include <offres/dataset.hpp>
#include <offres/dcf.hpp>
#include <offres/evaluation.hpp>
#include <offres/forward.hpp>
#include <offres/io.hpp>
#include <offres/nn/train.hpp>
#include <offres/parallel.hpp>
#include <offres/phantom.hpp>
#include <offres/recon.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>

using namespace offres;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Globals
{
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  json cfg = json::object();

  void load()
  {
    if (!config_path.empty()) {
      cfg = io::read_json(config_path);
      config::validate(cfg, config::pipeline_schema());
    }
    if (auto t = threads ? threads : (cfg.contains("threads") ? std::optional<int>(cfg["threads"].get<int>()) : std::nullopt)) {
      set_threads(*t);
    }
  }

  std::uint64_t seed_value() const { return seed ? *seed : config::get_or<std::uint64_t>(cfg, "/seed", 0); }

  template <typename T>
  T pick(std::optional<T> const &flag, char const *pointer, T fallback) const
  {
    return flag ? *flag : config::get_or<T>(cfg, pointer, fallback);
  }
};

Globals g;

void print_json(json const &j) { std::cout << j.dump() << "\n"; }

GridOptions grid_options()
{
  GridOptions o;
  o.oversamp = config::get_or(g.cfg, "/grid/oversamp", o.oversamp);
  o.kernel_width = config::get_or(g.cfg, "/grid/kernel_width", o.kernel_width);
  return o;
}

AutofocusConfig autofocus_config()
{
  AutofocusConfig c;
  c.f_min = config::get_or(g.cfg, "/autofocus/f_min", c.f_min);
  c.f_max = config::get_or(g.cfg, "/autofocus/f_max", c.f_max);
  c.n_freqs = config::get_or(g.cfg, "/autofocus/n_freqs", c.n_freqs);
  c.metric_window = config::get_or(g.cfg, "/autofocus/metric_window", c.metric_window);
  c.lowpass_sigma = config::get_or(g.cfg, "/autofocus/lowpass_sigma", c.lowpass_sigma);
  c.fieldmap_smooth_sigma = config::get_or(g.cfg, "/autofocus/fieldmap_smooth_sigma", c.fieldmap_smooth_sigma);
  c.mask_fraction = config::get_or(g.cfg, "/autofocus/mask_fraction", c.mask_fraction);
  c.max_resident = config::get_or(g.cfg, "/autofocus/max_resident", c.max_resident);
  c.grid = grid_options();
  return c;
}

nn::NetConfig net_config()
{
  nn::NetConfig c;
  c.n_res_blocks = config::get_or(g.cfg, "/network/n_res_blocks", c.n_res_blocks);
  c.channels = config::get_or(g.cfg, "/network/channels", c.channels);
  c.kernel = config::get_or(g.cfg, "/network/kernel", c.kernel);
  c.global_skip = config::get_or(g.cfg, "/network/global_skip", c.global_skip);
  c.learning_rate = config::get_or(g.cfg, "/network/learning_rate", c.learning_rate);
  c.lr_decay = config::get_or(g.cfg, "/network/lr_decay", c.lr_decay);
  c.patch = config::get_or(g.cfg, "/network/patch", c.patch);
  c.patch_stride = config::get_or(g.cfg, "/network/patch_stride", c.patch_stride);
  c.batch = config::get_or(g.cfg, "/network/batch", c.batch);
  c.output_init_scale = config::get_or(g.cfg, "/network/output_init_scale", c.output_init_scale);
  c.seed = g.seed_value();
  return c;
}

FieldMapParams fieldmap_params(std::optional<double> f_max, std::optional<int> blobs)
{
  FieldMapParams p;
  p.f_max = g.pick(f_max, "/fieldmap/f_max", p.f_max);
  p.n_blobs = g.pick(blobs, "/fieldmap/n_blobs", p.n_blobs);
  p.ramp = config::get_or(g.cfg, "/fieldmap/ramp", p.ramp);
  p.min_width = config::get_or(g.cfg, "/fieldmap/min_width", p.min_width);
  p.max_width = config::get_or(g.cfg, "/fieldmap/max_width", p.max_width);
  return p;
}

std::vector<double> parse_list(std::string const &s)
{
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) { throw std::invalid_argument(item); }
    } catch (std::exception const &) {
      throw ValidationError("cannot parse number '" + item + "'");
    }
  }
  return out;
}

std::vector<std::string> parse_words(std::string const &s)
{
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) { out.push_back(item); }
  return out;
}

Index3 parse_index(std::string const &s, Shape3 shape)
{
  if (s.empty()) { return {shape.x / 2, shape.y / 2, shape.z / 2}; }
  auto const v = parse_list(s);
  require(v.size() == 3, "location needs three comma-separated integers");
  return {static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2])};
}

json traj_summary(ConesTrajectory const &t)
{
  return {{"n_samples", t.size()}, {"grid_size", t.grid_size()}, {"t_read", t.t_read()}, {"n_interleaves", t.interleaf_counts().size()}};
}

// ---- traj ------------------------------------------------------------------

void add_traj(CLI::App &app)
{
  auto *traj = app.add_subcommand("traj", "Cones trajectories")->require_subcommand(1);

  {
    auto *c = traj->add_subcommand("gen", "Generate a cones trajectory");
    struct Opt
    {
      std::string out, dcf;
      std::optional<int> n_cones, interleaves, samples, grid, iterations;
      std::optional<double> t_read, twist, fov;
    };
    auto o = std::make_shared<Opt>();
    c->add_option("--out", o->out, "Output base path")->required();
    c->add_option("--n-cones", o->n_cones);
    c->add_option("--interleaves", o->interleaves, "Interleaves per cone");
    c->add_option("--samples", o->samples, "Samples per interleaf");
    c->add_option("--t-read", o->t_read, "Readout duration [s]");
    c->add_option("--twist", o->twist);
    c->add_option("--grid", o->grid, "Matrix size N");
    c->add_option("--fov", o->fov, "Field of view [cm]");
    c->add_option("--dcf", o->dcf, "analytic or pipemenon")->check(CLI::IsMember({"analytic", "pipemenon"}));
    c->add_option("--dcf-iterations", o->iterations);
    c->callback([o] {
      ConesParams p;
      p.n_cones = g.pick(o->n_cones, "/trajectory/n_cones", p.n_cones);
      p.interleaves_per_cone = g.pick(o->interleaves, "/trajectory/interleaves_per_cone", p.interleaves_per_cone);
      p.samples_per_interleaf = g.pick(o->samples, "/trajectory/samples_per_interleaf", p.samples_per_interleaf);
      p.t_read = g.pick(o->t_read, "/trajectory/t_read", p.t_read);
      p.twist = g.pick(o->twist, "/trajectory/twist", p.twist);
      p.grid_size = g.pick(o->grid, "/trajectory/grid_size", p.grid_size);
      p.fov_cm = g.pick(o->fov, "/trajectory/fov_cm", p.fov_cm);
      std::string const dcf = o->dcf.empty() ? config::get_or<std::string>(g.cfg, "/trajectory/dcf", "pipemenon") : o->dcf;
      auto t = generate_cones(p);
      if (dcf == "pipemenon") {
        DcfOptions d;
        d.iterations = g.pick(o->iterations, "/trajectory/dcf_iterations", d.iterations);
        t = refine_dcf_pipemenon(t, d);
      }
      io::write_trajectory(o->out, t);
      print_json(traj_summary(t));
    });
  }
  {
    auto *c = traj->add_subcommand("scale", "Stretch the readout duration by a factor");
    auto in = std::make_shared<std::string>(), out = std::make_shared<std::string>();
    auto factor = std::make_shared<double>(1.0);
    c->add_option("--in", *in)->required();
    c->add_option("--out", *out)->required();
    c->add_option("--factor", *factor)->required();
    c->callback([=] {
      auto const t = scale_readout(io::read_trajectory(*in), *factor);
      io::write_trajectory(*out, t);
      print_json(traj_summary(t));
    });
  }
  {
    auto *c = traj->add_subcommand("dcf", "Refine the density compensation (Pipe-Menon)");
    auto in = std::make_shared<std::string>(), out = std::make_shared<std::string>();
    auto it = std::make_shared<std::optional<int>>();
    c->add_option("--in", *in)->required();
    c->add_option("--out", *out)->required();
    c->add_option("--iterations", *it);
    c->callback([=] {
      DcfOptions d;
      d.iterations = g.pick(*it, "/trajectory/dcf_iterations", d.iterations);
      auto const t = refine_dcf_pipemenon(io::read_trajectory(*in), d);
      io::write_trajectory(*out, t);
      print_json(traj_summary(t));
    });
  }
  {
    auto *c = traj->add_subcommand("check", "Gradient and slew feasibility");
    auto in = std::make_shared<std::string>();
    auto gmax = std::make_shared<double>(40.0), smax = std::make_shared<double>(150.0);
    c->add_option("--in", *in)->required();
    c->add_option("--gmax", *gmax, "mT/m");
    c->add_option("--smax", *smax, "T/m/s");
    c->callback([=] {
      auto const t = io::read_trajectory(*in);
      auto const r = check_feasibility(t, t.meta().fov_cm, *gmax, *smax);
      print_json({{"max_gradient_mT_per_m", r.max_gradient_mT_per_m},
                  {"max_slew_T_per_m_per_s", r.max_slew_T_per_m_per_s},
                  {"gradient_ok", r.gradient_ok},
                  {"slew_ok", r.slew_ok},
                  {"feasible", r.feasible()}});
    });
  }
}

// ---- phantom / fieldmap -------------------------------------------------------

void add_phantom(CLI::App &app)
{
  auto *ph = app.add_subcommand("phantom", "Synthetic vessel phantoms")->require_subcommand(1);
  auto *c = ph->add_subcommand("gen", "Generate one phantom");
  auto out = std::make_shared<std::string>();
  auto grid = std::make_shared<std::optional<int>>(), vessels = std::make_shared<std::optional<int>>();
  c->add_option("--out", *out)->required();
  c->add_option("--grid", *grid);
  c->add_option("--vessels", *vessels);
  c->callback([=] {
    int const n = g.pick(*grid, "/phantom/grid_size", 32);
    auto const v = gen_vessel_phantom(Shape3::cube(n), g.pick(*vessels, "/phantom/n_vessels", 3), g.seed_value());
    io::write_volume(*out, v);
    print_json({{"shape", {n, n, n}}, {"seed", g.seed_value()}});
  });

  auto *fm = app.add_subcommand("fieldmap", "Synthetic field maps")->require_subcommand(1);
  auto *f = fm->add_subcommand("gen", "Generate a smooth field map");
  auto fout = std::make_shared<std::string>();
  auto fgrid = std::make_shared<std::optional<int>>(), blobs = std::make_shared<std::optional<int>>();
  auto fmax = std::make_shared<std::optional<double>>();
  f->add_option("--out", *fout)->required();
  f->add_option("--grid", *fgrid);
  f->add_option("--f-max", *fmax, "Peak |f| [Hz]");
  f->add_option("--blobs", *blobs);
  f->callback([=] {
    int const n = g.pick(*fgrid, "/phantom/grid_size", 32);
    auto const m = gen_field_map(Shape3::cube(n), fieldmap_params(*fmax, *blobs), g.seed_value());
    io::write_fieldmap(*fout, m);
    print_json({{"shape", {n, n, n}}, {"seed", g.seed_value()}});
  });
}

// ---- sim / recon ---------------------------------------------------------------

void add_sim(CLI::App &app)
{
  auto *sim = app.add_subcommand("sim", "Simulate k-space")->require_subcommand(1);
  struct Opt
  {
    std::string image, traj, fieldmap, out;
    std::optional<int> bins;
    std::optional<double> noise;
  };
  for (std::string mode : {"exact", "fast"}) {
    auto *c = sim->add_subcommand(mode, mode == "exact" ? "Direct-sum forward model" : "Frequency-segmented gridding forward model");
    auto o = std::make_shared<Opt>();
    c->add_option("--image", o->image)->required();
    c->add_option("--traj", o->traj)->required();
    c->add_option("--fieldmap", o->fieldmap, "Field map (default: on resonance)");
    c->add_option("--out", o->out)->required();
    c->add_option("--noise", o->noise, "Noise std per component");
    if (mode == "fast") { c->add_option("--bins", o->bins, "Frequency bins"); }
    c->callback([o, mode] {
      auto const img = io::read_volume(o->image);
      auto const traj = io::read_trajectory(o->traj);
      FieldMap const fmap = o->fieldmap.empty() ? constant_field_map(img.shape(), 0.0) : io::read_fieldmap(o->fieldmap);
      ForwardOptions fo;
      fo.noise_sigma = g.pick(o->noise, "/forward/noise_sigma", fo.noise_sigma);
      fo.noise_seed = g.seed_value();
      fo.max_work = config::get_or(g.cfg, "/forward/max_work", fo.max_work);
      KSpaceData ks = mode == "exact"
                        ? forward_exact(img, fmap, traj, fo)
                        : forward_freq_segmented(img, fmap, traj, g.pick(o->bins, "/forward/n_bins", 16), grid_options(), fo);
      ks.traj_ref = o->traj;
      io::write_kspace(o->out, ks);
      print_json({{"n_samples", ks.size()}});
    });
  }
  {
    auto *c = sim->add_subcommand("psf", "Point spread function for a constant off-resonance");
    auto traj = std::make_shared<std::string>(), out = std::make_shared<std::string>(), loc = std::make_shared<std::string>();
    auto f0 = std::make_shared<double>(0.0);
    c->add_option("--traj", *traj)->required();
    c->add_option("--f0", *f0, "Off-resonance [Hz]");
    c->add_option("--loc", *loc, "Point location x,y,z (default: centre)");
    c->add_option("--out", *out)->required();
    c->callback([=] {
      auto const t = io::read_trajectory(*traj);
      Shape3 const s = Shape3::cube(t.grid_size());
      Index3 const at = parse_index(*loc, s);
      auto const psf = psf_local(t, at, *f0, s, grid_options());
      io::write_volume(*out, psf);
      print_json({{"f0_hz", *f0}, {"r90", energy_radius(psf, at)}, {"peak_to_sidelobe", peak_to_sidelobe(psf, at)}});
    });
  }

  auto *recon = app.add_subcommand("recon", "Image reconstruction")->require_subcommand(1);
  auto *c = recon->add_subcommand("grid", "Gridding reconstruction");
  auto ks = std::make_shared<std::string>(), traj = std::make_shared<std::string>(), out = std::make_shared<std::string>();
  auto demod = std::make_shared<double>(0.0);
  c->add_option("--kspace", *ks)->required();
  c->add_option("--traj", *traj)->required();
  c->add_option("--demod", *demod, "Demodulate a global frequency [Hz] first");
  c->add_option("--out", *out)->required();
  c->callback([=] {
    auto const t = io::read_trajectory(*traj);
    auto data = io::read_kspace(*ks);
    if (*demod != 0.0) { data = demodulate_global(data, t, *demod); }
    io::write_volume(*out, grid_adjoint(data, t, Shape3::cube(t.grid_size()), grid_options()));
    print_json({{"shape", {t.grid_size(), t.grid_size(), t.grid_size()}}});
  });
}

// ---- corpus --------------------------------------------------------------------

void add_corpus(CLI::App &app)
{
  auto *corpus = app.add_subcommand("corpus", "Training corpus")->require_subcommand(1);
  {
    auto *c = corpus->add_subcommand("build", "Simulate (input, reference) pairs");
    struct Opt
    {
      std::string traj, out, factors;
      std::optional<int> phantoms, n_freqs;
      std::optional<double> f_max;
      bool fieldmap = false;
    };
    auto o = std::make_shared<Opt>();
    c->add_option("--traj", o->traj, "Short-readout trajectory")->required();
    c->add_option("--out", o->out, "Output directory")->required();
    c->add_option("--phantoms", o->phantoms);
    c->add_option("--factors", o->factors, "Comma-separated readout factors");
    c->add_option("--n-freqs", o->n_freqs);
    c->add_option("--f-max", o->f_max, "Augmentation range [Hz]");
    c->add_flag("--use-fieldmap", o->fieldmap, "Simulate with a spatially varying map");
    c->callback([o] {
      auto const traj = io::read_trajectory(o->traj);
      std::vector<double> factors = o->factors.empty()
                                      ? config::get_or<std::vector<double>>(g.cfg, "/corpus/factors", {1.5, 2.0, 2.5, 3.0})
                                      : parse_list(o->factors);
      auto const freqs = default_corpus_freqs(g.pick(o->n_freqs, "/corpus/n_freqs", 101), g.pick(o->f_max, "/corpus/f_max", 500.0));
      CorpusOptions co;
      co.use_fieldmap = o->fieldmap || config::get_or(g.cfg, "/corpus/use_fieldmap", false);
      co.fieldmap = fieldmap_params(std::nullopt, std::nullopt);
      co.fieldmap_bins = config::get_or(g.cfg, "/forward/n_bins", co.fieldmap_bins);
      co.n_vessels = config::get_or(g.cfg, "/phantom/n_vessels", co.n_vessels);
      co.grid = grid_options();
      auto const m = build_corpus(g.pick(o->phantoms, "/corpus/n_phantoms", 8), traj, factors, freqs, g.seed_value(), o->out, co);
      print_json({{"manifest", (fs::path(o->out) / "manifest.json").string()}, {"pairs", m.pairs.size()}, {"phantoms", m.phantoms.size()}});
    });
  }
  {
    auto *c = corpus->add_subcommand("split", "Split a manifest by phantom");
    auto manifest = std::make_shared<std::string>(), tr = std::make_shared<std::string>(), te = std::make_shared<std::string>();
    auto frac = std::make_shared<std::optional<double>>();
    c->add_option("--manifest", *manifest)->required();
    c->add_option("--fraction", *frac, "Training fraction of phantoms");
    c->add_option("--train-out", *tr, "Default: train.json next to the manifest");
    c->add_option("--test-out", *te, "Default: test.json next to the manifest");
    c->callback([=] {
      fs::path const root = fs::path(*manifest).parent_path();
      // Split manifests live next to the source so relative paths stay valid.
      fs::path const a = tr->empty() ? root / "train.json" : fs::path(*tr), b = te->empty() ? root / "test.json" : fs::path(*te);
      require(fs::absolute(a).parent_path() == fs::absolute(root) && fs::absolute(b).parent_path() == fs::absolute(root),
              "split manifests must be written next to the source manifest");
      auto const [train, test] = split_manifest(read_manifest(*manifest), g.pick(*frac, "/corpus/train_fraction", 8.0 / 30.0), g.seed_value());
      write_manifest(a, train);
      write_manifest(b, test);
      print_json({{"train_phantoms", train.phantoms.size()}, {"test_phantoms", test.phantoms.size()}, {"train_pairs", train.pairs.size()},
                  {"test_pairs", test.pairs.size()}});
    });
  }
}

// ---- autofocus -----------------------------------------------------------------

void add_autofocus(CLI::App &app)
{
  auto *af = app.add_subcommand("autofocus", "Blind off-resonance correction")->require_subcommand(1);
  {
    auto *c = af->add_subcommand("run", "Correct an acquisition");
    auto ks = std::make_shared<std::string>(), traj = std::make_shared<std::string>(), out = std::make_shared<std::string>(),
         fmap = std::make_shared<std::string>();
    c->add_option("--kspace", *ks)->required();
    c->add_option("--traj", *traj)->required();
    c->add_option("--out", *out)->required();
    c->add_option("--fieldmap-out", *fmap);
    c->callback([=] {
      auto const t = io::read_trajectory(*traj);
      auto const cfg = autofocus_config();
      auto const r = autofocus_correct(io::read_kspace(*ks), t, Shape3::cube(t.grid_size()), cfg);
      io::write_volume(*out, r.image);
      if (!fmap->empty()) { io::write_fieldmap(*fmap, r.fieldmap); }
      std::vector<double> masked;
      for (std::size_t i = 0; i < r.fieldmap.size(); ++i) {
        if (r.signal[i]) { masked.push_back(r.fieldmap[i]); }
      }
      double median = 0.0;
      if (!masked.empty()) {
        std::nth_element(masked.begin(), masked.begin() + masked.size() / 2, masked.end());
        median = masked[masked.size() / 2];
      }
      print_json({{"median_hz", median}, {"signal_voxels", masked.size()}});
    });
  }
  {
    auto *c = af->add_subcommand("fieldmap", "Consistency field map between corrected and uncorrected images");
    auto corr = std::make_shared<std::string>(), unc = std::make_shared<std::string>(), traj = std::make_shared<std::string>(),
         out = std::make_shared<std::string>();
    c->add_option("--corrected", *corr)->required();
    c->add_option("--uncorrected", *unc)->required();
    c->add_option("--traj", *traj)->required();
    c->add_option("--out", *out)->required();
    c->callback([=] {
      auto const f = estimate_consistency_fieldmap(io::read_volume(*corr), io::read_volume(*unc), io::read_trajectory(*traj), autofocus_config());
      io::write_fieldmap(*out, f);
      print_json({{"shape", {f.shape().x, f.shape().y, f.shape().z}}});
    });
  }
}

// ---- net -------------------------------------------------------------------------

struct Inference
{
  int tile = 0, overlap = 0;
};

Inference inference(std::optional<int> tile, std::optional<int> overlap)
{
  return {g.pick(tile, "/inference/tile", 0), g.pick(overlap, "/inference/overlap", 0)};
}

ComplexVolume run_net(nn::NetParams<float> const &p, ComplexVolume const &v, Inference i)
{
  return i.tile > 0 ? nn::apply_tiled(p, v, i.tile, i.overlap) : nn::net_forward(p, v);
}

fs::path checkpoint_manifest(std::string const &s)
{
  fs::path p(s);
  if (fs::is_directory(p)) { p /= "latest.json"; }
  if (p.extension() != ".json") { p.replace_extension(".json"); }
  return p;
}

void add_net(CLI::App &app)
{
  auto *net = app.add_subcommand("net", "Residual correction network")->require_subcommand(1);
  {
    auto *c = net->add_subcommand("init", "Write freshly initialized parameters");
    auto out = std::make_shared<std::string>();
    c->add_option("--out", *out, "Checkpoint directory")->required();
    c->callback([=] {
      auto const p = nn::net_init<float>(net_config());
      nn::save_checkpoint(*out, "init", p);
      print_json({{"checkpoint", (fs::path(*out) / "init.json").string()}});
    });
  }
  {
    auto *c = net->add_subcommand("train", "Train on a corpus manifest");
    struct Opt
    {
      std::string manifest, val, out, init;
      std::optional<int> epochs;
    };
    auto o = std::make_shared<Opt>();
    c->add_option("--manifest", o->manifest, "Training manifest")->required();
    c->add_option("--val-manifest", o->val, "Validation manifest (default: none)");
    c->add_option("--out", o->out, "Checkpoint directory")->required();
    c->add_option("--init", o->init, "Resume from a checkpoint");
    c->add_option("--epochs", o->epochs);
    c->callback([o] {
      auto const m = read_manifest(o->manifest);
      auto const train_set = load_pairs(m, fs::path(o->manifest).parent_path());
      std::vector<nn::TrainPair> val_set;
      if (!o->val.empty()) { val_set = load_pairs(read_manifest(o->val), fs::path(o->val).parent_path()); }
      nn::TrainOptions opt;
      opt.epochs = g.pick(o->epochs, "/train/epochs", 8);
      opt.checkpoint_dir = o->out;
      opt.on_epoch = [](nn::EpochStats const &s) {
        print_json({{"epoch", s.epoch}, {"train_l1", s.train_l1}, {"val_l1", s.val_l1}});
        std::cout.flush();
      };
      if (o->init.empty()) {
        nn::train(net_config(), train_set, val_set, opt);
      } else {
        auto p = nn::load_checkpoint<float>(checkpoint_manifest(o->init));
        auto const j = io::read_json(checkpoint_manifest(o->init));
        opt.start_epoch = j.contains("extra") ? j["extra"].value("epoch", 0) : 0;
        nn::train(std::move(p), train_set, val_set, opt);
      }
    });
  }
  {
    auto *c = net->add_subcommand("apply", "Correct one image");
    auto ck = std::make_shared<std::string>(), in = std::make_shared<std::string>(), out = std::make_shared<std::string>();
    auto tile = std::make_shared<std::optional<int>>(), overlap = std::make_shared<std::optional<int>>();
    c->add_option("--ckpt", *ck, "Checkpoint manifest or directory")->required();
    c->add_option("--in", *in)->required();
    c->add_option("--out", *out)->required();
    c->add_option("--tile", *tile);
    c->add_option("--overlap", *overlap);
    c->callback([=] {
      auto const p = nn::load_checkpoint<float>(checkpoint_manifest(*ck));
      auto const t0 = std::chrono::steady_clock::now();
      auto const y = run_net(p, io::read_volume(*in), inference(*tile, *overlap));
      double const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      io::write_volume(*out, y);
      print_json({{"seconds", secs}});
    });
  }
  {
    auto *c = net->add_subcommand("iterate", "Apply the network repeatedly to its own output");
    auto ck = std::make_shared<std::string>(), in = std::make_shared<std::string>(), out = std::make_shared<std::string>();
    auto n = std::make_shared<int>(4);
    auto tile = std::make_shared<std::optional<int>>(), overlap = std::make_shared<std::optional<int>>();
    c->add_option("--ckpt", *ck)->required();
    c->add_option("--in", *in)->required();
    c->add_option("--n", *n, "Number of applications");
    c->add_option("--out-csv", *out, "CSV of consecutive difference norms");
    c->add_option("--tile", *tile);
    c->add_option("--overlap", *overlap);
    c->callback([=] {
      auto const p = nn::load_checkpoint<float>(checkpoint_manifest(*ck));
      auto const inf = inference(*tile, *overlap);
      auto const r = iterate_apply(p, io::read_volume(*in), *n, inf.tile, inf.overlap);
      std::ostringstream csv;
      csv.precision(10);
      csv << "k,diff_nrms\n";
      for (std::size_t k = 0; k < r.diff_nrms.size(); ++k) { csv << k + 1 << "," << r.diff_nrms[k] << "\n"; }
      if (!out->empty()) { io::write_text_atomic(*out, csv.str()); }
      print_json({{"diff_nrms", r.diff_nrms}});
    });
  }
}

// ---- eval ---------------------------------------------------------------------------

void add_eval(CLI::App &app)
{
  auto *ev = app.add_subcommand("eval", "Image-quality evaluation")->require_subcommand(1);
  {
    auto *c = ev->add_subcommand("metrics", "NRMSE, SSIM and PSNR of one image against a reference");
    auto x = std::make_shared<std::string>(), ref = std::make_shared<std::string>();
    c->add_option("--x", *x)->required();
    c->add_option("--ref", *ref)->required();
    c->callback([=] {
      auto const a = io::read_volume(*x), b = io::read_volume(*ref);
      double const p = psnr(a, b);
      print_json({{"nrmse", nrmse(a, b)}, {"ssim", ssim(a, b)}, {"psnr_db", std::isinf(p) ? json("inf") : json(p)}});
    });
  }
  {
    auto *c = ev->add_subcommand("sweep", "Metrics over a grid of global off-resonance frequencies");
    struct Opt
    {
      std::string ks, traj, methods, ckpt, out;
      std::optional<double> factor, f_max;
      std::optional<int> n_freqs, tile, overlap;
    };
    auto o = std::make_shared<Opt>();
    c->add_option("--kspace", o->ks, "On-resonance reference k-space")->required();
    c->add_option("--traj", o->traj, "Trajectory the k-space was acquired on")->required();
    c->add_option("--factor", o->factor, "Stretch the readout before sweeping (default 1)");
    c->add_option("--methods", o->methods, "Comma-separated subset of none,autofocus,net");
    c->add_option("--ckpt", o->ckpt, "Network checkpoint (for method net)");
    c->add_option("--f-max", o->f_max);
    c->add_option("--n-freqs", o->n_freqs);
    c->add_option("--tile", o->tile);
    c->add_option("--overlap", o->overlap);
    c->add_option("--out", o->out, "CSV output")->required();
    c->callback([o] {
      auto traj = io::read_trajectory(o->traj);
      if (double const f = o->factor.value_or(1.0); f != 1.0) { traj = scale_readout(traj, f); }
      auto const methods = o->methods.empty() ? config::get_or<std::vector<std::string>>(g.cfg, "/sweep/methods", {"none"})
                                              : parse_words(o->methods);
      std::vector<Corrector> cs;
      for (auto const &m : methods) {
        if (m == "none") {
          cs.push_back(corrector_none());
        } else if (m == "autofocus") {
          cs.push_back(corrector_autofocus(traj, autofocus_config()));
        } else if (m == "net") {
          require(!o->ckpt.empty(), "method net needs --ckpt");
          auto const inf = inference(o->tile, o->overlap);
          cs.push_back(corrector_net(nn::load_checkpoint<float>(checkpoint_manifest(o->ckpt)), inf.tile, inf.overlap));
        } else {
          throw ValidationError("unknown method '" + m + "' (expected none, autofocus or net)");
        }
      }
      auto const freqs = default_sweep_freqs(g.pick(o->f_max, "/sweep/f_max", 1000.0), g.pick(o->n_freqs, "/sweep/n_freqs", 41));
      auto const rows = sweep_eval(io::read_kspace(o->ks), traj, cs, freqs, o->out, grid_options());
      print_json({{"rows", rows.size()}, {"csv", o->out}});
    });
  }
}

// ---- plot-data ----------------------------------------------------------------------

void add_plot_data(CLI::App &app)
{
  auto *c = app.add_subcommand("plot-data", "Reshape a sweep CSV into long format (f_hz,method,metric,value)");
  auto in = std::make_shared<std::string>(), out = std::make_shared<std::string>();
  c->add_option("--in", *in)->required();
  c->add_option("--out", *out, "Output CSV (default: stdout)");
  c->callback([=] {
    std::ifstream f(*in);
    if (!f) { throw IoError("cannot open " + *in); }
    std::string line;
    std::getline(f, line);
    if (line != kSweepHeader) { throw IoError(*in + " is not a sweep CSV"); }
    std::ostringstream o;
    o << "f_hz,method,metric,value\n";
    char const *names[] = {"nrmse", "ssim", "psnr_db"};
    while (std::getline(f, line)) {
      if (line.empty()) { continue; }
      auto const cells = parse_words(line);
      if (cells.size() != 5) { throw IoError("malformed row: " + line); }
      for (int k = 0; k < 3; ++k) { o << cells[0] << "," << cells[1] << "," << names[k] << "," << cells[2 + k] << "\n"; }
    }
    if (out->empty()) {
      std::cout << o.str();
    } else {
      io::write_text_atomic(*out, o.str());
    }
  });
}

int fail(std::string const &kind, std::string const &message, int code)
{
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
  return code;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Off-resonance simulation, correction and evaluation for 3D cones MRI"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string("offres ") + OFFRES_VERSION);
  app.add_option("--config", g.config_path, "JSON configuration file");
  app.add_option("--seed", g.seed, "Overrides the configuration seed");
  app.add_option("--threads", g.threads, "Maximum worker threads")->check(CLI::PositiveNumber);
  bool print_schema = false;
  app.add_flag("--config-schema", print_schema, "Print the configuration JSON schema and exit");
  app.parse_complete_callback([&] {
    if (print_schema) {
      std::cout << config::pipeline_schema().dump(2) << "\n";
      throw CLI::Success();
    }
    g.load();
  });

  add_traj(app);
  add_phantom(app);
  add_sim(app);
  add_corpus(app);
  add_autofocus(app);
  add_net(app);
  add_eval(app);
  add_plot_data(app);

  try {
    // A bare --config-schema needs no subcommand.
    for (int i = 1; i < argc; ++i) {
      if (std::string(argv[i]) == "--config-schema") { app.require_subcommand(0); }
    }
    app.parse(argc, argv);
  } catch (CLI::CallForHelp const &e) {
    return app.exit(e);
  } catch (CLI::CallForAllHelp const &e) {
    return app.exit(e);
  } catch (CLI::CallForVersion const &e) {
    return app.exit(e);
  } catch (CLI::Success const &) {
    return 0;
  } catch (CLI::ParseError const &e) {
    return fail("usage", e.what(), 2);
  } catch (ConfigError const &e) {
    return fail(e.kind(), e.what(), 3);
  } catch (Error const &e) {
    return fail(e.kind(), e.what(), 1);
  } catch (std::exception const &e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
