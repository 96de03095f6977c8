#include "support.hpp"

#include <offres/evaluation.hpp>
#include <offres/phantom.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <fstream>

using namespace offres;

TEST_CASE("sweep over frequencies with the plain reconstruction", "[evaluation]")
{
  auto const traj = generate_cones(test::small_cones(2.36e-3));
  auto const img = gen_vessel_phantom(Shape3::cube(16), 2, 7);
  auto const ks = grid_forward(img, traj);
  auto const freqs = default_sweep_freqs(1000.0, 21);
  auto const csv = std::filesystem::temp_directory_path() / "offres_sweep_test" / "sweep.csv";
  std::filesystem::remove_all(csv.parent_path());

  auto const rows = sweep_eval(ks, traj, {corrector_none()}, freqs, csv);
  REQUIRE(rows.size() == freqs.size());
  auto const &mid = rows[10];
  CHECK(mid.f_hz == Catch::Approx(0.0).margin(1e-12));
  CHECK(mid.nrmse == 0.0);
  CHECK(mid.ssim == 1.0);
  CHECK(mid.psnr_db == kPsnrIdentical);
  // Error grows with |f| on both sides of resonance.
  for (std::size_t i = 11; i < rows.size(); ++i) {
    CHECK(rows[i].nrmse >= rows[i - 1].nrmse);
    CHECK(rows[20 - i].nrmse >= rows[21 - i].nrmse);
  }

  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == kSweepHeader);
  int n = 0;
  while (std::getline(in, line)) { ++n; }
  CHECK(n == 21);
  CHECK(format_sweep_row(mid).ends_with(",inf"));
  std::filesystem::remove_all(csv.parent_path());
}

TEST_CASE("sweep orders rows by frequency then method", "[evaluation]")
{
  auto const traj = generate_cones(test::small_cones());
  auto const ks = grid_forward(gen_vessel_phantom(Shape3::cube(16), 2, 3), traj);
  Corrector const twice{"double", [](KSpaceData const &, ComplexVolume const &v) {
                          ComplexVolume o = v;
                          for (auto &x : o) { x *= 2.0; }
                          return o;
                        }};
  auto const rows = sweep_eval(ks, traj, {corrector_none(), twice}, {300.0, -300.0, 0.0});
  REQUIRE(rows.size() == 6u);
  CHECK(rows[0].f_hz == -300.0);
  CHECK(rows[0].method == "double");
  CHECK(rows[1].method == "none");
  CHECK(rows[4].f_hz == 300.0);
  CHECK(rows[2].nrmse == Catch::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(sweep_eval(ks, traj, {corrector_none(), corrector_none()}, {0.0}));
  CHECK_THROWS(sweep_eval(ks, traj, {}, {0.0}));
}

TEST_CASE("autofocus corrector improves on the plain reconstruction", "[evaluation]")
{
  auto const traj = generate_cones(test::small_cones(3.35e-3));
  auto const ks = grid_forward(gen_vessel_phantom(Shape3::cube(16), 2, 5), traj);
  auto const rows = sweep_eval(ks, traj, {corrector_none(), corrector_autofocus(traj)}, {-400.0, 400.0});
  REQUIRE(rows.size() == 4u);
  CHECK(rows[0].method == "autofocus");
  CHECK(rows[0].nrmse < rows[1].nrmse);
  CHECK(rows[2].nrmse < rows[3].nrmse);
}

TEST_CASE("iterating a network feeds back its own output", "[evaluation]")
{
  nn::NetConfig cfg;
  cfg.channels = 4;
  cfg.kernel = 3;
  cfg.output_init_scale = 1.0;
  auto const p = nn::net_init<float>(cfg);
  auto const v = gen_vessel_phantom(Shape3::cube(16), 2, 1);
  auto const r = iterate_apply(p, v, 4);
  REQUIRE(r.volumes.size() == 5u);
  REQUIRE(r.diff_nrms.size() == 4u);
  CHECK(r.diff_nrms[0] == 1.0);
  auto const again = nn::net_forward(p, nn::net_forward(p, v));
  for (std::size_t i = 0; i < v.size(); ++i) { REQUIRE(again[i] == r.volumes[2][i]); }
  auto const c = corrector_net(p);
  CHECK(c.name == "net");
  auto const once = c.apply({}, v);
  for (std::size_t i = 0; i < v.size(); ++i) { REQUIRE(once[i] == r.volumes[1][i]); }
}
