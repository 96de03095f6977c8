#include "support.hpp"

#include <offres/dataset.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <iterator>

using namespace offres;
namespace fs = std::filesystem;

namespace {

std::string slurp(fs::path const &p)
{
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

double rel_l2(ComplexVolume const &a, ComplexVolume const &b)
{
  double n = 0.0, d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    n += std::norm(a[i] - b[i]);
    d += std::norm(b[i]);
  }
  return std::sqrt(n / d);
}

Manifest synthetic_manifest(int n_phantoms)
{
  Manifest m;
  for (int i = 0; i < n_phantoms; ++i) {
    m.phantoms.push_back({i, phantom_seed(0, i), "p/ref", "p/ks"});
    for (double f : {-100.0, 100.0}) { m.pairs.push_back({i, phantom_seed(0, i), 2.0, f, "in", "p/ref", "t"}); }
  }
  return m;
}

} // namespace

TEST_CASE("corpus build writes every pair and a manifest", "[dataset]")
{
  auto const root = fs::temp_directory_path() / "offres_corpus_test";
  fs::remove_all(root);
  auto const traj = generate_cones(test::small_cones());
  std::vector<double> const factors{1.0, 2.0}, freqs{-250.0, 0.0, 250.0};
  auto const m = build_corpus(3, traj, factors, freqs, 42, root / "a");
  REQUIRE(m.pairs.size() == 3u * 2u * 3u);
  REQUIRE(m.phantoms.size() == 3u);

  auto const on_disk = read_manifest(root / "a" / "manifest.json");
  CHECK(to_json(on_disk) == to_json(m));
  auto const pairs = load_pairs(on_disk, root / "a");
  REQUIRE(pairs.size() == m.pairs.size());
  for (std::size_t i = 0; i < m.pairs.size(); ++i) {
    auto const &r = m.pairs[i];
    CHECK(fs::exists(root / "a" / (r.input_path + ".cfl")));
    CHECK(fs::exists(root / "a" / (r.traj_path + ".json")));
    if (r.factor == 1.0 && r.f0_hz == 0.0) { CHECK(rel_l2(pairs[i].input, pairs[i].target) < 2e-2); }
    if (r.factor == 2.0 && r.f0_hz == 250.0) { CHECK(rel_l2(pairs[i].input, pairs[i].target) > 0.05); }
  }
  // The stretched trajectory keeps positions and doubles the readout.
  auto const t2 = io::read_trajectory(root / "a" / m.pairs[3].traj_path);
  CHECK(m.pairs[3].factor == 2.0);
  CHECK(t2.t_read() == Catch::Approx(2.0 * traj.t_read()).epsilon(1e-6));

  SECTION("same seed reproduces the corpus bit for bit")
  {
    build_corpus(3, traj, factors, freqs, 42, root / "b");
    CHECK(slurp(root / "a" / "manifest.json") == slurp(root / "b" / "manifest.json"));
    for (auto const &r : m.pairs) { CHECK(slurp(root / "a" / (r.input_path + ".cfl")) == slurp(root / "b" / (r.input_path + ".cfl"))); }
  }

  SECTION("a failed build leaves no manifest")
  {
    fs::create_directories(root / "c");
    std::ofstream(root / "c" / "p0001") << "blocks the phantom directory";
    CHECK_THROWS(build_corpus(3, traj, factors, freqs, 42, root / "c"));
    CHECK_FALSE(fs::exists(root / "c" / "manifest.json"));
  }
  fs::remove_all(root);
}

TEST_CASE("default corpus frequencies", "[dataset]")
{
  auto const f = default_corpus_freqs();
  REQUIRE(f.size() == 101u);
  CHECK(f.front() == -500.0);
  CHECK(f.back() == 500.0);
  CHECK(f[50] == Catch::Approx(0.0).margin(1e-12));
  CHECK(default_corpus_freqs(11)[1] == Catch::Approx(-400.0));
}

TEST_CASE("split is by phantom, disjoint and deterministic", "[dataset]")
{
  auto const m = synthetic_manifest(30);
  auto const [train, test] = split_manifest(m, 8.0 / 30.0, 5);
  CHECK(train.phantoms.size() == 8u);
  CHECK(test.phantoms.size() == 22u);
  CHECK(train.pairs.size() == 16u);
  CHECK(test.pairs.size() == 44u);
  std::set<int> a, b;
  for (auto const &p : train.pairs) { a.insert(p.phantom_id); }
  for (auto const &p : test.pairs) { b.insert(p.phantom_id); }
  for (int id : a) { CHECK(b.count(id) == 0u); }
  CHECK(a.size() + b.size() == 30u);

  auto const again = split_manifest(m, 8.0 / 30.0, 5);
  CHECK(to_json(again.first) == to_json(train));
  auto const other = split_manifest(m, 8.0 / 30.0, 6);
  CHECK(to_json(other.first) != to_json(train));

  CHECK_THROWS_AS(split_manifest(synthetic_manifest(1), 0.5, 0), ValidationError);
  CHECK_THROWS_AS(split_manifest(m, 1.0, 0), ValidationError);
  auto const two = split_manifest(synthetic_manifest(2), 0.01, 0);
  CHECK(two.first.phantoms.size() == 1u);
}
