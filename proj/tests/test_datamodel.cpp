#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "csmil/datamodel.hpp"
#include "csmil/jsonx.hpp"
#include "csmil/rng.hpp"

using namespace csmil;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("csmil_dm_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Bag make_bag(const std::string& id, int label, int n, int d, std::uint64_t seed) {
  Bag b;
  b.id = id;
  b.label = label;
  b.embeddings.resize(n, d);
  Rng rng(seed);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      b.embeddings(i, j) = static_cast<double>(static_cast<float>(rng.normal()));
  return b;
}

}  // namespace

TEST_CASE("bag file round trip is exact at f32 precision") {
  auto dir = temp_dir("roundtrip");
  Bag b = make_bag("b0", 1, 7, 5, 42);
  save_bag(b, (dir / "b0.emb").string());
  Bag r = load_bag((dir / "b0.emb").string(), "b0", 1);
  REQUIRE(r.n() == 7);
  REQUIRE(r.dim() == 5);
  CHECK(r.embeddings == b.embeddings);  // values were f32-representable
}

TEST_CASE("single-value bag file is exactly 20 bytes with the magic prefix") {
  auto dir = temp_dir("size");
  Bag b;
  b.id = "one";
  b.embeddings = Matrix::Zero(1, 1);
  save_bag(b, (dir / "one.emb").string());
  std::ifstream in(dir / "one.emb", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() == 20);
  CHECK(bytes.substr(0, 8) == "CSMILEMB");
}

TEST_CASE("non-finite embeddings are refused") {
  auto dir = temp_dir("nonfinite");
  Bag b = make_bag("bad", 0, 2, 2, 1);
  b.embeddings(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(save_bag(b, (dir / "bad.emb").string()), ConfigError);
  b.embeddings(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(save_bag(b, (dir / "bad.emb").string()), ConfigError);
}

TEST_CASE("empty bag is refused") {
  auto dir = temp_dir("emptybag");
  Bag b;
  b.id = "none";
  CHECK_THROWS_AS(save_bag(b, (dir / "none.emb").string()), ConfigError);
}

TEST_CASE("dataset save/load keeps manifest order and validates dimensions") {
  auto dir = temp_dir("dataset");
  Dataset ds;
  ds.name = "pair";
  ds.dim = 4;
  ds.bags.push_back(make_bag("a", 1, 3, 4, 7));
  ds.bags.push_back(make_bag("b", 0, 5, 4, 8));
  save_dataset(ds, dir.string());
  Dataset r = load_dataset((dir / "manifest.json").string());
  REQUIRE(r.bags.size() == 2);
  CHECK(r.dim == 4);
  CHECK(r.bags[0].id == "a");
  CHECK(r.bags[1].id == "b");
  CHECK(r.bags[0].embeddings == ds.bags[0].embeddings);
  CHECK(r.bags[1].label == 0);
}

TEST_CASE("dimension mismatch across bags is rejected at load") {
  auto dir = temp_dir("dimmix");
  Bag a = make_bag("a", 1, 3, 4, 1);
  Bag b = make_bag("b", 0, 2, 8, 2);
  save_bag(a, (dir / "a.emb").string());
  save_bag(b, (dir / "b.emb").string());
  Json man;
  man["name"] = "mix";
  man["dim"] = 4;
  man["bags"] = Json::array();
  man["bags"].push_back({{"id", "a"}, {"label", 1}, {"path", "a.emb"}});
  man["bags"].push_back({{"id", "b"}, {"label", 0}, {"path", "b.emb"}});
  write_text_file((dir / "manifest.json").string(), dump_fixed(man));
  CHECK_THROWS_AS(load_dataset((dir / "manifest.json").string()), ConfigError);
}

TEST_CASE("empty manifest is rejected") {
  auto dir = temp_dir("emptyman");
  Json man;
  man["name"] = "none";
  man["dim"] = 4;
  man["bags"] = Json::array();
  write_text_file((dir / "manifest.json").string(), dump_fixed(man));
  CHECK_THROWS_WITH_AS(load_dataset((dir / "manifest.json").string()),
                       doctest::Contains("manifest has no bags"), ConfigError);
}

TEST_CASE("corrupted magic number is rejected") {
  auto dir = temp_dir("magic");
  Bag b = make_bag("x", 0, 2, 2, 3);
  save_bag(b, (dir / "x.emb").string());
  {
    std::fstream f(dir / "x.emb", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("WRONGMAG", 8);
  }
  CHECK_THROWS_AS(load_bag((dir / "x.emb").string(), "x", 0), ConfigError);
}

TEST_CASE("synthetic generator honours the bag composition contract") {
  SynthConfig cfg;
  cfg.bags_per_class = 10;
  cfg.d = 8;
  cfg.k_latent = 4;
  cfg.s_informative = 2;
  cfg.n_min = 5;
  cfg.n_max = 12;
  cfg.seed = 11;
  SynthResult res = generate_synthetic(cfg);
  REQUIRE(res.dataset.bags.size() == 20);
  CHECK(res.dataset.dim == 8);
  std::set<int> informative(res.truth.informative_components.begin(),
                            res.truth.informative_components.end());
  REQUIRE(informative.size() == 2);

  for (const auto& bag : res.dataset.bags) {
    const auto& comps = res.truth.component_of_instance.at(bag.id);
    REQUIRE(static_cast<int>(comps.size()) == bag.n());
    int n_inf = 0;
    for (int c : comps) {
      CHECK(c >= 0);
      CHECK(c < cfg.k_latent);
      if (informative.count(c)) ++n_inf;
    }
    if (bag.label == 1) {
      int expected = static_cast<int>(
          std::ceil(cfg.positive_fraction * static_cast<double>(bag.n())));
      CHECK(n_inf == expected);
    } else {
      CHECK(n_inf == 0);  // negative bags carry no informative instances
    }
    CHECK(bag.n() >= cfg.n_min);
    CHECK(bag.n() <= cfg.n_max);
  }
}

TEST_CASE("synthetic components are cleanly separated at default spacing") {
  SynthConfig cfg;
  cfg.bags_per_class = 6;
  cfg.d = 8;
  cfg.k_latent = 4;
  cfg.s_informative = 1;
  cfg.n_min = 4;
  cfg.n_max = 8;
  cfg.seed = 5;
  SynthResult res = generate_synthetic(cfg);

  // Group instances by generating component; the worst within-component
  // pairwise distance must stay below the best cross-component one.
  std::vector<std::vector<Vector>> by_comp(static_cast<std::size_t>(cfg.k_latent));
  for (const auto& bag : res.dataset.bags) {
    const auto& comps = res.truth.component_of_instance.at(bag.id);
    for (int i = 0; i < bag.n(); ++i)
      by_comp[static_cast<std::size_t>(comps[static_cast<std::size_t>(i)])].push_back(
          bag.embeddings.row(i).transpose());
  }
  double max_within = 0, min_across = std::numeric_limits<double>::infinity();
  for (int a = 0; a < cfg.k_latent; ++a)
    for (int c = a; c < cfg.k_latent; ++c)
      for (const auto& u : by_comp[static_cast<std::size_t>(a)])
        for (const auto& v : by_comp[static_cast<std::size_t>(c)]) {
          double dist = (u - v).norm();
          if (a == c)
            max_within = std::max(max_within, dist);
          else
            min_across = std::min(min_across, dist);
        }
  CHECK(max_within < min_across);
}

TEST_CASE("synthetic generation is deterministic") {
  SynthConfig cfg;
  cfg.bags_per_class = 5;
  cfg.d = 6;
  cfg.k_latent = 3;
  cfg.s_informative = 1;
  cfg.seed = 99;
  SynthResult a = generate_synthetic(cfg);
  SynthResult b = generate_synthetic(cfg);
  REQUIRE(a.dataset.bags.size() == b.dataset.bags.size());
  for (std::size_t i = 0; i < a.dataset.bags.size(); ++i) {
    CHECK(a.dataset.bags[i].id == b.dataset.bags[i].id);
    CHECK(a.dataset.bags[i].embeddings == b.dataset.bags[i].embeddings);
  }
  CHECK(a.truth.component_of_instance == b.truth.component_of_instance);
}

TEST_CASE("synthetic config validation") {
  SynthConfig cfg;
  cfg.s_informative = 0;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.s_informative = cfg.k_latent + 1;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.n_min = 0;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.n_max = cfg.n_min - 1;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.noise_sigma = 0.0;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.positive_fraction = 0.0;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.k_latent = cfg.d + 1;  // centroid layout needs k_latent <= d
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
}

TEST_CASE("ground truth round trip") {
  auto dir = temp_dir("gt");
  GroundTruth gt;
  gt.informative_components = {0, 3};
  gt.component_of_instance["bag_a"] = {0, 1, 2};
  gt.component_of_instance["bag_b"] = {3};
  save_ground_truth(gt, (dir / "gt.json").string());
  GroundTruth r = load_ground_truth((dir / "gt.json").string());
  CHECK(r.informative_components == gt.informative_components);
  CHECK(r.component_of_instance == gt.component_of_instance);
}

TEST_CASE("stratified folds: coverage, balance, class stratification") {
  SynthConfig cfg;
  cfg.bags_per_class = 50;
  cfg.d = 4;
  cfg.k_latent = 2;
  cfg.s_informative = 1;
  cfg.n_min = 2;
  cfg.n_max = 4;
  cfg.seed = 1;
  Dataset ds = generate_synthetic(cfg).dataset;
  FoldAssignment fa = split_folds(ds, 5, 17);
  REQUIRE(fa.n_folds == 5);
  REQUIRE(fa.fold_of_bag.size() == ds.bags.size());

  std::map<int, int> fold_sizes;
  std::map<int, std::map<int, int>> fold_class;
  for (const auto& bag : ds.bags) {
    int f = fa.fold_of_bag.at(bag.id);
    CHECK(f >= 0);
    CHECK(f < 5);
    ++fold_sizes[f];
    ++fold_class[f][bag.label];
  }
  for (const auto& [f, sz] : fold_sizes) CHECK(sz == 20);
  for (const auto& [f, per] : fold_class) {
    CHECK(per.at(0) == 10);
    CHECK(per.at(1) == 10);
  }
}

TEST_CASE("fold sizes differ by at most one when counts do not divide") {
  SynthConfig cfg;
  cfg.bags_per_class = 13;
  cfg.d = 4;
  cfg.k_latent = 2;
  cfg.s_informative = 1;
  cfg.n_min = 2;
  cfg.n_max = 3;
  cfg.seed = 2;
  Dataset ds = generate_synthetic(cfg).dataset;
  FoldAssignment fa = split_folds(ds, 4, 3);
  std::map<int, int> sizes;
  std::map<int, std::map<int, int>> per_class;
  for (const auto& bag : ds.bags) {
    ++sizes[fa.fold_of_bag.at(bag.id)];
    ++per_class[fa.fold_of_bag.at(bag.id)][bag.label];
  }
  int mn = 1 << 30, mx = 0;
  for (auto& [f, s] : sizes) {
    mn = std::min(mn, s);
    mx = std::max(mx, s);
  }
  CHECK(mx - mn <= 1);
  for (int label : {0, 1}) {
    int cmn = 1 << 30, cmx = 0;
    for (auto& [f, per] : per_class) {
      cmn = std::min(cmn, per[label]);
      cmx = std::max(cmx, per[label]);
    }
    CHECK(cmx - cmn <= 1);
  }
}

TEST_CASE("fold split ignores dataset ordering") {
  SynthConfig cfg;
  cfg.bags_per_class = 10;
  cfg.d = 4;
  cfg.k_latent = 2;
  cfg.s_informative = 1;
  cfg.n_min = 2;
  cfg.n_max = 3;
  cfg.seed = 4;
  Dataset ds = generate_synthetic(cfg).dataset;
  FoldAssignment fa = split_folds(ds, 5, 23);
  std::reverse(ds.bags.begin(), ds.bags.end());
  FoldAssignment fb = split_folds(ds, 5, 23);
  CHECK(fa.fold_of_bag == fb.fold_of_bag);
}

TEST_CASE("fold split requires enough bags per class") {
  SynthConfig cfg;
  cfg.bags_per_class = 3;
  cfg.d = 4;
  cfg.k_latent = 2;
  cfg.s_informative = 1;
  cfg.n_min = 2;
  cfg.n_max = 3;
  cfg.seed = 6;
  Dataset ds = generate_synthetic(cfg).dataset;
  CHECK_THROWS_AS(split_folds(ds, 4, 0), ConfigError);
  CHECK_THROWS_AS(split_folds(ds, 1, 0), ConfigError);
}
