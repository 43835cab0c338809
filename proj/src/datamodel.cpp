#include "csmil/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "csmil/jsonx.hpp"
#include "csmil/rng.hpp"

namespace csmil {

namespace {

constexpr char kMagic[8] = {'C', 'S', 'M', 'I', 'L', 'E', 'M', 'B'};

void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32le(out, bits);
}

float get_f32le(const unsigned char* p) {
  std::uint32_t bits = get_u32le(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_bag(const Bag& bag, const std::string& path) {
  if (bag.n() == 0 || bag.dim() == 0) throw ConfigError("refusing to save empty bag " + bag.id);
  if (!bag.embeddings.allFinite())
    throw ConfigError("refusing to save non-finite embeddings in bag " + bag.id);
  std::string out;
  out.reserve(16 + static_cast<std::size_t>(bag.n()) * static_cast<std::size_t>(bag.dim()) * 4);
  out.append(kMagic, 8);
  put_u32le(out, static_cast<std::uint32_t>(bag.n()));
  put_u32le(out, static_cast<std::uint32_t>(bag.dim()));
  for (int i = 0; i < bag.n(); ++i)
    for (int j = 0; j < bag.dim(); ++j) put_f32le(out, static_cast<float>(bag.embeddings(i, j)));
  write_text_file(path, out);
}

Bag load_bag(const std::string& path, const std::string& id, int label) {
  std::string raw = read_text_file(path);
  if (raw.size() < 16 || std::memcmp(raw.data(), kMagic, 8) != 0)
    throw ConfigError("bad magic in embedding file " + path);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  std::uint32_t n = get_u32le(p + 8);
  std::uint32_t d = get_u32le(p + 12);
  if (n == 0 || d == 0) throw ConfigError("empty embedding file " + path);
  std::size_t want = 16 + static_cast<std::size_t>(n) * d * 4;
  if (raw.size() != want) throw ConfigError("truncated embedding file " + path);
  Bag bag;
  bag.id = id;
  bag.label = label;
  bag.embeddings.resize(n, d);
  const unsigned char* q = p + 16;
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < d; ++j, q += 4) {
      float v = get_f32le(q);
      if (!std::isfinite(v)) throw ConfigError("non-finite value in " + path);
      bag.embeddings(i, j) = static_cast<double>(v);
    }
  return bag;
}

Dataset load_dataset(const std::string& manifest_path) {
  Json m = parse_json_file(manifest_path);
  if (!m.contains("name") || !m.contains("dim") || !m.contains("bags"))
    throw ConfigError("manifest missing required keys: " + manifest_path);
  Dataset ds;
  ds.name = m["name"].get<std::string>();
  ds.dim = m["dim"].get<int>();
  if (ds.dim <= 0) throw ConfigError("manifest dim must be positive");
  const auto& bags = m["bags"];
  if (!bags.is_array() || bags.empty()) throw ConfigError("manifest has no bags: " + manifest_path);
  std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
  for (const auto& e : bags) {
    std::string id = e.at("id").get<std::string>();
    int label = e.at("label").get<int>();
    if (label != 0 && label != 1) throw ConfigError("bag label must be 0 or 1: " + id);
    std::string rel = e.at("path").get<std::string>();
    Bag bag = load_bag((base / rel).string(), id, label);
    if (bag.dim() != ds.dim)
      throw ConfigError("bag " + id + " has dim " + std::to_string(bag.dim()) +
                        ", manifest says " + std::to_string(ds.dim));
    ds.bags.push_back(std::move(bag));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  Json m;
  m["name"] = ds.name;
  m["dim"] = ds.dim;
  m["bags"] = Json::array();
  for (const auto& bag : ds.bags) {
    std::string fname = bag.id + ".emb";
    save_bag(bag, (std::filesystem::path(dir) / fname).string());
    Json e;
    e["id"] = bag.id;
    e["label"] = bag.label;
    e["path"] = fname;
    m["bags"].push_back(e);
  }
  write_text_file((std::filesystem::path(dir) / "manifest.json").string(), dump_fixed(m));
}

void save_ground_truth(const GroundTruth& gt, const std::string& path) {
  Json j;
  j["informative_components"] = gt.informative_components;
  Json comp = Json::object();
  for (const auto& [id, comps] : gt.component_of_instance) comp[id] = comps;
  j["component_of_instance"] = comp;
  write_text_file(path, dump_fixed(j));
}

GroundTruth load_ground_truth(const std::string& path) {
  Json j = parse_json_file(path);
  GroundTruth gt;
  gt.informative_components = j.at("informative_components").get<std::vector<int>>();
  for (auto it = j.at("component_of_instance").begin(); it != j.at("component_of_instance").end();
       ++it)
    gt.component_of_instance[it.key()] = it.value().get<std::vector<int>>();
  return gt;
}

SynthResult generate_synthetic(const SynthConfig& cfg) {
  if (cfg.k_latent < 1) throw ConfigError("k_latent must be >= 1");
  if (cfg.s_informative < 1 || cfg.s_informative > cfg.k_latent)
    throw ConfigError("need 1 <= s_informative <= k_latent");
  if (cfg.k_latent > cfg.d)
    throw ConfigError("component layout needs k_latent <= d");
  if (cfg.n_min < 1 || cfg.n_max < cfg.n_min) throw ConfigError("bad instances_per_bag range");
  if (cfg.noise_sigma <= 0) throw ConfigError("noise_sigma must be positive");
  if (cfg.positive_fraction <= 0 || cfg.positive_fraction > 1)
    throw ConfigError("positive_fraction must be in (0, 1]");
  if (cfg.bags_per_class < 1) throw ConfigError("bags_per_class must be >= 1");

  Rng rng(derive_seed(cfg.seed, "synth"));

  // Centroid k sits at component_separation * e_k, rotated by a random
  // orthogonal matrix (QR of a Gaussian draw). Pairwise centroid distance is
  // separation * sqrt(2) >= separation.
  Matrix g(cfg.d, cfg.d);
  for (int i = 0; i < cfg.d; ++i)
    for (int j = 0; j < cfg.d; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix rot = qr.householderQ();
  Matrix centroids(cfg.k_latent, cfg.d);
  for (int k = 0; k < cfg.k_latent; ++k)
    centroids.row(k) = cfg.component_separation * rot.col(k).transpose();

  // Components [0, s) are informative, the rest are background.
  std::vector<int> background;
  for (int k = cfg.s_informative; k < cfg.k_latent; ++k) background.push_back(k);
  bool has_background = !background.empty();

  SynthResult out;
  out.dataset.name = "synthetic";
  out.dataset.dim = cfg.d;
  for (int k = 0; k < cfg.s_informative; ++k) out.truth.informative_components.push_back(k);

  auto draw_instance = [&](int component, Matrix& rows, int r) {
    for (int j = 0; j < cfg.d; ++j)
      rows(r, j) = centroids(component, j) + cfg.noise_sigma * rng.normal();
  };

  int digits = cfg.bags_per_class > 1 ? static_cast<int>(std::to_string(cfg.bags_per_class - 1).size()) : 1;
  auto bag_id = [&](int label, int idx) {
    std::string num = std::to_string(idx);
    num.insert(0, static_cast<std::size_t>(digits) - num.size(), '0');
    return (label == 1 ? "pos_" : "neg_") + num;
  };

  for (int label : {1, 0}) {
    for (int b = 0; b < cfg.bags_per_class; ++b) {
      int n = cfg.n_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.n_max - cfg.n_min + 1)));
      int n_inf = label == 1 ? static_cast<int>(std::ceil(cfg.positive_fraction * n)) : 0;
      if (n_inf > n) n_inf = n;
      // A positive bag with no background pool is filled entirely from
      // informative components.
      if (!has_background && label == 0)
        throw ConfigError("cannot draw negative bags when every component is informative");
      Bag bag;
      bag.id = bag_id(label, b);
      bag.label = label;
      bag.embeddings.resize(n, cfg.d);
      std::vector<int> components(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        int comp;
        if (i < n_inf)
          comp = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.s_informative)));
        else if (has_background)
          comp = background[rng.below(background.size())];
        else
          comp = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.s_informative)));
        components[static_cast<std::size_t>(i)] = comp;
        draw_instance(comp, bag.embeddings, i);
      }
      out.truth.component_of_instance[bag.id] = components;
      out.dataset.bags.push_back(std::move(bag));
    }
  }
  return out;
}

FoldAssignment split_folds(const Dataset& ds, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw ConfigError("need at least 2 folds");
  FoldAssignment fa;
  fa.n_folds = n_folds;
  Rng rng(derive_seed(seed, "folds"));

  // Bags get a random sort key per class, attached in ascending-id order so
  // the split depends only on (ids, labels, seed); equal keys fall back to
  // ascending bag id. Dealing continues one round-robin counter across
  // classes so both overall fold sizes and per-class counts stay within one
  // of each other.
  int cursor = 0;
  for (int cls : {0, 1}) {
    std::vector<std::string> ids;
    for (const auto& bag : ds.bags)
      if (bag.label == cls) ids.push_back(bag.id);
    if (static_cast<int>(ids.size()) < n_folds)
      throw ConfigError("class " + std::to_string(cls) + " has " +
                        std::to_string(ids.size()) + " bags, need >= " +
                        std::to_string(n_folds));
    std::sort(ids.begin(), ids.end());
    std::vector<std::pair<std::uint64_t, std::string>> keyed;
    keyed.reserve(ids.size());
    for (const auto& id : ids) keyed.emplace_back(rng.next_u64(), id);
    std::sort(keyed.begin(), keyed.end());
    for (const auto& [key, id] : keyed) {
      fa.fold_of_bag[id] = cursor % n_folds;
      ++cursor;
    }
  }
  return fa;
}

}  // namespace csmil
