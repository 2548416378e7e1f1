#include "agest/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "agest/margin.hpp"

namespace agest {

namespace {

constexpr int kBandLo[4] = {0, 13, 18, 66};
constexpr int kBandHi[4] = {12, 17, 65, -1};  // senior is open-ended

constexpr double kPi = 3.14159265358979323846;

// Unit-normalized gaussian direction.
DenseMatrix random_direction(std::size_t dim, Rng& rng) {
  DenseMatrix v = DenseMatrix::randn(1, dim, rng);
  double norm = 0.0;
  for (double x : v.data) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) norm = 1.0;
  for (double& x : v.data) x /= norm;
  return v;
}

}  // namespace

std::array<std::size_t, 4> group_counts(std::size_t n, const std::array<double, 4>& proportions) {
  double sum = 0.0;
  for (double p : proportions) {
    if (p < 0.0) throw std::invalid_argument("group_counts: negative proportion");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw std::invalid_argument("group_counts: proportions must sum to 1");

  std::array<std::size_t, 4> counts{};
  std::array<double, 4> remainders{};
  std::size_t assigned = 0;
  for (int g = 0; g < 4; ++g) {
    const double exact = proportions[std::size_t(g)] * double(n);
    counts[std::size_t(g)] = std::size_t(std::floor(exact));
    remainders[std::size_t(g)] = exact - std::floor(exact);
    assigned += counts[std::size_t(g)];
  }
  // Hand out the leftover seats by remainder, ties toward the lower index.
  std::array<int, 4> order = {0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainders[std::size_t(a)] > remainders[std::size_t(b)]; });
  for (std::size_t i = 0; assigned < n; ++i) {
    counts[std::size_t(order[i % 4])] += 1;
    assigned += 1;
  }
  for (int g = 0; g < 4; ++g) {
    if (proportions[std::size_t(g)] > 0.0 && counts[std::size_t(g)] == 0) {
      throw std::invalid_argument(std::string("group_counts: group '") + group_name(g) +
                                  "' requested but rounds to zero samples");
    }
  }
  return counts;
}

std::pair<int, int> group_age_range(int group, int age_min, int age_max) {
  if (group < 0 || group >= kNumGroups) throw std::invalid_argument("group_age_range: bad group");
  const int lo = std::max(kBandLo[group], age_min);
  const int hi = kBandHi[group] < 0 ? age_max : std::min(kBandHi[group], age_max);
  if (lo > hi) {
    throw std::invalid_argument(std::string("group_age_range: group '") + group_name(group) +
                                "' band misses the configured age range");
  }
  return {lo, hi};
}

SyntheticWorld make_world(const DatasetConfig& cfg, Rng& rng) {
  SyntheticWorld w;
  w.basis_u = random_direction(cfg.dim, rng);
  // Gram-Schmidt the second direction so the age arc is a true circle.
  DenseMatrix v = random_direction(cfg.dim, rng);
  double dot = 0.0;
  for (std::size_t j = 0; j < cfg.dim; ++j) dot += v.at(0, j) * w.basis_u.at(0, j);
  double norm2 = 0.0;
  for (std::size_t j = 0; j < cfg.dim; ++j) {
    v.at(0, j) -= dot * w.basis_u.at(0, j);
    norm2 += v.at(0, j) * v.at(0, j);
  }
  if (norm2 <= 1e-12) throw std::runtime_error("make_world: degenerate arc basis");
  for (std::size_t j = 0; j < cfg.dim; ++j) v.at(0, j) /= std::sqrt(norm2);
  w.basis_v = std::move(v);
  w.node_offsets = DenseMatrix::randn(cfg.nodes, cfg.dim, rng, 0.5);
  return w;
}

Dataset sample_dataset(const DatasetConfig& cfg, const SyntheticWorld& world, Rng& rng) {
  cfg.validate();
  if (!cfg.image_mode) {
    if (world.basis_u.cols != cfg.dim || world.basis_v.cols != cfg.dim ||
        world.node_offsets.rows != cfg.nodes || world.node_offsets.cols != cfg.dim) {
      throw std::invalid_argument("sample_dataset: world shape does not match config");
    }
  }
  const auto counts = group_counts(cfg.size, cfg.proportions);
  const DenseMatrix& node_offsets = world.node_offsets;
  const double age_span = double(std::max(cfg.age_max - cfg.age_min, 1));

  Dataset ds;
  ds.config = cfg;
  ds.samples.reserve(cfg.size);
  for (int g = 0; g < 4; ++g) {
    if (counts[std::size_t(g)] == 0) continue;
    const auto [lo, hi] = group_age_range(g, cfg.age_min, cfg.age_max);
    for (std::size_t k = 0; k < counts[std::size_t(g)]; ++k) {
      SyntheticSample s;
      s.group = g;
      s.age = lo + int(rng.uniform_index(std::size_t(hi - lo + 1)));
      const double a = double(s.age) / double(std::max(cfg.age_max, 1));
      if (cfg.image_mode) {
        s.image = PatchGrid(cfg.image_size, cfg.image_size);
        // Per-patch base tone from (group, age, patch), pixel-level noise.
        const std::size_t per_side = cfg.image_size / cfg.patch_size;
        for (std::size_t y = 0; y < cfg.image_size; ++y) {
          for (std::size_t x = 0; x < cfg.image_size; ++x) {
            const std::size_t patch = (y / cfg.patch_size) * per_side + x / cfg.patch_size;
            for (std::size_t c = 0; c < 3; ++c) {
              const double base = 0.5 + 0.35 * std::tanh(0.8 * double(g) - 1.2 + 1.5 * a +
                                                         0.3 * double(patch) - 0.1 * double(c));
              const double v = base + cfg.noise * 0.1 * rng.normal();
              s.image.at(y, x, c) = std::clamp(v, 0.0, 1.0);
            }
          }
        }
      } else {
        const double phi = kPi * double(s.age - cfg.age_min) / age_span;
        const double cu = std::cos(phi);
        const double sv = std::sin(phi);
        s.node_features = DenseMatrix(cfg.nodes, cfg.dim);
        for (std::size_t i = 0; i < cfg.nodes; ++i) {
          for (std::size_t j = 0; j < cfg.dim; ++j) {
            const double v = cu * world.basis_u.at(0, j) + sv * world.basis_v.at(0, j) +
                             node_offsets.at(i, j) + cfg.noise * rng.normal();
            s.node_features.at(i, j) = v;
          }
        }
      }
      if (group_of_age(s.age) != g) throw std::logic_error("sample_dataset: band error");
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

Dataset generate_synthetic_dataset(const DatasetConfig& cfg, Rng& rng) {
  cfg.validate();
  const SyntheticWorld world = make_world(cfg, rng);
  return sample_dataset(cfg, world, rng);
}

namespace {

struct Fnv1a {
  std::uint64_t h = 14695981039346656037ULL;
  void bytes(const void* p, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
    bytes(b, 8);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
};

}  // namespace

std::uint64_t dataset_digest(const Dataset& ds) {
  Fnv1a f;
  f.u64(ds.samples.size());
  f.u64(ds.config.dim);
  f.u64(ds.config.nodes);
  for (const SyntheticSample& s : ds.samples) {
    f.u64(std::uint64_t(s.age));
    f.u64(std::uint64_t(s.group));
    for (double v : s.node_features.data) f.f64(v);
    for (double v : s.image.pixels) f.f64(v);
  }
  return f.h;
}

PatchGraph sample_graph(const SyntheticSample& s, const DatasetConfig& cfg) {
  DenseMatrix x =
      cfg.image_mode ? flatten_patches(s.image, cfg.patch_size) : s.node_features;
  const auto edges = knn_edges(x, cfg.knn);
  return build_graph(std::move(x), edges);
}

namespace {
constexpr const char* kDatasetSchema = "agest.dataset/1";
}

std::string dataset_to_string(const Dataset& ds) {
  Json j;
  j["schema"] = kDatasetSchema;
  Json c;
  to_json(c, ds.config);
  j["config"] = c;
  j["digest"] = dataset_digest(ds);
  Json samples = Json::array();
  for (const SyntheticSample& s : ds.samples) {
    Json item = Json{{"age", s.age}, {"group", s.group}};
    if (ds.config.image_mode) {
      item["image"] = Json{{"height", s.image.height},
                           {"width", s.image.width},
                           {"pixels", s.image.pixels}};
    } else {
      item["features"] = Json{{"rows", s.node_features.rows},
                              {"cols", s.node_features.cols},
                              {"data", s.node_features.data}};
    }
    samples.push_back(item);
  }
  j["samples"] = samples;
  return j.dump() + "\n";
}

Dataset dataset_from_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("dataset parse error: ") + e.what());
  }
  if (!j.contains("schema") || j.at("schema").get<std::string>() != kDatasetSchema) {
    throw std::runtime_error("dataset: unsupported schema");
  }
  Dataset ds;
  from_json(j.at("config"), ds.config);
  ds.config.validate();
  for (const Json& item : j.at("samples")) {
    SyntheticSample s;
    s.age = item.at("age").get<int>();
    s.group = item.at("group").get<int>();
    if (group_of_age(s.age) != s.group) throw std::runtime_error("dataset: group/age mismatch");
    if (ds.config.image_mode) {
      const Json& im = item.at("image");
      s.image = PatchGrid(im.at("height").get<std::size_t>(), im.at("width").get<std::size_t>());
      std::vector<double> px = im.at("pixels").get<std::vector<double>>();
      if (px.size() != s.image.pixels.size()) throw std::runtime_error("dataset: pixel count");
      s.image.pixels = std::move(px);
    } else {
      const Json& f = item.at("features");
      const auto rows = f.at("rows").get<std::size_t>();
      const auto cols = f.at("cols").get<std::size_t>();
      std::vector<double> data = f.at("data").get<std::vector<double>>();
      if (data.size() != rows * cols) throw std::runtime_error("dataset: feature count");
      s.node_features = DenseMatrix(rows, cols, std::move(data));
    }
    ds.samples.push_back(std::move(s));
  }
  if (dataset_digest(ds) != j.at("digest").get<std::uint64_t>()) {
    throw std::runtime_error("dataset: digest mismatch");
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  write_file_atomic(path, dataset_to_string(ds));
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return dataset_from_string(ss.str());
}

}  // namespace agest
