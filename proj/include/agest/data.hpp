#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "agest/config.hpp"
#include "agest/graph.hpp"
#include "agest/matrix.hpp"
#include "agest/rng.hpp"

namespace agest {

// One synthetic example. Vector mode fills node_features; image mode fills
// the patch grid instead and node features stay empty.
struct SyntheticSample {
  DenseMatrix node_features;  // nodes x dim
  PatchGrid image;
  int age = 0;
  int group = 0;
};

struct Dataset {
  DatasetConfig config;
  std::vector<SyntheticSample> samples;
};

// Largest-remainder apportionment of n over the four groups; remainder ties
// go to the lower group index. Throws std::invalid_argument when a group with
// positive proportion would receive zero samples.
std::array<std::size_t, 4> group_counts(std::size_t n, const std::array<double, 4>& proportions);

// Inclusive age band of a group clipped to [age_min, age_max]; throws when
// the intersection is empty.
std::pair<int, int> group_age_range(int group, int age_min, int age_max);

// Fixed geometry behind a dataset: age is the sole latent, swept along a
// half-circle arc in the plane spanned by an orthonormal basis pair, plus
// stable per-node offsets. Age groups are consecutive arc segments, so group
// difficulty comes from sample coverage, not from a group-identity feature.
// Train and eval sets drawn from the same world differ only in their sample
// draws, so evaluation measures generalization instead of transfer to an
// unrelated distribution. Image mode ignores the world (patch tones are a
// pure function of group and age).
struct SyntheticWorld {
  DenseMatrix basis_u;       // 1 x dim, unit
  DenseMatrix basis_v;       // 1 x dim, unit, orthogonal to basis_u
  DenseMatrix node_offsets;  // nodes x dim
};

SyntheticWorld make_world(const DatasetConfig& cfg, Rng& rng);

// Samples on the world's age arc: cos(phi) u + sin(phi) v + node offset +
// noise, phi linear in age over [age_min, age_max]. Exact per-group counts,
// group-major order. Every label satisfies group_of_age(age) == group.
Dataset sample_dataset(const DatasetConfig& cfg, const SyntheticWorld& world, Rng& rng);

// make_world + sample_dataset on one stream, for standalone sets.
Dataset generate_synthetic_dataset(const DatasetConfig& cfg, Rng& rng);

// FNV-1a over a canonical little-endian byte image (config header, then ages,
// groups, features per sample).
std::uint64_t dataset_digest(const Dataset& ds);

// Versioned JSON snapshot carrying config, samples, and the digest; loading
// re-verifies the digest and throws std::runtime_error on mismatch.
std::string dataset_to_string(const Dataset& ds);
Dataset dataset_from_string(const std::string& text);
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Static per-sample graph: KNN edges over raw node features (vector mode) or
// flattened patch pixels (image mode), symmetrized with self-loops. The
// graph's feature matrix carries whatever the edges were built from; image
// mode models read node features from the learned patch projection instead.
PatchGraph sample_graph(const SyntheticSample& s, const DatasetConfig& cfg);

}  // namespace agest
