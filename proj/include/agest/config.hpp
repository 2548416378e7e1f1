#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "agest/gcn.hpp"
#include "agest/rl.hpp"

namespace agest {

// Insertion-ordered so serialized configs and reports are byte-stable.
using Json = nlohmann::ordered_json;

// Synthetic dataset shape. Vector mode emits node feature matrices directly;
// image mode emits patch grids that the model embeds with a learned
// projection.
struct DatasetConfig {
  std::size_t size = 400;
  std::size_t eval_size = 100;
  int age_min = 1;
  int age_max = 90;
  // children, teenager, adult, senior; must sum to 1.
  std::array<double, 4> proportions = {0.25, 0.25, 0.25, 0.25};
  std::size_t nodes = 9;
  std::size_t dim = 16;
  std::size_t knn = 3;
  double noise = 0.25;
  // Annotation spread used for the epsilon error; 0 scores exact matches.
  double label_sigma = 2.0;
  bool image_mode = false;
  std::size_t image_size = 24;
  std::size_t patch_size = 8;

  void validate() const;
};

struct ModelConfig {
  std::size_t dim = 16;
  DiffusionConfig diffusion;
  double scale = 16.0;
  double initial_margin = 0.4;
  double lambda = 0.7;  // joint loss mix: lambda * margin CE + (1-lambda) * age L1
  // "dgm" group-aware quadratic margins, or a fixed-margin baseline:
  // "softmax" | "cos" | "arc".
  std::string loss = "dgm";
  double fixed_margin = 0.4;  // used by the cos / arc baselines

  void validate() const;
};

struct TrainConfig {
  int epochs = 12;
  std::size_t batch_size = 32;
  double lr = 1e-4;
  double lr_floor = 1e-6;  // cosine annealing target
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::string optimizer = "sgd";  // "sgd" | "adam"

  void validate() const;
};

// Margin-tuning settings. The agent block feeds both the enumerable
// simulator benchmark (`rl-train`) and the live loop inside `train`.
struct RlConfig {
  bool enabled = false;
  int phase_epochs = 2;       // training epochs between margin phases
  int updates_per_phase = 32; // DQN minibatch updates after each phase
  std::size_t live_batch = 8; // minibatch for live updates (replay starts tiny)
  double dev_headroom = 2.0;  // bucket range = headroom * max deviation at phase 0
  std::vector<double> margins = {0.2, 0.4, 0.6, 0.8};
  double kappa = 0.2;
  int dev_buckets = 4;
  std::string inter_mode = "literal";  // or "between_centers"
  rl::AgentConfig agent;

  rl::DInterMode d_inter_mode() const;
  void validate() const;
};

struct RunConfig {
  std::uint64_t seed = 1;
  DatasetConfig data;
  ModelConfig model;
  TrainConfig train;
  RlConfig rl;

  void validate() const;
};

void to_json(Json& j, const DatasetConfig& c);
void from_json(const Json& j, DatasetConfig& c);
void to_json(Json& j, const ModelConfig& c);
void from_json(const Json& j, ModelConfig& c);
void to_json(Json& j, const TrainConfig& c);
void from_json(const Json& j, TrainConfig& c);
namespace rl {
void to_json(Json& j, const AgentConfig& c);
void from_json(const Json& j, AgentConfig& c);
}  // namespace rl
void to_json(Json& j, const RlConfig& c);
void from_json(const Json& j, RlConfig& c);
void to_json(Json& j, const RunConfig& c);
void from_json(const Json& j, RunConfig& c);

// Parses and validates; unknown keys throw std::invalid_argument naming the
// key so typos in config files fail loudly instead of silently defaulting.
RunConfig parse_run_config(const Json& j);
RunConfig load_run_config(const std::string& path);

// Atomic write-then-rename; directories must exist.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace agest
