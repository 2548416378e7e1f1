#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "agest/config.hpp"
#include "agest/data.hpp"
#include "agest/metrics.hpp"
#include "agest/model.hpp"
#include "agest/rl.hpp"

namespace agest {

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;                // mean joint loss over the epoch's batches
  std::array<double, 4> margins{};  // group margins in force during the epoch
};

struct TrainOutcome {
  MetricsReport report;
  std::vector<EpochLog> log;
  std::array<double, 4> final_margins{};
  // Margin-tuner artifacts; meaningful only when rl_ran.
  bool rl_ran = false;
  rl::MarginSpaces spaces;
  DenseMatrix q_table;      // states x actions
  std::vector<int> policy;  // greedy action per state
};

// Per-concern seed streams, so the same (seed, config) always yields the same
// data, initialization, and training draws no matter which subcommand runs.
Rng train_data_stream(std::uint64_t seed);
Rng eval_data_stream(std::uint64_t seed);
Rng model_stream(std::uint64_t seed);
Rng benchmark_stream(std::uint64_t seed);
Rng world_stream(std::uint64_t seed);

// Train and eval sets from one world: the eval set reuses the train
// geometry, differing only in sample draws (and in size via eval_size).
std::pair<Dataset, Dataset> make_datasets(const RunConfig& rc);

// Extractor output for one sample, 1 x dim. Training mode applies message
// dropout from `rng`; eval mode consumes no randomness.
ad::Var forward_sample(AgeModel& model, const SyntheticSample& s, const PatchGraph& g, Rng& rng,
                       bool training);

// One feature row per sample, eval mode.
DenseMatrix dataset_features(AgeModel& model, const Dataset& ds);

// Expected-age predictions from scaled class cosines, eval mode.
std::vector<double> predict_ages(AgeModel& model, const Dataset& ds);

MetricsReport evaluate_model(AgeModel& model, const Dataset& ds);

// Joint-loss training with optional alternating margin-tuning phases.
// Divergence (non-finite loss) throws std::runtime_error; when out_dir is
// non-empty the last finished epoch's snapshot is written there first as
// checkpoint.last_good.json. `log` may be null.
TrainOutcome run_training(const RunConfig& cfg, AgeModel& model, const Dataset& train_set,
                          const Dataset& eval_set, const std::string& out_dir, std::ostream* log);

}  // namespace agest
