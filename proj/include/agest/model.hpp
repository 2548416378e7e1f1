#pragma once

#include <string>
#include <utility>
#include <vector>

#include "agest/config.hpp"
#include "agest/gcn.hpp"
#include "agest/graph.hpp"
#include "agest/margin.hpp"

namespace agest {

// Full estimator: optional patch projection, attention diffusion extractor,
// per-age classifier on the unit sphere, group margin parameters.
struct AgeModel {
  ModelConfig cfg;
  bool image_mode = false;
  std::size_t patch_size = 0;
  int age_min = 0;
  int age_max = 0;
  PatchEmbed patch;  // image mode only; empty tensors otherwise
  ExtractorParams extractor;
  ClassifierHead head;
  GroupMarginParams margins;

  static AgeModel init(const ModelConfig& cfg, const DatasetConfig& data, Rng& rng);

  // Every trainable tensor keyed by dotted path, deterministic order.
  std::vector<std::pair<std::string, Parameter*>> parameters();
};

// Versioned JSON snapshot of config + every tensor, written atomically.
void save_checkpoint(const AgeModel& model, const std::string& path);
std::string checkpoint_to_string(const AgeModel& model);

// Rebuilds the model from a snapshot; shape or schema mismatches throw
// std::runtime_error naming the offending tensor.
AgeModel load_checkpoint(const std::string& path);
AgeModel checkpoint_from_string(const std::string& text);

}  // namespace agest
