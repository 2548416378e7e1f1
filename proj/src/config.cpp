#include "agest/config.hpp"

#include "agest/margin.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <stdexcept>

namespace agest {

namespace {

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

// Unknown keys are config-file typos; reject instead of silently defaulting.
void check_keys(const Json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(std::string(where) + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!ok.count(item.key())) fail(std::string(where) + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void get_if(const Json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

// Age bands behind group_of_age; senior is open-ended.
constexpr int kBandLo[4] = {0, 13, 18, 66};
constexpr int kBandHi[4] = {12, 17, 65, -1};

}  // namespace

void DatasetConfig::validate() const {
  if (size == 0) fail("dataset.size must be positive");
  if (eval_size == 0) fail("dataset.eval_size must be positive");
  if (age_min < 0 || age_max < age_min) fail("dataset age range invalid");
  double sum = 0.0;
  for (double p : proportions) {
    if (p < 0.0) fail("dataset.proportions must be non-negative");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-9) fail("dataset.proportions must sum to 1");
  for (int g = 0; g < 4; ++g) {
    if (proportions[std::size_t(g)] == 0.0) continue;
    const int lo = std::max(kBandLo[g], age_min);
    const int hi = kBandHi[g] < 0 ? age_max : std::min(kBandHi[g], age_max);
    if (lo > hi) {
      fail(std::string("dataset: group '") + group_name(g) +
           "' has positive proportion but its age band misses [age_min, age_max]");
    }
  }
  if (dim == 0) fail("dataset.dim must be positive");
  if (nodes < 2) fail("dataset.nodes must be at least 2");
  if (knn == 0 || knn >= nodes) fail("dataset.knn must satisfy 1 <= knn < nodes");
  if (noise < 0.0) fail("dataset.noise must be non-negative");
  if (label_sigma < 0.0) fail("dataset.label_sigma must be non-negative");
  if (image_mode) {
    if (patch_size == 0 || image_size % patch_size != 0) {
      fail("dataset.image_size must be divisible by patch_size");
    }
    const std::size_t per_side = image_size / patch_size;
    if (nodes != per_side * per_side) {
      fail("dataset.nodes must equal (image_size / patch_size)^2 in image mode");
    }
  }
}

void ModelConfig::validate() const {
  if (dim == 0) fail("model.dim must be positive");
  if (diffusion.heads == 0 || dim % diffusion.heads != 0) {
    fail("model.dim must be divisible by diffusion.heads");
  }
  if (diffusion.layers == 0) fail("model.diffusion.layers must be positive");
  if (diffusion.max_hops == 0) fail("model.diffusion.max_hops must be positive");
  if (diffusion.drop_ratio < 0.0 || diffusion.drop_ratio >= 1.0) {
    fail("model.diffusion.drop_ratio must lie in [0, 1)");
  }
  if (diffusion.leaky_slope <= 0.0 || diffusion.leaky_slope >= 1.0) {
    fail("model.diffusion.leaky_slope must lie in (0, 1)");
  }
  if (diffusion.use_power_iteration) {
    if (diffusion.power_iters == 0) fail("model.diffusion.power_iters must be positive");
    if (diffusion.spectral_scale <= 0.0 || diffusion.spectral_scale >= 1.0) {
      fail("model.diffusion.spectral_scale must lie in (0, 1)");
    }
  }
  if (scale <= 0.0) fail("model.scale must be positive");
  if (initial_margin < 0.0) fail("model.initial_margin must be non-negative");
  if (lambda < 0.0 || lambda > 1.0) fail("model.lambda must lie in [0, 1]");
  if (loss != "dgm" && loss != "softmax" && loss != "cos" && loss != "arc") {
    fail("model.loss must be one of dgm | softmax | cos | arc");
  }
  if (fixed_margin < 0.0) fail("model.fixed_margin must be non-negative");
}

void TrainConfig::validate() const {
  if (epochs <= 0) fail("train.epochs must be positive");
  if (batch_size == 0) fail("train.batch_size must be positive");
  if (lr <= 0.0) fail("train.lr must be positive");
  if (lr_floor <= 0.0 || lr_floor > lr) fail("train.lr_floor must lie in (0, lr]");
  if (momentum < 0.0 || momentum >= 1.0) fail("train.momentum must lie in [0, 1)");
  if (weight_decay < 0.0) fail("train.weight_decay must be non-negative");
  if (optimizer != "sgd" && optimizer != "adam") fail("train.optimizer must be sgd | adam");
}

rl::DInterMode RlConfig::d_inter_mode() const {
  if (inter_mode == "literal") return rl::DInterMode::kLiteralPeak;
  if (inter_mode == "between_centers") return rl::DInterMode::kBetweenCenters;
  fail("rl.inter_mode must be literal | between_centers");
  return rl::DInterMode::kLiteralPeak;
}

void RlConfig::validate() const {
  if (phase_epochs <= 0) fail("rl.phase_epochs must be positive");
  if (updates_per_phase < 0) fail("rl.updates_per_phase must be non-negative");
  if (live_batch == 0) fail("rl.live_batch must be positive");
  if (dev_headroom < 1.0) fail("rl.dev_headroom must be at least 1");
  if (margins.size() < 2) fail("rl.margins needs at least 2 grid points");
  for (std::size_t i = 1; i < margins.size(); ++i) {
    if (!(margins[i] > margins[i - 1])) fail("rl.margins must be strictly increasing");
    if (std::fabs((margins[i] - margins[i - 1]) - kappa) > 1e-9) {
      fail("rl.kappa must equal the margin grid spacing");
    }
  }
  if (dev_buckets <= 0) fail("rl.dev_buckets must be positive");
  d_inter_mode();
  agent.validate();
}

void RunConfig::validate() const {
  data.validate();
  model.validate();
  train.validate();
  rl.validate();
  if (model.dim != data.dim && !data.image_mode) {
    fail("model.dim must match dataset.dim in vector mode");
  }
}

void to_json(Json& j, const DatasetConfig& c) {
  j = Json{{"size", c.size},
           {"eval_size", c.eval_size},
           {"age_min", c.age_min},
           {"age_max", c.age_max},
           {"proportions", c.proportions},
           {"nodes", c.nodes},
           {"dim", c.dim},
           {"knn", c.knn},
           {"noise", c.noise},
           {"label_sigma", c.label_sigma},
           {"image_mode", c.image_mode},
           {"image_size", c.image_size},
           {"patch_size", c.patch_size}};
}

void from_json(const Json& j, DatasetConfig& c) {
  check_keys(j, "dataset",
             {"size", "eval_size", "age_min", "age_max", "proportions", "nodes", "dim", "knn",
              "noise", "label_sigma", "image_mode", "image_size", "patch_size"});
  get_if(j, "size", c.size);
  get_if(j, "eval_size", c.eval_size);
  get_if(j, "age_min", c.age_min);
  get_if(j, "age_max", c.age_max);
  get_if(j, "proportions", c.proportions);
  get_if(j, "nodes", c.nodes);
  get_if(j, "dim", c.dim);
  get_if(j, "knn", c.knn);
  get_if(j, "noise", c.noise);
  get_if(j, "label_sigma", c.label_sigma);
  get_if(j, "image_mode", c.image_mode);
  get_if(j, "image_size", c.image_size);
  get_if(j, "patch_size", c.patch_size);
}

static void to_json_diffusion(Json& j, const DiffusionConfig& c) {
  j = Json{{"max_hops", c.max_hops},
           {"heads", c.heads},
           {"layers", c.layers},
           {"drop_ratio", c.drop_ratio},
           {"leaky_slope", c.leaky_slope},
           {"use_power_iteration", c.use_power_iteration},
           {"power_iters", c.power_iters},
           {"spectral_scale", c.spectral_scale}};
}

static void from_json_diffusion(const Json& j, DiffusionConfig& c) {
  check_keys(j, "model.diffusion",
             {"max_hops", "heads", "layers", "drop_ratio", "leaky_slope", "use_power_iteration",
              "power_iters", "spectral_scale"});
  get_if(j, "max_hops", c.max_hops);
  get_if(j, "heads", c.heads);
  get_if(j, "layers", c.layers);
  get_if(j, "drop_ratio", c.drop_ratio);
  get_if(j, "leaky_slope", c.leaky_slope);
  get_if(j, "use_power_iteration", c.use_power_iteration);
  get_if(j, "power_iters", c.power_iters);
  get_if(j, "spectral_scale", c.spectral_scale);
}

void to_json(Json& j, const ModelConfig& c) {
  Json d;
  to_json_diffusion(d, c.diffusion);
  j = Json{{"dim", c.dim},
           {"diffusion", d},
           {"scale", c.scale},
           {"initial_margin", c.initial_margin},
           {"lambda", c.lambda},
           {"loss", c.loss},
           {"fixed_margin", c.fixed_margin}};
}

void from_json(const Json& j, ModelConfig& c) {
  check_keys(j, "model",
             {"dim", "diffusion", "scale", "initial_margin", "lambda", "loss", "fixed_margin"});
  get_if(j, "dim", c.dim);
  if (j.contains("diffusion")) from_json_diffusion(j.at("diffusion"), c.diffusion);
  get_if(j, "scale", c.scale);
  get_if(j, "initial_margin", c.initial_margin);
  get_if(j, "lambda", c.lambda);
  get_if(j, "loss", c.loss);
  get_if(j, "fixed_margin", c.fixed_margin);
}

void to_json(Json& j, const TrainConfig& c) {
  j = Json{{"epochs", c.epochs},       {"batch_size", c.batch_size},
           {"lr", c.lr},               {"lr_floor", c.lr_floor},
           {"momentum", c.momentum},   {"weight_decay", c.weight_decay},
           {"optimizer", c.optimizer}};
}

void from_json(const Json& j, TrainConfig& c) {
  check_keys(j, "train",
             {"epochs", "batch_size", "lr", "lr_floor", "momentum", "weight_decay", "optimizer"});
  get_if(j, "epochs", c.epochs);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "lr", c.lr);
  get_if(j, "lr_floor", c.lr_floor);
  get_if(j, "momentum", c.momentum);
  get_if(j, "weight_decay", c.weight_decay);
  get_if(j, "optimizer", c.optimizer);
}

namespace rl {

void to_json(Json& j, const AgentConfig& c) {
  j = Json{{"episodes", c.episodes},
           {"steps_per_episode", c.steps_per_episode},
           {"replay_capacity", c.replay_capacity},
           {"batch_size", c.batch_size},
           {"min_replay", c.min_replay},
           {"hidden", c.hidden},
           {"gamma", c.gamma},
           {"lr", c.lr},
           {"lr_floor", c.lr_floor},
           {"momentum", c.momentum},
           {"eps_start", c.eps_start},
           {"eps_end", c.eps_end},
           {"eps_decay_fraction", c.eps_decay_fraction},
           {"target_sync", c.target_sync},
           {"bootstrap_on_truncation", c.bootstrap_on_truncation}};
}

void from_json(const Json& j, AgentConfig& c) {
  check_keys(j, "rl.agent",
             {"episodes", "steps_per_episode", "replay_capacity", "batch_size", "min_replay",
              "hidden", "gamma", "lr", "lr_floor", "momentum", "eps_start", "eps_end",
              "eps_decay_fraction", "target_sync", "bootstrap_on_truncation"});
  get_if(j, "episodes", c.episodes);
  get_if(j, "steps_per_episode", c.steps_per_episode);
  get_if(j, "replay_capacity", c.replay_capacity);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "min_replay", c.min_replay);
  get_if(j, "hidden", c.hidden);
  get_if(j, "gamma", c.gamma);
  get_if(j, "lr", c.lr);
  get_if(j, "lr_floor", c.lr_floor);
  get_if(j, "momentum", c.momentum);
  get_if(j, "eps_start", c.eps_start);
  get_if(j, "eps_end", c.eps_end);
  get_if(j, "eps_decay_fraction", c.eps_decay_fraction);
  get_if(j, "target_sync", c.target_sync);
  get_if(j, "bootstrap_on_truncation", c.bootstrap_on_truncation);
}

}  // namespace rl

void to_json(Json& j, const RlConfig& c) {
  Json a;
  rl::to_json(a, c.agent);
  j = Json{{"enabled", c.enabled},
           {"phase_epochs", c.phase_epochs},
           {"updates_per_phase", c.updates_per_phase},
           {"live_batch", c.live_batch},
           {"dev_headroom", c.dev_headroom},
           {"margins", c.margins},
           {"kappa", c.kappa},
           {"dev_buckets", c.dev_buckets},
           {"inter_mode", c.inter_mode},
           {"agent", a}};
}

void from_json(const Json& j, RlConfig& c) {
  check_keys(j, "rl",
             {"enabled", "phase_epochs", "updates_per_phase", "live_batch", "dev_headroom",
              "margins", "kappa", "dev_buckets", "inter_mode", "agent"});
  get_if(j, "enabled", c.enabled);
  get_if(j, "phase_epochs", c.phase_epochs);
  get_if(j, "updates_per_phase", c.updates_per_phase);
  get_if(j, "live_batch", c.live_batch);
  get_if(j, "dev_headroom", c.dev_headroom);
  get_if(j, "margins", c.margins);
  get_if(j, "kappa", c.kappa);
  get_if(j, "dev_buckets", c.dev_buckets);
  get_if(j, "inter_mode", c.inter_mode);
  if (j.contains("agent")) rl::from_json(j.at("agent"), c.agent);
}

void to_json(Json& j, const RunConfig& c) {
  Json d, m, t, r;
  to_json(d, c.data);
  to_json(m, c.model);
  to_json(t, c.train);
  to_json(r, c.rl);
  j = Json{{"seed", c.seed}, {"data", d}, {"model", m}, {"train", t}, {"rl", r}};
}

void from_json(const Json& j, RunConfig& c) {
  check_keys(j, "config", {"seed", "data", "model", "train", "rl"});
  get_if(j, "seed", c.seed);
  if (j.contains("data")) from_json(j.at("data"), c.data);
  if (j.contains("model")) from_json(j.at("model"), c.model);
  if (j.contains("train")) from_json(j.at("train"), c.train);
  if (j.contains("rl")) from_json(j.at("rl"), c.rl);
}

RunConfig parse_run_config(const Json& j) {
  RunConfig c;
  from_json(j, c);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }
  return parse_run_config(j);
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out.write(content.data(), std::streamsize(content.size()));
    if (!out.good()) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("rename failed: " + path);
  }
}

}  // namespace agest
