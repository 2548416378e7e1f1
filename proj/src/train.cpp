#include "agest/train.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "agest/optimizer.hpp"

namespace agest {

namespace {

// Single seed stream per concern so config edits in one stage cannot shift
// another stage's draws.
constexpr std::uint64_t kMix = 0x9E3779B97F4A7C15ULL;

}  // namespace

Rng train_data_stream(std::uint64_t seed) { return Rng(seed * kMix + 11); }
Rng eval_data_stream(std::uint64_t seed) { return Rng(seed * kMix + 12); }
Rng model_stream(std::uint64_t seed) { return Rng(seed * kMix + 13); }
Rng benchmark_stream(std::uint64_t seed) { return Rng(seed * kMix + 14); }
Rng world_stream(std::uint64_t seed) { return Rng(seed * kMix + 15); }

std::pair<Dataset, Dataset> make_datasets(const RunConfig& rc) {
  Rng wr = world_stream(rc.seed);
  const SyntheticWorld world = make_world(rc.data, wr);
  Rng tr = train_data_stream(rc.seed);
  Dataset train = sample_dataset(rc.data, world, tr);
  DatasetConfig ec = rc.data;
  ec.size = rc.data.eval_size;
  Rng er = eval_data_stream(rc.seed);
  Dataset eval = sample_dataset(ec, world, er);
  return {std::move(train), std::move(eval)};
}

namespace {

std::size_t label_index(const AgeModel& model, int age) {
  if (age < model.age_min || age > model.age_max) {
    throw std::invalid_argument("label age outside the model's class range");
  }
  return std::size_t(age - model.age_min);
}

MarginVariant baseline_variant(const std::string& loss) {
  if (loss == "softmax") return MarginVariant::kSoftmax;
  if (loss == "cos") return MarginVariant::kCosMargin;
  return MarginVariant::kArcMargin;
}

struct OptimizerHandle {
  std::unique_ptr<SgdMomentum> sgd;
  std::unique_ptr<Adam> adam;

  static OptimizerHandle make(const TrainConfig& cfg, std::vector<ParamGroup> groups) {
    OptimizerHandle h;
    if (cfg.optimizer == "adam") {
      h.adam = std::make_unique<Adam>(std::move(groups), cfg.lr, 0.9, 0.999, 1e-8,
                                      cfg.weight_decay);
    } else {
      h.sgd = std::make_unique<SgdMomentum>(std::move(groups), cfg.lr, cfg.momentum,
                                            cfg.weight_decay);
    }
    return h;
  }
  void zero_grad() { sgd ? sgd->zero_grad() : adam->zero_grad(); }
  void step() { sgd ? sgd->step() : adam->step(); }
  void set_lr(double lr) { sgd ? sgd->set_lr(lr) : adam->set_lr(lr); }
};

// Margins, layer norms and biases train without decay.
bool decays(const std::string& name) {
  if (name.rfind("margins.", 0) == 0) return false;
  if (name.find("ln") != std::string::npos) return false;
  if (name.find("bias") != std::string::npos) return false;
  return true;
}

// Group feature blocks for the deviation statistics.
std::vector<DenseMatrix> split_by_group(const DenseMatrix& feats, const Dataset& ds) {
  std::vector<std::size_t> counts(4, 0);
  for (const SyntheticSample& s : ds.samples) counts[std::size_t(s.group)] += 1;
  std::vector<DenseMatrix> blocks;
  blocks.reserve(4);
  for (int g = 0; g < 4; ++g) blocks.emplace_back(counts[std::size_t(g)], feats.cols);
  std::vector<std::size_t> row(4, 0);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const int g = ds.samples[i].group;
    for (std::size_t j = 0; j < feats.cols; ++j) {
      blocks[std::size_t(g)].at(row[std::size_t(g)], j) = feats.at(i, j);
    }
    row[std::size_t(g)] += 1;
  }
  return blocks;
}

// Live margin-tuning state threaded between phases.
struct MarginTuner {
  rl::MarginSpaces spaces;
  rl::QNetwork online;
  rl::QNetwork target;
  std::unique_ptr<SgdMomentum> opt;
  rl::ReplayBuffer replay;
  long updates = 0;
  int phases_done = 0;
  int action_phases = 0;  // phases that take an action (all but the closing one)
  bool armed = false;     // spaces frozen and nets initialized
  std::array<bool, 3> has_prev{};
  std::array<rl::MdpState, 3> prev_state{};
  std::array<int, 3> prev_action{};
  std::array<double, 3> prev_objective{};

  explicit MarginTuner(std::size_t capacity) : replay(capacity) {}
};

struct GroupStats {
  double dev_inter = 0.0;  // state axis
  double objective = 0.0;  // reward axis
};

std::array<GroupStats, 3> deviation_stats(const DenseMatrix& feats, const Dataset& ds,
                                          rl::DInterMode mode) {
  const std::vector<DenseMatrix> blocks = split_by_group(feats, ds);
  std::array<GroupStats, 3> out{};
  for (int gi = 0; gi < 3; ++gi) {
    const int g = rl::adjustable_group(gi);
    const double di = rl::compute_d_intra(blocks, g);
    const double de = rl::compute_d_inter(blocks, g, mode);
    out[std::size_t(gi)].dev_inter = de;
    out[std::size_t(gi)].objective = rl::group_objective(di, de);
  }
  return out;
}

}  // namespace

ad::Var forward_sample(AgeModel& model, const SyntheticSample& s, const PatchGraph& g, Rng& rng,
                       bool training) {
  ad::Var x = model.image_mode ? patch_embeddings_var(s.image, model.patch_size, model.patch)
                               : ad::constant(s.node_features);
  return extractor_forward(x, g.adjacency, model.extractor, model.cfg.diffusion, rng, training);
}

DenseMatrix dataset_features(AgeModel& model, const Dataset& ds) {
  DenseMatrix out(ds.samples.size(), model.cfg.dim);
  Rng unused(0);  // eval mode draws nothing
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const PatchGraph g = sample_graph(ds.samples[i], ds.config);
    const ad::Var f = forward_sample(model, ds.samples[i], g, unused, false);
    for (std::size_t j = 0; j < out.cols; ++j) out.at(i, j) = f->value.at(0, j);
  }
  return out;
}

std::vector<double> predict_ages(AgeModel& model, const Dataset& ds) {
  std::vector<double> preds;
  preds.reserve(ds.samples.size());
  Rng unused(0);
  for (const SyntheticSample& s : ds.samples) {
    const PatchGraph g = sample_graph(s, ds.config);
    const ad::Var f = forward_sample(model, s, g, unused, false);
    const ad::Var logits = ad::scale(class_cosines(f, model.head), model.cfg.scale);
    const ad::Var pred = predict_age_expectation(logits, model.head.ages);
    preds.push_back(pred->value.at(0, 0));
  }
  return preds;
}

MetricsReport evaluate_model(AgeModel& model, const Dataset& ds) {
  const std::vector<double> preds = predict_ages(model, ds);
  std::vector<int> ages;
  ages.reserve(ds.samples.size());
  for (const SyntheticSample& s : ds.samples) ages.push_back(s.age);
  if (ds.config.label_sigma > 0.0) {
    const std::vector<double> stds(ds.samples.size(), ds.config.label_sigma);
    return evaluate_metrics(preds, ages, &stds);
  }
  return evaluate_metrics(preds, ages, nullptr);
}

namespace {

ad::Var batch_loss(AgeModel& model, const Dataset& ds, const std::vector<PatchGraph>& graphs,
                   const std::vector<std::size_t>& batch, Rng& rng, bool training) {
  std::vector<ad::Var> rows;
  rows.reserve(batch.size());
  std::vector<std::size_t> labels;
  labels.reserve(batch.size());
  DenseMatrix ages(batch.size(), 1);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const SyntheticSample& s = ds.samples[batch[i]];
    rows.push_back(forward_sample(model, s, graphs[batch[i]], rng, training));
    labels.push_back(label_index(model, s.age));
    ages.at(i, 0) = double(s.age);
  }
  const ad::Var feats = ad::concat_rows(rows);
  ad::Var ce;
  if (model.cfg.loss == "dgm") {
    ce = dgm_loss(feats, labels, model.head, model.margins);
  } else {
    const MarginVariant v = baseline_variant(model.cfg.loss);
    const double m = v == MarginVariant::kSoftmax ? 0.0 : model.cfg.fixed_margin;
    ce = unified_margin_loss(feats, labels, model.head, m, model.cfg.scale, v);
  }
  const ad::Var logits = ad::scale(class_cosines(feats, model.head), model.cfg.scale);
  const ad::Var pred = predict_age_expectation(logits, model.head.ages);
  const ad::Var l1 = ad::mean_all(ad::abs_v(ad::sub(pred, ad::constant(std::move(ages)))));
  return joint_loss(ce, l1, model.cfg.lambda);
}

// One margin-tuning phase: observe deviations on frozen features, learn from
// the transitions closed by this observation, then (except on the closing
// phase) epsilon-greedily adjust each long-tailed group's margin.
void run_phase(MarginTuner& t, AgeModel& model, const RunConfig& cfg, const Dataset& train_set,
               Rng& agent_rng, bool take_actions, std::ostream* log) {
  const DenseMatrix feats = dataset_features(model, train_set);
  const auto stats = deviation_stats(feats, train_set, cfg.rl.d_inter_mode());

  if (!t.armed) {
    double peak = 0.0;
    for (const GroupStats& s : stats) peak = std::max(peak, s.dev_inter);
    t.spaces.margins = cfg.rl.margins;
    t.spaces.kappa = cfg.rl.kappa;
    t.spaces.dev_buckets = cfg.rl.dev_buckets;
    t.spaces.dev_lo = 0.0;
    t.spaces.dev_hi = std::max(cfg.rl.dev_headroom * peak, 1e-6);
    t.spaces.validate();
    const std::size_t width = std::size_t(rl::num_states(t.spaces));
    t.online = rl::QNetwork::init(width, cfg.rl.agent.hidden, agent_rng);
    t.target = rl::QNetwork::init(width, cfg.rl.agent.hidden, agent_rng);
    t.target.copy_from(t.online);
    std::vector<ParamGroup> groups;
    for (Parameter* p : t.online.parameter_list()) groups.push_back({p, false});
    t.opt = std::make_unique<SgdMomentum>(std::move(groups), cfg.rl.agent.lr,
                                          cfg.rl.agent.momentum, 0.0);
    t.armed = true;
  }

  const std::size_t width = std::size_t(rl::num_states(t.spaces));
  std::array<rl::MdpState, 3> states{};
  for (int gi = 0; gi < 3; ++gi) {
    const int g = rl::adjustable_group(gi);
    states[std::size_t(gi)] = {g, t.spaces.dev_bucket(stats[std::size_t(gi)].dev_inter),
                               t.spaces.margin_bucket(model.margins.margin(g))};
    if (t.has_prev[std::size_t(gi)]) {
      rl::Transition tr;
      tr.state = rl::state_index(t.prev_state[std::size_t(gi)], t.spaces);
      tr.action = t.prev_action[std::size_t(gi)];
      tr.reward = rl::reward(t.prev_objective[std::size_t(gi)], stats[std::size_t(gi)].objective);
      tr.next_state = rl::state_index(states[std::size_t(gi)], t.spaces);
      tr.terminal = false;  // the tuning process has no absorbing state
      t.replay.push(tr);
    }
  }

  if (t.replay.size() >= cfg.rl.live_batch) {
    for (int u = 0; u < cfg.rl.updates_per_phase; ++u) {
      const auto batch = t.replay.sample(cfg.rl.live_batch, agent_rng);
      t.opt->zero_grad();
      const ad::Var loss = rl::dqn_loss(batch, t.online, t.target, cfg.rl.agent.gamma, width);
      if (!std::isfinite(loss->value.at(0, 0))) {
        throw std::runtime_error("margin tuner: non-finite dqn loss");
      }
      ad::backward(loss);
      t.opt->step();
      t.updates += 1;
      if (t.updates % std::max(1, cfg.rl.agent.target_sync) == 0) t.target.copy_from(t.online);
    }
  }

  if (take_actions) {
    // Linear epsilon decay over the action-taking phases.
    const double frac = t.action_phases <= 1
                            ? 1.0
                            : double(t.phases_done) / (cfg.rl.agent.eps_decay_fraction *
                                                       double(t.action_phases - 1));
    const double eps = cfg.rl.agent.eps_start +
                       std::min(1.0, frac) * (cfg.rl.agent.eps_end - cfg.rl.agent.eps_start);
    for (int gi = 0; gi < 3; ++gi) {
      const int g = rl::adjustable_group(gi);
      const int s_idx = rl::state_index(states[std::size_t(gi)], t.spaces);
      const DenseMatrix q = t.online.forward(rl::one_hot_rows({s_idx}, width));
      const int a = rl::epsilon_greedy(q, eps, agent_rng);
      const double moved = rl::apply_action(model.margins.margin(g), a, t.spaces);
      const double snapped = t.spaces.margins[std::size_t(t.spaces.margin_bucket(moved))];
      model.margins.set_margin(g, snapped);
      t.prev_state[std::size_t(gi)] = states[std::size_t(gi)];
      t.prev_action[std::size_t(gi)] = a;
      t.prev_objective[std::size_t(gi)] = stats[std::size_t(gi)].objective;
      t.has_prev[std::size_t(gi)] = true;
    }
    if (log != nullptr) {
      (*log) << "  margin phase " << t.phases_done << ": eps " << eps << " margins";
      for (int g = 0; g < kNumGroups; ++g) (*log) << ' ' << model.margins.margin(g);
      (*log) << '\n';
    }
  }
  t.phases_done += 1;
}

}  // namespace

TrainOutcome run_training(const RunConfig& cfg, AgeModel& model, const Dataset& train_set,
                          const Dataset& eval_set, const std::string& out_dir,
                          std::ostream* log) {
  cfg.validate();
  Rng train_rng(cfg.seed * kMix + 1);
  Rng agent_rng(cfg.seed * kMix + 2);

  std::vector<PatchGraph> graphs;
  graphs.reserve(train_set.samples.size());
  for (const SyntheticSample& s : train_set.samples) graphs.push_back(sample_graph(s, train_set.config));

  std::vector<ParamGroup> groups;
  for (auto& [name, p] : model.parameters()) groups.push_back({p, decays(name)});
  OptimizerHandle opt = OptimizerHandle::make(cfg.train, std::move(groups));

  MarginTuner tuner(cfg.rl.agent.replay_capacity);
  tuner.action_phases = (cfg.train.epochs + cfg.rl.phase_epochs - 1) / cfg.rl.phase_epochs;

  TrainOutcome out;
  std::string last_good = checkpoint_to_string(model);
  std::vector<std::size_t> order(train_set.samples.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    if (cfg.rl.enabled && epoch % cfg.rl.phase_epochs == 0) {
      run_phase(tuner, model, cfg, train_set, agent_rng, true, log);
    }
    opt.set_lr(cosine_lr(cfg.train.lr, cfg.train.lr_floor, epoch, cfg.train.epochs));
    train_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.train.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.train.batch_size);
        const std::vector<std::size_t> batch(order.begin() + std::ptrdiff_t(start),
                                             order.begin() + std::ptrdiff_t(end));
        opt.zero_grad();
        const ad::Var loss = batch_loss(model, train_set, graphs, batch, train_rng, true);
        const double lv = loss->value.at(0, 0);
        if (!std::isfinite(lv)) throw std::runtime_error("non-finite joint loss");
        ad::backward(loss);
        opt.step();
        model.head.renormalize();
        loss_sum += lv;
        batches += 1;
      }
    } catch (const std::runtime_error& e) {
      std::string where = "training diverged at epoch " + std::to_string(epoch) + ": " + e.what();
      if (!out_dir.empty()) {
        const std::string path = out_dir + "/checkpoint.last_good.json";
        write_file_atomic(path, last_good);
        where += "; last-good checkpoint written to " + path;
      }
      throw std::runtime_error(where);
    }

    EpochLog el;
    el.epoch = epoch;
    el.loss = batches == 0 ? 0.0 : loss_sum / double(batches);
    for (int g = 0; g < kNumGroups; ++g) el.margins[std::size_t(g)] = model.margins.margin(g);
    out.log.push_back(el);
    if (log != nullptr) {
      (*log) << "epoch " << (epoch + 1) << '/' << cfg.train.epochs << " loss " << el.loss << '\n';
    }
    last_good = checkpoint_to_string(model);
  }

  if (cfg.rl.enabled) {
    // Closing phase: observe the final deviations, learn, take no action.
    run_phase(tuner, model, cfg, train_set, agent_rng, false, log);
    out.rl_ran = true;
    out.spaces = tuner.spaces;
    const int S = rl::num_states(tuner.spaces);
    std::vector<int> all(std::size_t(S), 0);
    std::iota(all.begin(), all.end(), 0);
    out.q_table = tuner.online.forward(rl::one_hot_rows(all, std::size_t(S)));
    out.policy = rl::greedy_policy(out.q_table);
  }
  for (int g = 0; g < kNumGroups; ++g) out.final_margins[std::size_t(g)] = model.margins.margin(g);
  out.report = evaluate_model(model, eval_set);
  return out;
}

}  // namespace agest
