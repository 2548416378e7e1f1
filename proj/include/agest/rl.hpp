#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "agest/autodiff.hpp"
#include "agest/matrix.hpp"
#include "agest/rng.hpp"

namespace agest::rl {

// Margin and deviation discretization. Margins come from the fixed grid; the
// deviation axis is cut into equal-width buckets whose range is frozen when
// the first tuning phase observes it.
struct MarginSpaces {
  std::vector<double> margins = {0.2, 0.4, 0.6, 0.8};
  double kappa = 0.2;       // action step; equals the margin grid spacing
  double dev_lo = 0.0;      // deviation range covered by the buckets
  double dev_hi = 1.0;
  int dev_buckets = 4;

  void validate() const;  // strictly increasing margins, positive-width range
  int margin_bucket(double m) const;     // nearest grid point
  int dev_bucket(double dev) const;      // clamped into [0, dev_buckets)
  double dev_representative(int bucket) const;  // bucket midpoint
  double min_margin() const { return margins.front(); }
  double max_margin() const { return margins.back(); }
  int num_margins() const { return int(margins.size()); }
};

// Adjustable long-tailed groups; the adult group (2) is the fixed anchor and
// never appears in a state.
inline constexpr std::array<int, 3> kAdjustableGroups = {0, 1, 3};
int adjustable_index(int group);  // 0,1,3 -> 0,1,2; anything else throws
int adjustable_group(int index);

struct MdpState {
  int group = 0;     // one of kAdjustableGroups
  int d_bucket = 0;  // deviation bucket
  int m_bucket = 0;  // margin bucket
};
bool operator==(const MdpState& a, const MdpState& b);

int num_states(const MarginSpaces& sp);
int state_index(const MdpState& s, const MarginSpaces& sp);
MdpState state_from_index(int idx, const MarginSpaces& sp);

// Actions: index 0 shrinks the margin by kappa, 1 keeps it, 2 grows it.
inline constexpr int kNumActions = 3;
int action_delta(int action);  // -1, 0, +1

// New margin after an action, clamped to the margin grid's range.
double apply_action(double margin, int action, const MarginSpaces& sp);

// --- deviation statistics ----------------------------------------------------

// Mean cosine similarity between a group's unit features and its renormalized
// center; higher means tighter.
double intra_class_similarity(const DenseMatrix& features);
// Peak cosine similarity to the center (the literal per-group statistic; the
// mean over samples of a k-max is the k-max itself).
double inter_class_similarity(const DenseMatrix& features);

enum class DInterMode { kLiteralPeak, kBetweenCenters };

// |stat_i - stat_adult| for the intra / inter statistics. group_features is
// indexed by group id and must hold a row-block per group; groups i and 2 must
// be non-empty (unless i == 2, which is identically 0).
double compute_d_intra(const std::vector<DenseMatrix>& group_features, int group);
double compute_d_inter(const std::vector<DenseMatrix>& group_features, int group,
                       DInterMode mode = DInterMode::kLiteralPeak);

// Negated total deviation; the quantity the tuner drives toward 0.
double group_objective(double d_intra, double d_inter);
// r = objective_next - objective_prev.
double reward(double objective_prev, double objective_next);

// --- Q-network ---------------------------------------------------------------

// One-hot state encoding -> tanh hidden layer -> one Q-value per action.
struct QNetwork {
  Parameter w1;  // inputs x hidden
  Parameter b1;  // 1 x hidden
  Parameter w2;  // hidden x actions
  Parameter b2;  // 1 x actions

  static QNetwork init(std::size_t inputs, std::size_t hidden, Rng& rng);
  std::size_t inputs() const { return w1.value.rows; }
  std::size_t hidden() const { return w1.value.cols; }

  DenseMatrix forward(const DenseMatrix& x) const;  // batch x actions
  ad::Var forward(const ad::Var& x);
  std::vector<Parameter*> parameter_list();
  void copy_from(const QNetwork& other);  // target-network sync
};

DenseMatrix one_hot_rows(const std::vector<int>& indices, std::size_t width);

// --- replay ------------------------------------------------------------------

struct Transition {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  bool terminal = false;  // true only for absorbing ends, not budget cuts
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(const Transition& t);
  std::size_t size() const { return store_.size(); }
  std::size_t capacity() const { return capacity_; }
  // Uniform sample with replacement.
  std::vector<Transition> sample(std::size_t batch, Rng& rng) const;

 private:
  std::vector<Transition> store_;
  std::size_t capacity_;
  std::size_t head_ = 0;
};

// Mean squared TD error; terminal transitions use y = r, the rest bootstrap
// through the frozen target network.
ad::Var dqn_loss(const std::vector<Transition>& batch, QNetwork& online, const QNetwork& target,
                 double gamma, std::size_t state_width);

// q_row is 1 x actions; ties resolve to the lowest action index.
int epsilon_greedy(const DenseMatrix& q_row, double eps, Rng& rng);

// --- exact solver ------------------------------------------------------------

// Deterministic finite MDP: next[s][a], reward[s][a], terminal[s][a].
struct FiniteMdp {
  int states = 0;
  int actions = 0;
  std::vector<std::vector<int>> next;
  std::vector<std::vector<double>> reward;
  std::vector<std::vector<bool>> terminal;

  void validate() const;
};

// Synchronous Bellman-optimality iteration to within tol (sup norm).
DenseMatrix tabular_q_iteration(const FiniteMdp& mdp, double gamma, double tol = 1e-10,
                                int max_iters = 100000);

std::vector<int> greedy_policy(const DenseMatrix& q_table);

// --- environments and training -----------------------------------------------

class Env {
 public:
  virtual ~Env() = default;
  virtual int num_states() const = 0;
  // Starts an episode and returns the initial state index.
  virtual int reset(Rng& rng) = 0;
  struct Outcome {
    int next = 0;
    double reward = 0.0;
    bool terminal = false;
  };
  virtual Outcome step(int action, Rng& rng) = 0;
};

struct AgentConfig {
  // Many short episodes: exploring starts only sample a fresh state at
  // reset, so transient states are covered by episode count, not length.
  int episodes = 6400;
  int steps_per_episode = 8;
  std::size_t replay_capacity = 10000;
  std::size_t batch_size = 32;
  std::size_t min_replay = 256;  // warmup before updates start
  std::size_t hidden = 32;
  double gamma = 0.9;
  double lr = 0.05;
  // Cosine-annealed toward this floor over the step budget; late-phase
  // gradient noise must drop below the MDP's action-value gaps.
  double lr_floor = 5e-4;
  double momentum = 0.9;
  double eps_start = 1.0;
  double eps_end = 0.05;
  // Linear decay reaches eps_end after this fraction of the step budget.
  double eps_decay_fraction = 0.8;
  int target_sync = 100;  // updates between target refreshes
  // Budget-exhausted episodes still bootstrap; only absorbing ends cut the
  // return.
  bool bootstrap_on_truncation = true;

  void validate() const;
};

struct TrainedAgent {
  QNetwork online;
  DenseMatrix q_table;       // states x actions, greedy snapshot
  std::vector<int> policy;   // argmax per state
  double final_loss = 0.0;
  long updates = 0;
};

// Throws std::runtime_error with step diagnostics if the loss goes non-finite.
TrainedAgent train_agent(Env& env, const AgentConfig& cfg, Rng& rng);

// --- margin-dynamics simulator -------------------------------------------------

// Relaxation model of how a group's total deviation responds to its margin:
// every step the deviation moves halfway toward a margin-dependent target and
// is then snapped to its bucket representative, so the process is exactly
// Markov on the discrete states and tabular iteration applies.
struct SimGroupProfile {
  double base = 0.1;        // deviation floor at the optimal margin
  double slope = 0.5;       // growth per unit of margin error
  double opt_margin = 0.6;  // margin minimizing the settled deviation
};

class MarginSimEnv : public Env {
 public:
  MarginSimEnv(MarginSpaces spaces, std::array<SimGroupProfile, 3> profiles,
               double relax = 0.5);

  int num_states() const override;
  int reset(Rng& rng) override;
  Outcome step(int action, Rng& rng) override;

  const MarginSpaces& spaces() const { return spaces_; }
  double settled_deviation(int group, double margin) const;
  // Exact enumeration of the same dynamics for the tabular oracle.
  FiniteMdp as_mdp() const;

 private:
  Outcome transition(int state_idx, int action) const;

  MarginSpaces spaces_;
  std::array<SimGroupProfile, 3> profiles_;
  double relax_;
  int state_ = 0;
};

// Default simulator: the standard margin grid with deviation buckets over
// [0, 0.8] and per-group profiles steep enough that each margin settles in a
// distinct bucket; the teenager group prefers the largest margin.
MarginSimEnv default_margin_sim();

}  // namespace agest::rl
