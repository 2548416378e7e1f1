#include "agest/rl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "agest/optimizer.hpp"

namespace agest::rl {

void MarginSpaces::validate() const {
  if (margins.size() < 2) throw std::invalid_argument("MarginSpaces: need at least 2 margins");
  for (std::size_t i = 1; i < margins.size(); ++i) {
    if (!(margins[i] > margins[i - 1]))
      throw std::invalid_argument("MarginSpaces: margins must be strictly increasing");
  }
  if (!(kappa > 0.0)) throw std::invalid_argument("MarginSpaces: kappa must be positive");
  if (!(dev_hi > dev_lo)) throw std::invalid_argument("MarginSpaces: empty deviation range");
  if (dev_buckets < 1) throw std::invalid_argument("MarginSpaces: need at least 1 bucket");
}

int MarginSpaces::margin_bucket(double m) const {
  // Nearest grid point: repeated +-kappa steps drift by ulps, so exact
  // matching would misfile them.
  int best = 0;
  double best_dist = std::abs(m - margins[0]);
  for (std::size_t i = 1; i < margins.size(); ++i) {
    const double d = std::abs(m - margins[i]);
    if (d < best_dist) {
      best = int(i);
      best_dist = d;
    }
  }
  return best;
}

int MarginSpaces::dev_bucket(double dev) const {
  const double width = (dev_hi - dev_lo) / double(dev_buckets);
  const int raw = int(std::floor((dev - dev_lo) / width));
  return std::clamp(raw, 0, dev_buckets - 1);
}

double MarginSpaces::dev_representative(int bucket) const {
  if (bucket < 0 || bucket >= dev_buckets)
    throw std::invalid_argument("MarginSpaces: bucket out of range");
  const double width = (dev_hi - dev_lo) / double(dev_buckets);
  return dev_lo + (double(bucket) + 0.5) * width;
}

int adjustable_index(int group) {
  for (std::size_t i = 0; i < kAdjustableGroups.size(); ++i) {
    if (kAdjustableGroups[i] == group) return int(i);
  }
  throw std::invalid_argument("adjustable_index: group " + std::to_string(group) +
                              " is not adjustable");
}

int adjustable_group(int index) {
  if (index < 0 || index >= int(kAdjustableGroups.size()))
    throw std::invalid_argument("adjustable_group: index out of range");
  return kAdjustableGroups[std::size_t(index)];
}

bool operator==(const MdpState& a, const MdpState& b) {
  return a.group == b.group && a.d_bucket == b.d_bucket && a.m_bucket == b.m_bucket;
}

int num_states(const MarginSpaces& sp) {
  return int(kAdjustableGroups.size()) * sp.dev_buckets * sp.num_margins();
}

int state_index(const MdpState& s, const MarginSpaces& sp) {
  const int gi = adjustable_index(s.group);
  if (s.d_bucket < 0 || s.d_bucket >= sp.dev_buckets)
    throw std::invalid_argument("state_index: d_bucket out of range");
  if (s.m_bucket < 0 || s.m_bucket >= sp.num_margins())
    throw std::invalid_argument("state_index: m_bucket out of range");
  return (gi * sp.dev_buckets + s.d_bucket) * sp.num_margins() + s.m_bucket;
}

MdpState state_from_index(int idx, const MarginSpaces& sp) {
  if (idx < 0 || idx >= num_states(sp))
    throw std::invalid_argument("state_from_index: index out of range");
  const int nm = sp.num_margins();
  MdpState s;
  s.m_bucket = idx % nm;
  s.d_bucket = (idx / nm) % sp.dev_buckets;
  s.group = adjustable_group(idx / (nm * sp.dev_buckets));
  return s;
}

int action_delta(int action) {
  switch (action) {
    case 0: return -1;
    case 1: return 0;
    case 2: return +1;
    default: throw std::invalid_argument("action_delta: unknown action");
  }
}

double apply_action(double margin, int action, const MarginSpaces& sp) {
  const double moved = margin + sp.kappa * double(action_delta(action));
  return std::clamp(moved, sp.min_margin(), sp.max_margin());
}

namespace {

// Unit-normalized rows; throws on a zero row.
DenseMatrix normalized_rows(const DenseMatrix& x, const char* what) {
  DenseMatrix out = x;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) sq += x.at(i, j) * x.at(i, j);
    const double norm = std::sqrt(sq);
    if (norm == 0.0) throw std::invalid_argument(std::string(what) + ": zero feature row");
    for (std::size_t j = 0; j < x.cols; ++j) out.at(i, j) /= norm;
  }
  return out;
}

// Renormalized mean of unit rows.
std::vector<double> group_center(const DenseMatrix& unit, const char* what) {
  std::vector<double> c(unit.cols, 0.0);
  for (std::size_t i = 0; i < unit.rows; ++i)
    for (std::size_t j = 0; j < unit.cols; ++j) c[j] += unit.at(i, j);
  double sq = 0.0;
  for (double v : c) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm == 0.0) throw std::invalid_argument(std::string(what) + ": degenerate group center");
  for (double& v : c) v /= norm;
  return c;
}

void cosines_to_center(const DenseMatrix& features, const char* what, double* mean_out,
                       double* peak_out) {
  if (features.rows == 0) throw std::invalid_argument(std::string(what) + ": empty group");
  const DenseMatrix unit = normalized_rows(features, what);
  const std::vector<double> center = group_center(unit, what);
  double acc = 0.0;
  double peak = -2.0;
  for (std::size_t i = 0; i < unit.rows; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < unit.cols; ++j) dot += unit.at(i, j) * center[j];
    acc += dot;
    peak = std::max(peak, dot);
  }
  if (mean_out != nullptr) *mean_out = acc / double(unit.rows);
  if (peak_out != nullptr) *peak_out = peak;
}

}  // namespace

double intra_class_similarity(const DenseMatrix& features) {
  double mean = 0.0;
  cosines_to_center(features, "intra_class_similarity", &mean, nullptr);
  return mean;
}

double inter_class_similarity(const DenseMatrix& features) {
  double peak = 0.0;
  cosines_to_center(features, "inter_class_similarity", nullptr, &peak);
  return peak;
}

namespace {

void check_group_table(const std::vector<DenseMatrix>& group_features, int group,
                       const char* what) {
  if (group < 0 || std::size_t(group) >= group_features.size())
    throw std::invalid_argument(std::string(what) + ": group id out of range");
  if (group_features[std::size_t(group)].rows == 0)
    throw std::invalid_argument(std::string(what) + ": empty group");
  if (group_features[2].rows == 0)
    throw std::invalid_argument(std::string(what) + ": empty anchor group");
}

}  // namespace

double compute_d_intra(const std::vector<DenseMatrix>& group_features, int group) {
  check_group_table(group_features, group, "compute_d_intra");
  const double di = intra_class_similarity(group_features[std::size_t(group)]);
  const double da = intra_class_similarity(group_features[2]);
  return std::abs(di - da);
}

double compute_d_inter(const std::vector<DenseMatrix>& group_features, int group,
                       DInterMode mode) {
  check_group_table(group_features, group, "compute_d_inter");
  if (mode == DInterMode::kLiteralPeak) {
    const double di = inter_class_similarity(group_features[std::size_t(group)]);
    const double da = inter_class_similarity(group_features[2]);
    return std::abs(di - da);
  }
  // Alternative reading: similarity between the group center and the anchor
  // center, compared against the anchor's self-similarity of 1.
  const DenseMatrix ui = normalized_rows(group_features[std::size_t(group)], "compute_d_inter");
  const DenseMatrix ua = normalized_rows(group_features[2], "compute_d_inter");
  const std::vector<double> ci = group_center(ui, "compute_d_inter");
  const std::vector<double> ca = group_center(ua, "compute_d_inter");
  double dot = 0.0;
  for (std::size_t j = 0; j < ci.size(); ++j) dot += ci[j] * ca[j];
  return std::abs(dot - 1.0);
}

double group_objective(double d_intra, double d_inter) {
  if (d_intra < 0.0 || d_inter < 0.0)
    throw std::invalid_argument("group_objective: deviations must be nonnegative");
  return -(d_intra + d_inter);
}

double reward(double objective_prev, double objective_next) {
  return objective_next - objective_prev;
}

// --- Q-network ---------------------------------------------------------------

QNetwork QNetwork::init(std::size_t inputs, std::size_t hidden, Rng& rng) {
  if (inputs == 0 || hidden == 0) throw std::invalid_argument("QNetwork: zero layer width");
  QNetwork net;
  net.w1 = Parameter(DenseMatrix::randn(inputs, hidden, rng, 1.0 / std::sqrt(double(inputs))));
  net.b1 = Parameter(DenseMatrix::zeros(1, hidden));
  net.w2 = Parameter(
      DenseMatrix::randn(hidden, std::size_t(kNumActions), rng, 1.0 / std::sqrt(double(hidden))));
  net.b2 = Parameter(DenseMatrix::zeros(1, std::size_t(kNumActions)));
  return net;
}

DenseMatrix QNetwork::forward(const DenseMatrix& x) const {
  if (x.cols != w1.value.rows) throw std::invalid_argument("QNetwork: input width mismatch");
  DenseMatrix h = matmul(x, w1.value);
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t j = 0; j < h.cols; ++j) h.at(i, j) += b1.value.at(0, j);
  h = tanh_mat(h);
  DenseMatrix q = matmul(h, w2.value);
  for (std::size_t i = 0; i < q.rows; ++i)
    for (std::size_t j = 0; j < q.cols; ++j) q.at(i, j) += b2.value.at(0, j);
  return q;
}

ad::Var QNetwork::forward(const ad::Var& x) {
  const ad::Var h =
      ad::tanh_v(ad::add_row_broadcast(ad::matmul(x, ad::leaf(w1)), ad::leaf(b1)));
  return ad::add_row_broadcast(ad::matmul(h, ad::leaf(w2)), ad::leaf(b2));
}

std::vector<Parameter*> QNetwork::parameter_list() { return {&w1, &b1, &w2, &b2}; }

void QNetwork::copy_from(const QNetwork& other) {
  w1.value = other.w1.value;
  b1.value = other.b1.value;
  w2.value = other.w2.value;
  b2.value = other.b2.value;
}

DenseMatrix one_hot_rows(const std::vector<int>& indices, std::size_t width) {
  DenseMatrix out = DenseMatrix::zeros(indices.size(), width);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || std::size_t(indices[i]) >= width)
      throw std::invalid_argument("one_hot_rows: index out of range");
    out.at(i, std::size_t(indices[i])) = 1.0;
  }
  return out;
}

// --- replay ------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
  store_.reserve(capacity);
}

void ReplayBuffer::push(const Transition& t) {
  if (store_.size() < capacity_) {
    store_.push_back(t);
  } else {
    store_[head_] = t;  // overwrites the oldest entry
    head_ = (head_ + 1) % capacity_;
  }
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  if (store_.empty()) throw std::runtime_error("ReplayBuffer: sampling from empty buffer");
  if (batch == 0) throw std::invalid_argument("ReplayBuffer: zero batch");
  std::vector<Transition> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(store_[rng.uniform_index(store_.size())]);
  return out;
}

ad::Var dqn_loss(const std::vector<Transition>& batch, QNetwork& online, const QNetwork& target,
                 double gamma, std::size_t state_width) {
  if (batch.empty()) throw std::invalid_argument("dqn_loss: empty batch");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("dqn_loss: gamma not in [0,1)");
  if (online.inputs() != state_width || target.inputs() != state_width)
    throw std::invalid_argument("dqn_loss: network width does not match state encoding");

  std::vector<int> s_idx, n_idx;
  std::vector<std::size_t> a_idx;
  s_idx.reserve(batch.size());
  n_idx.reserve(batch.size());
  a_idx.reserve(batch.size());
  for (const Transition& t : batch) {
    if (t.action < 0 || t.action >= kNumActions)
      throw std::invalid_argument("dqn_loss: action out of range");
    s_idx.push_back(t.state);
    n_idx.push_back(t.next_state);
    a_idx.push_back(std::size_t(t.action));
  }

  // TD targets come from the frozen network, outside the gradient graph.
  const DenseMatrix next_q = target.forward(one_hot_rows(n_idx, state_width));
  DenseMatrix y(batch.size(), 1);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double best = next_q.at(i, 0);
    for (std::size_t a = 1; a < std::size_t(kNumActions); ++a)
      best = std::max(best, next_q.at(i, a));
    y.at(i, 0) = batch[i].terminal ? batch[i].reward : batch[i].reward + gamma * best;
  }

  const ad::Var q = online.forward(ad::constant(one_hot_rows(s_idx, state_width)));
  const ad::Var picked = ad::select_cols(q, a_idx);
  const ad::Var diff = ad::sub(picked, ad::constant(std::move(y)));
  return ad::mean_all(ad::hadamard(diff, diff));
}

int epsilon_greedy(const DenseMatrix& q_row, double eps, Rng& rng) {
  if (q_row.rows != 1 || q_row.cols == 0)
    throw std::invalid_argument("epsilon_greedy: expected a single q row");
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("epsilon_greedy: eps not in [0,1]");
  if (rng.uniform() < eps) return int(rng.uniform_index(q_row.cols));
  int best = 0;
  for (std::size_t a = 1; a < q_row.cols; ++a) {
    if (q_row.at(0, a) > q_row.at(0, best)) best = int(a);
  }
  return best;
}

// --- exact solver ------------------------------------------------------------

void FiniteMdp::validate() const {
  if (states <= 0 || actions <= 0) throw std::invalid_argument("FiniteMdp: empty spaces");
  if (int(next.size()) != states || int(reward.size()) != states ||
      int(terminal.size()) != states)
    throw std::invalid_argument("FiniteMdp: table row count mismatch");
  for (int s = 0; s < states; ++s) {
    if (int(next[std::size_t(s)].size()) != actions ||
        int(reward[std::size_t(s)].size()) != actions ||
        int(terminal[std::size_t(s)].size()) != actions)
      throw std::invalid_argument("FiniteMdp: table column count mismatch");
    for (int a = 0; a < actions; ++a) {
      const int n = next[std::size_t(s)][std::size_t(a)];
      if (n < 0 || n >= states) throw std::invalid_argument("FiniteMdp: next state out of range");
    }
  }
}

DenseMatrix tabular_q_iteration(const FiniteMdp& mdp, double gamma, double tol, int max_iters) {
  mdp.validate();
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("tabular_q_iteration: gamma not in [0,1)");
  if (!(tol > 0.0)) throw std::invalid_argument("tabular_q_iteration: tol must be positive");

  DenseMatrix q = DenseMatrix::zeros(std::size_t(mdp.states), std::size_t(mdp.actions));
  DenseMatrix fresh = q;
  for (int it = 0; it < max_iters; ++it) {
    double delta = 0.0;
    for (int s = 0; s < mdp.states; ++s) {
      for (int a = 0; a < mdp.actions; ++a) {
        double v = mdp.reward[std::size_t(s)][std::size_t(a)];
        if (!mdp.terminal[std::size_t(s)][std::size_t(a)]) {
          const int n = mdp.next[std::size_t(s)][std::size_t(a)];
          double best = q.at(std::size_t(n), 0);
          for (int b = 1; b < mdp.actions; ++b)
            best = std::max(best, q.at(std::size_t(n), std::size_t(b)));
          v += gamma * best;
        }
        fresh.at(std::size_t(s), std::size_t(a)) = v;
        delta = std::max(delta, std::abs(v - q.at(std::size_t(s), std::size_t(a))));
      }
    }
    std::swap(q, fresh);
    if (delta < tol) return q;
  }
  throw std::runtime_error("tabular_q_iteration: no convergence within max iterations");
}

std::vector<int> greedy_policy(const DenseMatrix& q_table) {
  std::vector<int> policy(q_table.rows, 0);
  for (std::size_t s = 0; s < q_table.rows; ++s) {
    int best = 0;
    for (std::size_t a = 1; a < q_table.cols; ++a) {
      if (q_table.at(s, a) > q_table.at(s, std::size_t(best))) best = int(a);
    }
    policy[s] = best;
  }
  return policy;
}

// --- training loop -------------------------------------------------------------

void AgentConfig::validate() const {
  if (episodes <= 0 || steps_per_episode <= 0)
    throw std::invalid_argument("AgentConfig: empty training budget");
  if (replay_capacity == 0 || batch_size == 0 || batch_size > replay_capacity)
    throw std::invalid_argument("AgentConfig: invalid replay sizes");
  if (min_replay < batch_size) throw std::invalid_argument("AgentConfig: warmup below batch size");
  if (hidden == 0) throw std::invalid_argument("AgentConfig: zero hidden width");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("AgentConfig: gamma not in [0,1)");
  if (!(lr > 0.0)) throw std::invalid_argument("AgentConfig: lr must be positive");
  if (!(lr_floor > 0.0 && lr_floor <= lr))
    throw std::invalid_argument("AgentConfig: lr_floor must lie in (0, lr]");
  if (momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("AgentConfig: momentum must lie in [0, 1)");
  if (!(eps_start >= eps_end && eps_start <= 1.0 && eps_end >= 0.0))
    throw std::invalid_argument("AgentConfig: bad epsilon schedule");
  if (!(eps_decay_fraction > 0.0 && eps_decay_fraction <= 1.0))
    throw std::invalid_argument("AgentConfig: eps_decay_fraction not in (0,1]");
  if (target_sync <= 0) throw std::invalid_argument("AgentConfig: target_sync must be positive");
}

TrainedAgent train_agent(Env& env, const AgentConfig& cfg, Rng& rng) {
  cfg.validate();
  const int S = env.num_states();
  if (S <= 0) throw std::invalid_argument("train_agent: environment has no states");

  QNetwork online = QNetwork::init(std::size_t(S), cfg.hidden, rng);
  QNetwork target = QNetwork::init(std::size_t(S), cfg.hidden, rng);
  target.copy_from(online);

  std::vector<ParamGroup> groups;
  for (Parameter* p : online.parameter_list()) groups.push_back({p, false});
  SgdMomentum opt(groups, cfg.lr, cfg.momentum, 0.0);

  ReplayBuffer buffer(cfg.replay_capacity);
  const long total_steps = long(cfg.episodes) * long(cfg.steps_per_episode);
  const long decay_steps = std::max<long>(1, long(cfg.eps_decay_fraction * double(total_steps)));

  long global_step = 0;
  long updates = 0;
  double last_loss = 0.0;
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    int state = env.reset(rng);
    for (int t = 0; t < cfg.steps_per_episode; ++t) {
      const double frac = std::min(1.0, double(global_step) / double(decay_steps));
      const double eps = cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac;

      const DenseMatrix q_row = online.forward(one_hot_rows({state}, std::size_t(S)));
      const int action = epsilon_greedy(q_row, eps, rng);
      const Env::Outcome out = env.step(action, rng);

      Transition tr{state, action, out.reward, out.next, out.terminal};
      const bool truncated = (t == cfg.steps_per_episode - 1) && !out.terminal;
      if (truncated && !cfg.bootstrap_on_truncation) tr.terminal = true;
      buffer.push(tr);

      state = out.next;
      global_step += 1;

      if (buffer.size() >= cfg.min_replay) {
        opt.set_lr(cosine_lr(cfg.lr, cfg.lr_floor, global_step, total_steps));
        const std::vector<Transition> batch = buffer.sample(cfg.batch_size, rng);
        const ad::Var loss = dqn_loss(batch, online, target, cfg.gamma, std::size_t(S));
        last_loss = loss->value.at(0, 0);
        if (!std::isfinite(last_loss))
          throw std::runtime_error("train_agent: non-finite loss at update " +
                                   std::to_string(updates) + " (episode " + std::to_string(ep) +
                                   ")");
        opt.zero_grad();
        ad::backward(loss);
        opt.step();
        updates += 1;
        if (updates % cfg.target_sync == 0) target.copy_from(online);
      }
      if (out.terminal) break;
    }
  }

  TrainedAgent agent;
  std::vector<int> all_states(static_cast<std::size_t>(S), 0);
  for (int s = 0; s < S; ++s) all_states[std::size_t(s)] = s;
  agent.q_table = online.forward(one_hot_rows(all_states, std::size_t(S)));
  agent.policy = greedy_policy(agent.q_table);
  agent.online = std::move(online);
  agent.final_loss = last_loss;
  agent.updates = updates;
  return agent;
}

// --- margin-dynamics simulator -------------------------------------------------

MarginSimEnv::MarginSimEnv(MarginSpaces spaces, std::array<SimGroupProfile, 3> profiles,
                           double relax)
    : spaces_(std::move(spaces)), profiles_(profiles), relax_(relax) {
  spaces_.validate();
  if (!(relax > 0.0 && relax <= 1.0))
    throw std::invalid_argument("MarginSimEnv: relax must lie in (0, 1]");
  for (const SimGroupProfile& p : profiles_) {
    if (p.base < 0.0 || p.slope < 0.0)
      throw std::invalid_argument("MarginSimEnv: negative profile terms");
  }
}

int MarginSimEnv::num_states() const { return rl::num_states(spaces_); }

double MarginSimEnv::settled_deviation(int group, double margin) const {
  const SimGroupProfile& p = profiles_[std::size_t(adjustable_index(group))];
  return p.base + p.slope * std::abs(margin - p.opt_margin);
}

MarginSimEnv::Outcome MarginSimEnv::transition(int state_idx, int action) const {
  const MdpState s = state_from_index(state_idx, spaces_);
  const double margin = spaces_.margins[std::size_t(s.m_bucket)];
  const double moved = apply_action(margin, action, spaces_);
  const int m_next = spaces_.margin_bucket(moved);

  // Deviation relaxes toward the new margin's settled level, then snaps to
  // its bucket representative so the chain stays exactly Markov on the
  // discrete states.
  const double dev = spaces_.dev_representative(s.d_bucket);
  const double pull = settled_deviation(s.group, spaces_.margins[std::size_t(m_next)]);
  const double dev_cont = dev + relax_ * (pull - dev);
  const int d_next = spaces_.dev_bucket(dev_cont);
  const double dev_rep = spaces_.dev_representative(d_next);

  Outcome out;
  out.next = state_index({s.group, d_next, m_next}, spaces_);
  out.reward = reward(group_objective(dev, 0.0), group_objective(dev_rep, 0.0));
  out.terminal = false;
  return out;
}

int MarginSimEnv::reset(Rng& rng) {
  state_ = int(rng.uniform_index(std::size_t(num_states())));
  return state_;
}

MarginSimEnv::Outcome MarginSimEnv::step(int action, Rng&) {
  const Outcome out = transition(state_, action);
  state_ = out.next;
  return out;
}

FiniteMdp MarginSimEnv::as_mdp() const {
  FiniteMdp mdp;
  mdp.states = num_states();
  mdp.actions = kNumActions;
  mdp.next.assign(std::size_t(mdp.states), std::vector<int>(std::size_t(mdp.actions), 0));
  mdp.reward.assign(std::size_t(mdp.states), std::vector<double>(std::size_t(mdp.actions), 0.0));
  mdp.terminal.assign(std::size_t(mdp.states), std::vector<bool>(std::size_t(mdp.actions), false));
  for (int s = 0; s < mdp.states; ++s) {
    for (int a = 0; a < mdp.actions; ++a) {
      const Outcome out = transition(s, a);
      mdp.next[std::size_t(s)][std::size_t(a)] = out.next;
      mdp.reward[std::size_t(s)][std::size_t(a)] = out.reward;
      mdp.terminal[std::size_t(s)][std::size_t(a)] = out.terminal;
    }
  }
  return mdp;
}

MarginSimEnv default_margin_sim() {
  MarginSpaces spaces;
  spaces.dev_lo = 0.0;
  spaces.dev_hi = 0.8;
  spaces.dev_buckets = 4;
  // Slopes of 1 margin-step per bucket keep the settled deviations of
  // neighboring margins in distinct buckets, so actions separate cleanly.
  std::array<SimGroupProfile, 3> profiles = {
      SimGroupProfile{0.10, 1.00, 0.6},  // children
      SimGroupProfile{0.15, 1.00, 0.8},  // teenager
      SimGroupProfile{0.12, 0.90, 0.6},  // senior
  };
  return MarginSimEnv(spaces, profiles, 0.7);
}

}  // namespace agest::rl
