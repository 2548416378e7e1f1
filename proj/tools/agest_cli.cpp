// agest: synthetic-data generation, training with group-aware margins,
// evaluation, margin-policy benchmarking, and report rendering.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "agest/config.hpp"
#include "agest/data.hpp"
#include "agest/model.hpp"
#include "agest/report.hpp"
#include "agest/train.hpp"

namespace {

using namespace agest;

// --config is applied before the other flags so explicit flags win. CLI11
// parses in one pass, so the config path is pre-scanned from argv.
std::string config_path_from_argv(int argc, char** argv) {
  for (int i = 1; i < argc - 1; ++i) {
    if (std::string(argv[i]) == "--config") return argv[i + 1];
  }
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    const std::string key = "--config=";
    if (a.rfind(key, 0) == 0) return a.substr(key.size());
  }
  return {};
}

void add_run_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--config", "run config file (JSON; flags override it)")
      ->type_name("FILE")
      ->expected(1);
  cmd->add_option("--seed", rc.seed, "master seed for every stream");

  cmd->add_option("--data-size", rc.data.size, "training samples");
  cmd->add_option("--eval-size", rc.data.eval_size, "evaluation samples");
  cmd->add_option("--age-min", rc.data.age_min);
  cmd->add_option("--age-max", rc.data.age_max);
  cmd->add_option("--proportions", rc.data.proportions,
                  "children teenager adult senior fractions, sum 1");
  cmd->add_option("--nodes", rc.data.nodes, "graph nodes per sample");
  cmd->add_option_function<std::size_t>(
      "--dim", [&rc](std::size_t d) { rc.data.dim = d; rc.model.dim = d; },
      "feature dimension (dataset and model)");
  cmd->add_option("--knn", rc.data.knn, "neighbours per node");
  cmd->add_option("--noise", rc.data.noise, "cluster noise scale");
  cmd->add_option("--label-sigma", rc.data.label_sigma, "annotation spread for epsilon error");
  cmd->add_flag("--image-mode,!--vector-mode", rc.data.image_mode,
                "synthesize patch grids instead of node vectors");
  cmd->add_option("--image-size", rc.data.image_size);
  cmd->add_option("--patch-size", rc.data.patch_size);

  cmd->add_option("--hops", rc.model.diffusion.max_hops, "attention diffusion hop count");
  cmd->add_option("--heads", rc.model.diffusion.heads);
  cmd->add_option("--layers", rc.model.diffusion.layers);
  cmd->add_option("--drop-ratio", rc.model.diffusion.drop_ratio, "message dropout");
  cmd->add_option("--leaky-slope", rc.model.diffusion.leaky_slope);
  cmd->add_flag("--power-iteration", rc.model.diffusion.use_power_iteration,
                "approximate diffusion by the truncated series");
  cmd->add_option("--power-iters", rc.model.diffusion.power_iters);
  cmd->add_option("--spectral-scale", rc.model.diffusion.spectral_scale);
  cmd->add_option("--scale", rc.model.scale, "cosine logit scale s");
  cmd->add_option("--initial-margin", rc.model.initial_margin);
  cmd->add_option("--lambda", rc.model.lambda, "joint loss mix");
  cmd->add_option("--loss", rc.model.loss, "dgm | softmax | cos | arc");
  cmd->add_option("--fixed-margin", rc.model.fixed_margin, "margin for cos/arc baselines");

  cmd->add_option("--epochs", rc.train.epochs);
  cmd->add_option("--batch-size", rc.train.batch_size);
  cmd->add_option("--lr", rc.train.lr);
  cmd->add_option("--lr-floor", rc.train.lr_floor, "cosine annealing target");
  cmd->add_option("--momentum", rc.train.momentum);
  cmd->add_option("--weight-decay", rc.train.weight_decay);
  cmd->add_option("--optimizer", rc.train.optimizer, "sgd | adam");

  cmd->add_flag("--rl,!--no-rl", rc.rl.enabled, "margin tuning phases");
  cmd->add_option("--phase-epochs", rc.rl.phase_epochs, "epochs between margin phases");
  cmd->add_option("--updates-per-phase", rc.rl.updates_per_phase);
  cmd->add_option("--live-batch", rc.rl.live_batch);
  cmd->add_option("--dev-headroom", rc.rl.dev_headroom);
  cmd->add_option("--margins", rc.rl.margins, "margin grid");
  cmd->add_option("--kappa", rc.rl.kappa, "margin action step");
  cmd->add_option("--dev-buckets", rc.rl.dev_buckets);
  cmd->add_option("--inter-mode", rc.rl.inter_mode, "literal | between_centers");

  cmd->add_option("--agent-episodes", rc.rl.agent.episodes);
  cmd->add_option("--agent-steps", rc.rl.agent.steps_per_episode);
  cmd->add_option("--agent-replay", rc.rl.agent.replay_capacity);
  cmd->add_option("--agent-batch", rc.rl.agent.batch_size);
  cmd->add_option("--agent-min-replay", rc.rl.agent.min_replay);
  cmd->add_option("--agent-hidden", rc.rl.agent.hidden);
  cmd->add_option("--agent-gamma", rc.rl.agent.gamma);
  cmd->add_option("--agent-lr", rc.rl.agent.lr);
  cmd->add_option("--agent-lr-floor", rc.rl.agent.lr_floor);
  cmd->add_option("--agent-momentum", rc.rl.agent.momentum);
  cmd->add_option("--agent-eps-start", rc.rl.agent.eps_start);
  cmd->add_option("--agent-eps-end", rc.rl.agent.eps_end);
  cmd->add_option("--agent-eps-decay", rc.rl.agent.eps_decay_fraction);
  cmd->add_option("--agent-sync", rc.rl.agent.target_sync);
  cmd->add_flag("--agent-bootstrap,!--agent-no-bootstrap", rc.rl.agent.bootstrap_on_truncation,
                "bootstrap through budget-cut episode ends");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create out dir " + dir + ": " + ec.message());
}

// Tie-tolerant agreement: the chosen action must attain the oracle's optimal
// value. Greedy policies are only defined up to exact Q ties.
int policy_agreement(const DenseMatrix& oracle_q, const std::vector<int>& policy) {
  int matches = 0;
  for (std::size_t s = 0; s < policy.size(); ++s) {
    double best = oracle_q.at(s, 0);
    for (std::size_t a = 1; a < oracle_q.cols; ++a) best = std::max(best, oracle_q.at(s, a));
    if (oracle_q.at(s, std::size_t(policy[s])) >= best - 1e-9) matches += 1;
  }
  return matches;
}

int cmd_gen_data(const RunConfig& rc, const std::string& out_dir) {
  ensure_out_dir(out_dir);
  auto [train, eval] = make_datasets(rc);
  save_dataset(train, out_dir + "/train.json");
  save_dataset(eval, out_dir + "/eval.json");
  std::printf("train samples %zu digest %016llx\n", train.samples.size(),
              (unsigned long long)dataset_digest(train));
  std::printf("eval samples %zu digest %016llx\n", eval.samples.size(),
              (unsigned long long)dataset_digest(eval));
  return 0;
}

int cmd_train(const RunConfig& rc, const std::string& out_dir, const std::string& train_path,
              const std::string& eval_path, bool quiet) {
  ensure_out_dir(out_dir);
  Dataset train, eval;
  if (train_path.empty() != eval_path.empty()) {
    // Generated sets share one geometry; a half-generated pair would not.
    throw std::invalid_argument("pass both --train-set and --eval-set or neither");
  }
  if (train_path.empty()) {
    std::tie(train, eval) = make_datasets(rc);
  } else {
    train = load_dataset(train_path);
    eval = load_dataset(eval_path);
  }
  Rng mrng = model_stream(rc.seed);
  AgeModel model = AgeModel::init(rc.model, train.config, mrng);
  TrainOutcome out = run_training(rc, model, train, eval, out_dir, quiet ? nullptr : &std::cout);
  save_checkpoint(model, out_dir + "/checkpoint.json");
  emit_report(rc, out, out_dir);
  std::printf("mae %.4f sigma %.4f aar %.4f\n", out.report.mae, out.report.sigma, out.report.aar);
  return 0;
}

int cmd_eval(const RunConfig& rc, const std::string& out_dir, const std::string& checkpoint,
             const std::string& eval_path) {
  ensure_out_dir(out_dir);
  AgeModel model = load_checkpoint(checkpoint);
  const Dataset eval = eval_path.empty() ? make_datasets(rc).second : load_dataset(eval_path);
  TrainOutcome out;
  out.report = evaluate_model(model, eval);
  for (int g = 0; g < kNumGroups; ++g) out.final_margins[std::size_t(g)] = model.margins.margin(g);
  emit_report(rc, out, out_dir);
  std::printf("mae %.4f sigma %.4f aar %.4f\n", out.report.mae, out.report.sigma, out.report.aar);
  return 0;
}

int cmd_rl_train(const RunConfig& rc, const std::string& out_dir) {
  ensure_out_dir(out_dir);
  rl::MarginSimEnv env = rl::default_margin_sim();
  const DenseMatrix oracle = rl::tabular_q_iteration(env.as_mdp(), rc.rl.agent.gamma);
  Rng rng = benchmark_stream(rc.seed);
  const rl::TrainedAgent agent = rl::train_agent(env, rc.rl.agent, rng);
  const int matches = policy_agreement(oracle, agent.policy);
  const int states = rl::num_states(env.spaces());
  write_file_atomic(out_dir + "/policy.json",
                    policy_to_string(env.spaces(), agent.q_table, agent.policy));
  write_file_atomic(out_dir + "/oracle_policy.json",
                    policy_to_string(env.spaces(), oracle, rl::greedy_policy(oracle)));
  std::printf("agreement %d/%d states (%.1f%%), %ld updates, final loss %.6f\n", matches, states,
              100.0 * double(matches) / double(states), agent.updates, agent.final_loss);
  return 0;
}

int cmd_report(const std::string& input) {
  const std::string text = read_text_file(input);
  std::fputs(render_report_text(text).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"group-aware margin age estimation harness"};
  app.require_subcommand(1);

  RunConfig rc;
  std::string out_dir = "out";
  std::string train_path, eval_path, checkpoint, report_input;
  bool quiet = false;

  try {
    const std::string cfg_path = config_path_from_argv(argc, argv);
    if (!cfg_path.empty()) rc = load_run_config(cfg_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "{\"error\":\"%s\"}\n", e.what());
    return 1;
  }

  CLI::App* gen = app.add_subcommand("gen-data", "write synthetic train/eval datasets");
  add_run_flags(gen, rc);
  gen->add_option("--out-dir", out_dir, "output directory");

  CLI::App* train = app.add_subcommand("train", "train a model and emit report + checkpoint");
  add_run_flags(train, rc);
  train->add_option("--out-dir", out_dir, "output directory");
  train->add_option("--train-set", train_path, "reuse a gen-data train file");
  train->add_option("--eval-set", eval_path, "reuse a gen-data eval file");
  train->add_flag("--quiet", quiet, "suppress per-epoch progress");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint and emit a report");
  add_run_flags(eval, rc);
  eval->add_option("--out-dir", out_dir, "output directory");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--eval-set", eval_path, "reuse a gen-data eval file");

  CLI::App* rlt = app.add_subcommand("rl-train",
                                     "train the margin agent on the enumerable simulator and "
                                     "compare against exact Q-iteration");
  add_run_flags(rlt, rc);
  rlt->add_option("--out-dir", out_dir, "output directory");

  CLI::App* rep = app.add_subcommand("report", "render a report file as text");
  rep->add_option("--input", report_input, "report.json path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      rc.validate();
      return cmd_gen_data(rc, out_dir);
    }
    if (train->parsed()) {
      rc.validate();
      return cmd_train(rc, out_dir, train_path, eval_path, quiet);
    }
    if (eval->parsed()) {
      rc.validate();
      return cmd_eval(rc, out_dir, checkpoint, eval_path);
    }
    if (rlt->parsed()) {
      rc.validate();
      return cmd_rl_train(rc, out_dir);
    }
    if (rep->parsed()) return cmd_report(report_input);
    std::fprintf(stderr, "{\"error\":\"no subcommand\"}\n");
    return 1;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    // Keep the machine-readable error line valid JSON.
    for (char& c : msg) {
      if (c == '"') c = '\'';
      if (c == '\n') c = ' ';
    }
    std::fprintf(stderr, "{\"error\":\"%s\"}\n", msg.c_str());
    return 1;
  }
}
