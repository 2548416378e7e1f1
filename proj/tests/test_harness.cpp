#include <array>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <doctest.h>

#include "agest/config.hpp"
#include "agest/data.hpp"
#include "agest/model.hpp"
#include "agest/report.hpp"
#include "agest/train.hpp"

using namespace agest;

namespace {

// Small enough that the full training smoke stays under a second.
RunConfig tiny_config() {
  RunConfig rc;
  rc.seed = 5;
  rc.data.size = 24;
  rc.data.eval_size = 12;
  rc.data.nodes = 5;
  rc.data.dim = 8;
  rc.data.knn = 2;
  rc.model.dim = 8;
  rc.model.diffusion.heads = 2;
  rc.model.diffusion.layers = 1;
  rc.train.epochs = 2;
  rc.train.batch_size = 8;
  return rc;
}

}  // namespace

TEST_CASE("run config round trips through json") {
  RunConfig rc = tiny_config();
  rc.model.loss = "arc";
  rc.rl.enabled = true;
  rc.rl.agent.episodes = 123;
  Json j = rc;
  RunConfig back = parse_run_config(j);
  Json j2 = back;
  CHECK(j.dump() == j2.dump());
}

TEST_CASE("unknown config keys are rejected by name") {
  Json j = RunConfig{};
  j["typo"] = 1;
  CHECK_THROWS_WITH_AS(parse_run_config(j), doctest::Contains("typo"), std::invalid_argument);

  Json nested = RunConfig{};
  nested["train"]["learning_rate"] = 0.1;
  CHECK_THROWS_WITH_AS(parse_run_config(nested), doctest::Contains("learning_rate"),
                       std::invalid_argument);

  Json agent = RunConfig{};
  agent["rl"]["agent"]["epsilon"] = 0.1;
  CHECK_THROWS_AS(parse_run_config(agent), std::invalid_argument);
}

TEST_CASE("config validation rejects inconsistent settings") {
  RunConfig rc = tiny_config();
  CHECK_NOTHROW(rc.validate());

  RunConfig bad = rc;
  bad.data.proportions = {0.5, 0.5, 0.5, 0.5};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = rc;
  bad.model.dim = rc.data.dim + 1;  // vector mode feeds features straight in
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = rc;
  bad.rl.kappa = 0.3;  // grid spacing is 0.2, actions must land on the grid
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = rc;
  bad.train.lr_floor = bad.train.lr * 2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = rc;
  bad.model.loss = "focal";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("group counts follow largest-remainder apportionment") {
  // Heavily imbalanced mix: floors alone under-allocate, remainders top up.
  auto c = group_counts(1000, {0.006, 0.044, 0.887, 0.063});
  CHECK(c == std::array<std::size_t, 4>{6, 44, 887, 63});

  CHECK(group_counts(400, {0.25, 0.25, 0.25, 0.25}) ==
        std::array<std::size_t, 4>{100, 100, 100, 100});

  auto odd = group_counts(10, {0.34, 0.33, 0.33, 0.0});
  CHECK(odd[0] + odd[1] + odd[2] + odd[3] == 10);
  CHECK(odd[3] == 0);

  // A positive share that rounds to zero samples would silently drop a group.
  CHECK_THROWS_AS(group_counts(10, {0.001, 0.333, 0.333, 0.333}), std::invalid_argument);
}

TEST_CASE("group age ranges clip to the configured span") {
  CHECK(group_age_range(0, 1, 90) == std::pair<int, int>{1, 12});
  CHECK(group_age_range(1, 1, 90) == std::pair<int, int>{13, 17});
  CHECK(group_age_range(2, 1, 90) == std::pair<int, int>{18, 65});
  CHECK(group_age_range(3, 1, 90) == std::pair<int, int>{66, 90});
  CHECK(group_age_range(3, 1, 70) == std::pair<int, int>{66, 70});
  CHECK_THROWS_AS(group_age_range(3, 1, 60), std::invalid_argument);
}

TEST_CASE("synthetic datasets are seed deterministic") {
  DatasetConfig dc = tiny_config().data;
  Rng a(42), b(42), c(43);
  Dataset da = generate_synthetic_dataset(dc, a);
  Dataset db = generate_synthetic_dataset(dc, b);
  Dataset dd = generate_synthetic_dataset(dc, c);
  CHECK(dataset_digest(da) == dataset_digest(db));
  CHECK(dataset_digest(da) != dataset_digest(dd));

  auto want = group_counts(dc.size, dc.proportions);
  std::array<std::size_t, 4> got{};
  for (const auto& s : da.samples) {
    REQUIRE(s.group == group_of_age(s.age));
    got[std::size_t(s.group)] += 1;
  }
  CHECK(got == want);
}

TEST_CASE("dataset files round trip with digest verification") {
  DatasetConfig dc = tiny_config().data;
  Rng rng(7);
  Dataset ds = generate_synthetic_dataset(dc, rng);
  std::string text = dataset_to_string(ds);
  Dataset back = dataset_from_string(text);
  CHECK(dataset_digest(back) == dataset_digest(ds));
  CHECK(back.samples.size() == ds.samples.size());
  CHECK(back.samples[3].age == ds.samples[3].age);

  // Any change to the stored payload must trip the digest check.
  Json tampered = Json::parse(text);
  tampered["digest"] = tampered["digest"].get<std::uint64_t>() ^ 1u;
  CHECK_THROWS_AS(dataset_from_string(tampered.dump()), std::runtime_error);
}

TEST_CASE("image-mode datasets carry patch grids") {
  DatasetConfig dc = tiny_config().data;
  dc.image_mode = true;
  dc.image_size = 12;
  dc.patch_size = 4;
  dc.nodes = 9;  // (12/4)^2 patches
  Rng rng(9);
  Dataset ds = generate_synthetic_dataset(dc, rng);
  REQUIRE(!ds.samples.empty());
  CHECK(ds.samples[0].image.height == 12);
  CHECK(ds.samples[0].image.width == 12);
  for (double v : ds.samples[0].image.pixels) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  Dataset back = dataset_from_string(dataset_to_string(ds));
  CHECK(dataset_digest(back) == dataset_digest(ds));
}

TEST_CASE("checkpoints restore every tensor bit for bit") {
  RunConfig rc = tiny_config();
  Rng rng(11);
  AgeModel model = AgeModel::init(rc.model, rc.data, rng);
  model.margins.set_margin(2, 0.6);  // off the init value, must persist

  std::string text = checkpoint_to_string(model);
  AgeModel back = checkpoint_from_string(text);

  auto pa = model.parameters();
  auto pb = back.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    REQUIRE(pa[i].second->value.data.size() == pb[i].second->value.data.size());
    for (std::size_t k = 0; k < pa[i].second->value.data.size(); ++k) {
      CHECK(pa[i].second->value.data[k] == pb[i].second->value.data[k]);
    }
  }
  CHECK(back.margins.margin(2) == 0.6);
  CHECK(back.age_min == model.age_min);

  Json j = Json::parse(text);
  j["schema"] = "agest.checkpoint/999";
  CHECK_THROWS_AS(checkpoint_from_string(j.dump()), std::runtime_error);
}

TEST_CASE("metrics reports round trip through json") {
  std::vector<double> preds = {10.0, 15.5, 40.0, 70.0, 8.0};
  std::vector<int> ages = {9, 15, 42, 71, 11};
  std::vector<double> stds = {2.0, 2.0, 3.0, 2.5, 2.0};

  MetricsReport with_eps = evaluate_metrics(preds, ages, &stds);
  CHECK(metrics_from_json(metrics_to_json(with_eps)) == with_eps);

  MetricsReport without = evaluate_metrics(preds, ages, nullptr);
  CHECK(!without.epsilon.has_value());
  CHECK(metrics_from_json(metrics_to_json(without)) == without);
}

TEST_CASE("report csv has one row per scope") {
  std::vector<double> preds = {10.0, 15.5, 40.0, 70.0};
  std::vector<int> ages = {9, 15, 42, 71};
  std::string csv = report_to_csv(evaluate_metrics(preds, ages, nullptr));
  int lines = 0;
  for (char ch : csv) lines += ch == '\n';
  CHECK(lines == 6);  // header + overall + four groups
  CHECK(csv.rfind("scope,count,mae,sigma,aar,epsilon", 0) == 0);
}

TEST_CASE("policy grid lists every state exactly once") {
  rl::MarginSimEnv env = rl::default_margin_sim();
  DenseMatrix q = rl::tabular_q_iteration(env.as_mdp(), 0.9);
  std::vector<int> pol = rl::greedy_policy(q);
  Json j = Json::parse(policy_to_string(env.spaces(), q, pol));
  REQUIRE(j["states"].size() == 48);
  std::set<int> seen;
  for (const auto& st : j["states"]) {
    seen.insert(st["index"].get<int>());
    int a = st["action"].get<int>();
    CHECK(a >= 0);
    CHECK(a <= 2);
    CHECK(st["q"].size() == 3);
  }
  CHECK(seen.size() == 48);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 47);
}

TEST_CASE("train and eval sets share one generative world") {
  // With noise off, a sample's features are a pure function of (world, age).
  // Matching ages across independently drawn sets must match exactly.
  DatasetConfig dc = tiny_config().data;
  dc.noise = 0.0;
  Rng wr(21);
  SyntheticWorld world = make_world(dc, wr);
  Rng r1(100), r2(200);
  Dataset a = sample_dataset(dc, world, r1);
  Dataset b = sample_dataset(dc, world, r2);
  CHECK(dataset_digest(a) != dataset_digest(b));  // ages differ between draws
  int compared = 0;
  for (const auto& sa : a.samples) {
    for (const auto& sb : b.samples) {
      if (sa.age != sb.age) continue;
      for (std::size_t k = 0; k < sa.node_features.data.size(); ++k) {
        REQUIRE(sa.node_features.data[k] == sb.node_features.data[k]);
      }
      compared += 1;
      break;
    }
  }
  CHECK(compared > 0);

  // Different world, same ages: features must not coincide.
  Rng wr2(22);
  SyntheticWorld other = make_world(dc, wr2);
  Rng r3(100);
  Dataset c = sample_dataset(dc, other, r3);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    any_diff |= a.samples[i].node_features.data != c.samples[i].node_features.data;
  }
  CHECK(any_diff);
}

TEST_CASE("training smoke run reports finite metrics") {
  RunConfig rc = tiny_config();
  auto [train, eval] = make_datasets(rc);
  Rng mrng = model_stream(rc.seed);
  AgeModel model = AgeModel::init(rc.model, train.config, mrng);
  TrainOutcome out = run_training(rc, model, train, eval, "", nullptr);

  REQUIRE(out.log.size() == 2);
  CHECK(std::isfinite(out.log[0].loss));
  CHECK(std::isfinite(out.report.mae));
  CHECK(out.report.samples == rc.data.eval_size);
  CHECK(out.report.groups.size() == 4);
  CHECK(!out.rl_ran);
  // Margins stay put without the tuner.
  for (double m : out.final_margins) CHECK(m == rc.model.initial_margin);
}

TEST_CASE("margin phases adjust margins on the grid when enabled") {
  RunConfig rc = tiny_config();
  rc.train.epochs = 4;
  rc.rl.enabled = true;
  rc.rl.phase_epochs = 1;
  rc.rl.updates_per_phase = 4;
  rc.rl.live_batch = 4;
  rc.model.initial_margin = 0.4;

  auto [train, eval] = make_datasets(rc);
  Rng mrng = model_stream(rc.seed);
  AgeModel model = AgeModel::init(rc.model, train.config, mrng);
  TrainOutcome out = run_training(rc, model, train, eval, "", nullptr);

  CHECK(out.rl_ran);
  CHECK(out.policy.size() == 48);
  CHECK(out.q_table.rows == 48);
  for (double m : out.final_margins) {
    bool on_grid = false;
    for (double g : rc.rl.margins) on_grid |= std::abs(m - g) < 1e-12;
    CHECK(on_grid);
  }
}

TEST_CASE("report files parse back to the run that produced them") {
  RunConfig rc = tiny_config();
  auto [train, eval] = make_datasets(rc);
  Rng mrng = model_stream(rc.seed);
  AgeModel model = AgeModel::init(rc.model, train.config, mrng);
  TrainOutcome out = run_training(rc, model, train, eval, "", nullptr);

  ParsedReport parsed = parse_report(report_to_string(rc, out));
  CHECK(parsed.metrics == out.report);
  CHECK(parsed.final_margins == out.final_margins);
  CHECK(parsed.config.seed == rc.seed);
  CHECK(parsed.config.data.size == rc.data.size);
  CHECK(!parsed.rl_ran);
}

TEST_CASE("seed streams draw independently") {
  std::uint64_t seed = 3;
  Rng a = train_data_stream(seed);
  Rng b = eval_data_stream(seed);
  Rng c = model_stream(seed);
  Rng d = benchmark_stream(seed);
  std::set<std::uint64_t> firsts = {a.next_u64(), b.next_u64(), c.next_u64(), d.next_u64()};
  CHECK(firsts.size() == 4);
  // Same stream, same seed: identical draws.
  Rng a2 = train_data_stream(seed);
  CHECK(a2.next_u64() == train_data_stream(seed).next_u64());
}
