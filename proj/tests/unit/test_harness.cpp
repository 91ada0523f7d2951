#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dslota/config.hpp"
#include "dslota/error.hpp"
#include "dslota/experiment.hpp"
#include "oracles.hpp"

using namespace dslota;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.workers = 4;
  c.rounds = 5;
  c.local_epochs = 2;
  c.batch_size = 16;
  c.learning_rate = 0.05;
  c.dim = 5;
  c.classes = 3;
  c.samples_per_worker = 60;
  c.eval_pool_size = 300;
  c.eval_size = 200;
  c.test_size = 200;
  c.seed = 7;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

double max_relative_gap(const ParamVector& a, const ParamVector& b) {
  return dslota::testing::relative_error(a, b, 1e-300);
}

}  // namespace

TEST_CASE("config: parses key/value documents") {
  const auto cfg = parse_config(R"(
# comment
algorithm = fedavg
workers = 12   # trailing comment
learning_rate = 0.5
iid = true
b_mode = sampled
model = mlp
)");
  CHECK(cfg.algorithm == Algorithm::kFedAvg);
  CHECK(cfg.workers == 12);
  CHECK(cfg.learning_rate == 0.5);
  CHECK(cfg.iid);
  CHECK(cfg.scaling == ScalingMode::kSampled);
  CHECK(cfg.architecture == Architecture::kMlp);
}

TEST_CASE("config: unknown keys and bad values are errors") {
  CHECK_THROWS_AS(parse_config("wrokers = 3"), Error);
  CHECK_THROWS_AS(parse_config("workers = three"), Error);
  CHECK_THROWS_AS(parse_config("b_mode = maybe"), Error);
  CHECK_THROWS_AS(parse_config("just a line"), Error);
  try {
    parse_config("\n\nfoo = 1", "cfg.txt");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("cfg.txt:3") != std::string::npos);
  }
}

TEST_CASE("config: entries round-trip through the parser") {
  ExperimentConfig a = small_config();
  a.algorithm = Algorithm::kDslMultiIdeal;
  a.channel.noise_variance = 0.25;
  a.coefficients = {0.1, 0.2, 0.3};
  std::string text;
  for (const auto& [k, v] : a.entries()) text += k + " = " + v + "\n";
  const ExperimentConfig b = parse_config(text);
  CHECK(b.entries() == a.entries());
}

TEST_CASE("run_experiment: invalid configs are rejected before any round") {
  ExperimentConfig c = small_config();
  c.rounds = 0;
  CHECK_THROWS_AS(run_experiment(c), Error);
  c = small_config();
  c.workers = 0;
  CHECK_THROWS_AS(run_experiment(c), Error);
  c = small_config();
  c.dataset_csv = "/nonexistent/data.csv";
  CHECK_THROWS_AS(run_experiment(c), Error);
}

TEST_CASE("build_global_eval_set") {
  Rng rng(3);
  const Dataset pool = make_synthetic(3, 2, 50, 1.0, rng);
  SUBCASE("full size returns the pool") {
    const Dataset all = build_global_eval_set(pool, pool.size(), rng);
    REQUIRE(all.size() == pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) CHECK(all[i].features == pool[i].features);
  }
  SUBCASE("size 0 and oversize are errors") {
    CHECK_THROWS_AS(build_global_eval_set(pool, 0, rng), Error);
    CHECK_THROWS_AS(build_global_eval_set(pool, 51, rng), Error);
  }
  SUBCASE("2048-sample draws track the pool's label mix") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng r(seed);
      // Unbalanced pool: drop most of class 2.
      const Dataset raw = make_synthetic(3, 2, 6000, 1.0, r);
      Dataset skewed(2, 3);
      for (const auto& s : raw.samples())
        if (s.label != 2 || r.uniform() < 0.2) skewed.add(s);
      const Dataset dg = build_global_eval_set(skewed, 2048, r);
      const auto a = dg.label_histogram();
      const auto b = skewed.label_histogram();
      double tv = 0.0;
      for (std::size_t c = 0; c < 3; ++c) tv += 0.5 * std::abs(a[c] - b[c]);
      CHECK(tv <= 0.05);
    }
  }
}

TEST_CASE("experiment data: worker shards conserve the training pool") {
  const ExperimentConfig c = small_config();
  const auto data = build_experiment_data(c);
  REQUIRE(data.workers.size() == c.workers);
  std::size_t total = 0;
  for (const auto& w : data.workers) total += w.size();
  CHECK(total == c.workers * c.samples_per_worker);
  CHECK(data.global_eval.size() == c.eval_size);
  CHECK(data.test.size() == c.test_size);
  // Test split is disjoint from training and evaluation data.
  std::map<std::vector<double>, int> seen;
  for (const auto& w : data.workers)
    for (const auto& s : w.samples()) ++seen[s.features];
  for (const auto& s : data.global_eval.samples()) ++seen[s.features];
  for (const auto& s : data.test.samples()) CHECK(seen.count(s.features) == 0);
}

TEST_CASE("fedavg with one worker and full batch is centralized gradient descent") {
  ExperimentConfig c = small_config();
  c.algorithm = Algorithm::kFedAvg;
  c.workers = 1;
  c.local_epochs = 1;
  c.batch_size = 0;
  c.rounds = 6;
  const auto data = build_experiment_data(c);
  const auto result = run_experiment(c, data);

  const Model model(c.model_spec());
  Rng init = derive_rng(c.seed, Stream::kInit);
  const ParamVector w0 = model.init_params(init, c.init_scale);
  const ParamVector expected = dslota::testing::reference_gradient_descent(
      model, w0, data.workers[0], c.learning_rate, c.rounds);
  CHECK(max_relative_gap(result.final_state.params, expected) <= 1e-12);
}

TEST_CASE("dsl_ota without swarm terms, noise or gating reproduces fedavg") {
  ExperimentConfig c = small_config();
  c.rounds = 6;
  c.coefficient_mode = CoefficientMode::kFixed;
  c.coefficients = {0.0, 0.0, 0.0};
  c.channel.noise_variance = 0.0;
  c.scaling = ScalingMode::kFixed;
  c.power_cap = 1e12;
  c.score_gate = false;
  const auto data = build_experiment_data(c);
  c.algorithm = Algorithm::kDslOta;
  const auto ota = run_experiment(c, data);
  c.algorithm = Algorithm::kFedAvg;
  const auto fed = run_experiment(c, data);
  for (const auto& m : ota.metrics) CHECK(m.n_selected == c.workers);
  CHECK(max_relative_gap(ota.final_state.params, fed.final_state.params) <= 1e-12);
}

TEST_CASE("run traces: bests are monotone and selections respect constraints") {
  for (auto algo : {Algorithm::kDslOta, Algorithm::kDslMultiIdeal, Algorithm::kDslBest}) {
    ExperimentConfig c = small_config();
    c.algorithm = algo;
    c.rounds = 8;
    const auto r = run_experiment(c);
    REQUIRE(r.metrics.size() == 8);
    double last_global = 2.0;
    std::vector<double> last_personal(c.workers, 2.0);
    for (std::size_t t = 0; t < r.metrics.size(); ++t) {
      const auto& m = r.metrics[t];
      const auto& s = r.selections[t];
      CHECK(m.global_best_rmse <= last_global);
      last_global = m.global_best_rmse;
      for (std::size_t i = 0; i < c.workers; ++i) {
        CHECK(s.personal_best_rmse[i] <= last_personal[i]);
        last_personal[i] = s.personal_best_rmse[i];
      }
      CHECK(m.n_selected >= 1);
      CHECK(m.n_selected <= c.workers);
      CHECK(m.accuracy >= 0.0);
      CHECK(m.accuracy <= 1.0);
      for (std::size_t i = 0; i < c.workers; ++i) CHECK(s.transmit_power[i] <= c.power_cap * (1 + 1e-9));
      if (!s.fallback && algo != Algorithm::kDslBest)
        for (std::size_t id : s.selected) CHECK(s.theta[id] <= s.threshold);
    }
  }
}

TEST_CASE("ledgered bandwidth matches the cost model") {
  ExperimentConfig c = small_config();
  c.carrier_bandwidth = 2.5;
  c.algorithm = Algorithm::kFedAvg;
  for (const auto& m : run_experiment(c).metrics) CHECK(m.bandwidth_cost == 2.5 * c.workers);
  c.algorithm = Algorithm::kDslOta;
  const auto r = run_experiment(c);
  for (std::size_t t = 0; t < r.metrics.size(); ++t) {
    std::vector<LinkBudget> chosen;
    for (std::size_t id : r.selections[t].selected) chosen.push_back(r.selections[t].budgets[id]);
    const auto expected = dslota_cost(chosen);
    CHECK(r.metrics[t].bandwidth_cost == expected.bandwidth);
    CHECK(r.metrics[t].time_cost == expected.time);
  }
}

TEST_CASE("every algorithm and option combination runs") {
  for (auto algo : {Algorithm::kDslOta, Algorithm::kFedAvg, Algorithm::kDslBest,
                    Algorithm::kDslMultiIdeal}) {
    for (auto scaling : {ScalingMode::kFixed, ScalingMode::kSampled, ScalingMode::kCoupled}) {
      ExperimentConfig c = small_config();
      c.algorithm = algo;
      c.scaling = scaling;
      c.rounds = 2;
      c.payload = scaling == ScalingMode::kSampled ? Payload::kModel : Payload::kDelta;
      c.grad_source = scaling == ScalingMode::kFixed ? DataSource::kGlobal : DataSource::kLocal;
      c.score_source = scaling == ScalingMode::kCoupled ? DataSource::kGlobal : DataSource::kLocal;
      c.coefficient_mode = CoefficientMode::kPerRun;
      c.architecture = Architecture::kMlp;
      c.hidden = 4;
      c.iid = scaling == ScalingMode::kFixed;
      c.channel.granularity = scaling == ScalingMode::kSampled ? GainGranularity::kScalarPerWorker
                                                               : GainGranularity::kVectorPerEntry;
      const auto r = run_experiment(c);
      CHECK(r.metrics.size() == 2);
      CHECK(all_finite(r.final_state.params));
    }
  }
}

TEST_CASE("emit_metrics writes one row per round and reproduces byte for byte") {
  ExperimentConfig c = small_config();
  c.rounds = 3;
  const auto dir = std::filesystem::temp_directory_path() / "dslota_emit_test";
  std::filesystem::remove_all(dir);
  emit_metrics(run_experiment(c), dir / "a");
  c.threads = 3;
  emit_metrics(run_experiment(c), dir / "b");

  const std::string csv = slurp(dir / "a" / "metrics.csv");
  std::istringstream lines(csv);
  std::string header, row;
  std::getline(lines, header);
  CHECK(header == "round,algorithm,accuracy,rmse,n_selected,fallback,T_t,B_t");
  int rows = 0;
  while (std::getline(lines, row)) ++rows;
  CHECK(rows == 3);
  CHECK(csv == slurp(dir / "b" / "metrics.csv"));

  const auto j = nlohmann::json::parse(slurp(dir / "a" / "run.json"));
  CHECK(j["rounds"].size() == 3);
  CHECK(j["config"]["workers"] == "4");
  CHECK(j["rounds"][0]["threshold"].is_null());
  CHECK(j["rounds"][1]["threshold"].is_number());
  std::filesystem::remove_all(dir);
}

TEST_CASE("emit_metrics reports unwritable destinations with the path") {
  ExperimentConfig c = small_config();
  c.rounds = 1;
  const auto r = run_experiment(c);
  const auto file = std::filesystem::temp_directory_path() / "dslota_not_a_dir";
  { std::ofstream(file) << "x"; }
  try {
    emit_metrics(r, file / "sub");
    FAIL("expected an I/O error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("dslota_not_a_dir") != std::string::npos);
  }
  std::filesystem::remove(file);
}

TEST_CASE("experiments run from a CSV dataset") {
  Rng rng(2);
  const Dataset d = make_synthetic(3, 5, 1000, 3.0, rng);
  const auto path = std::filesystem::temp_directory_path() / "dslota_harness_data.csv";
  write_csv(d, path);
  ExperimentConfig c = small_config();
  c.dataset_csv = path.string();
  c.rounds = 2;
  const auto data = build_experiment_data(c);
  std::size_t total = data.test.size();
  for (const auto& w : data.workers) total += w.size();
  CHECK(total == 1000 - c.eval_pool_size);
  CHECK(run_experiment(c, data).metrics.size() == 2);
  std::filesystem::remove(path);
}

TEST_CASE("eval_model picks which model's test accuracy is reported") {
  ExperimentConfig c = small_config();
  c.rounds = 6;
  const auto best = run_experiment(c);
  c.eval_model = EvalModel::kServer;
  const auto server = run_experiment(c);
  for (std::size_t t = 0; t < best.metrics.size(); ++t) {
    CHECK(best.metrics[t].accuracy == best.metrics[t].global_best_accuracy);
    CHECK(server.metrics[t].accuracy == server.metrics[t].server_accuracy);
    // Only the reported column changes.
    CHECK(best.metrics[t].server_accuracy == server.metrics[t].server_accuracy);
    CHECK(best.metrics[t].rmse == server.metrics[t].rmse);
  }
}

TEST_CASE("broadcast: fedavg ignores it, dsl_ota workers restart from the global best") {
  ExperimentConfig c = small_config();
  c.rounds = 6;
  c.algorithm = Algorithm::kFedAvg;
  const std::string fed = metrics_csv(run_experiment(c));
  c.broadcast = Broadcast::kGlobalBest;
  CHECK(metrics_csv(run_experiment(c)) == fed);

  // No gradient, no swarm terms, no noise: every delta is zero, so the server
  // model never moves regardless of where workers start.
  c = small_config();
  c.broadcast = Broadcast::kGlobalBest;
  c.learning_rate = 0.0;
  c.coefficient_mode = CoefficientMode::kFixed;
  c.coefficients = {0.0, 0.0, 0.0};
  c.channel.noise_variance = 0.0;
  const auto r = run_experiment(c);
  for (const auto& m : r.metrics) CHECK(m.rmse == r.metrics.front().rmse);
  CHECK(r.final_state.params == r.final_state.global_best);
}
