#include "dslota/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "dslota/channel.hpp"
#include "dslota/error.hpp"

namespace dslota {

namespace {

Dataset subset(const Dataset& src, std::span<const std::size_t> idx) {
  Dataset out(src.dim(), src.num_classes());
  for (std::size_t i : idx) out.add(src[i]);
  return out;
}

std::vector<Dataset> deal_iid(const Dataset& train, std::size_t workers) {
  std::vector<std::vector<std::size_t>> idx(workers);
  for (std::size_t i = 0; i < train.size(); ++i) idx[i % workers].push_back(i);
  std::vector<Dataset> out;
  for (const auto& v : idx) out.push_back(subset(train, v));
  return out;
}

double sq_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// Runs fn(i) for i in [0, n) on up to `threads` threads. Each index is
// handled by exactly one thread, so per-index outputs are scheduling-free.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

Dataset build_global_eval_set(const Dataset& pool, std::size_t size, Rng& rng) {
  require(size >= 1, "global evaluation set size must be positive");
  require(size <= pool.size(), "global evaluation set needs " + std::to_string(size) +
                                   " samples but the withheld pool has " +
                                   std::to_string(pool.size()));
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < size; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  return subset(pool, idx);
}

ExperimentData build_experiment_data(const ExperimentConfig& config) {
  config.validate();
  Rng data_rng = derive_rng(config.seed, Stream::kData);
  const std::size_t train_n = config.workers * config.samples_per_worker;

  Dataset full;
  if (config.dataset_csv.empty()) {
    full = make_synthetic(config.classes, config.dim,
                          train_n + config.eval_pool_size + config.test_size, config.separation,
                          data_rng);
  } else {
    full = read_csv(config.dataset_csv, config.classes);
    require(full.dim() == config.dim, "dataset_csv has " + std::to_string(full.dim()) +
                                          " features but config dim is " +
                                          std::to_string(config.dim));
    require(full.size() >= config.workers + config.eval_pool_size + config.test_size,
            "dataset_csv is too small for the configured splits");
  }

  std::vector<std::size_t> order(full.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), data_rng.engine());
  const std::span<const std::size_t> all(order);
  ExperimentData out;
  out.test = subset(full, all.subspan(0, config.test_size));
  const Dataset pool = subset(full, all.subspan(config.test_size, config.eval_pool_size));
  const auto rest = all.subspan(config.test_size + config.eval_pool_size);
  const Dataset train = subset(full, config.dataset_csv.empty() ? rest.subspan(0, train_n) : rest);

  if (config.iid) {
    out.workers = deal_iid(train, config.workers);
  } else {
    Rng part_rng = derive_rng(config.seed, Stream::kPartition);
    out.workers = partition_dirichlet(train, config.workers, config.dirichlet_alpha, part_rng);
  }
  Rng eval_rng = derive_rng(config.seed, Stream::kEvalSet);
  out.global_eval = build_global_eval_set(pool, config.eval_size, eval_rng);
  return out;
}

RunResult run_experiment(const ExperimentConfig& config) {
  return run_experiment(config, build_experiment_data(config));
}

RunResult run_experiment(const ExperimentConfig& config, const ExperimentData& data) {
  config.validate();
  const std::size_t C = config.workers;
  require(data.workers.size() == C, "experiment data holds " +
                                        std::to_string(data.workers.size()) +
                                        " worker shards, config expects " + std::to_string(C));
  for (const auto& d : data.workers) {
    require(!d.empty(), "a worker shard is empty");
    require(d.dim() == config.dim && d.num_classes() == config.classes,
            "worker shard shape disagrees with config");
  }

  const Model model(config.model_spec());
  const std::size_t N = model.num_params();
  const bool swarm = config.algorithm != Algorithm::kFedAvg;

  SwarmHyper hyper;
  hyper.coefficients = config.coefficients;
  hyper.mode = config.coefficient_mode;
  hyper.learning_rate = config.learning_rate;
  hyper.epochs = config.local_epochs;
  hyper.batch_size = config.batch_size;
  hyper.validate();

  ChannelConfig channel_cfg = config.channel;
  channel_cfg.sample_worker_b = config.scaling == ScalingMode::kSampled;

  RunResult result;
  result.config = config;

  Rng init_rng = derive_rng(config.seed, Stream::kInit);
  const ParamVector w0 = model.init_params(init_rng, config.init_scale);

  GlobalState global;
  global.params = w0;
  global.global_best = w0;
  global.global_best_score = rmse_eval(model, w0, data.global_eval);
  global.prev_threshold = kNoThreshold;

  const auto global_hist = data.global_eval.label_histogram();
  auto score_set = [&](std::size_t i) -> const Dataset& {
    return config.score_source == DataSource::kLocal ? data.workers[i] : data.global_eval;
  };

  std::vector<WorkerState> workers(C);
  std::vector<SwarmCoefficients> run_coefficients(C);
  result.consistency.resize(C);
  for (std::size_t i = 0; i < C; ++i) {
    auto& w = workers[i];
    w.id = i;
    w.params = w0;
    w.velocity.assign(N, 0.0);
    w.personal_best = w0;
    w.personal_best_score = rmse_eval(model, w0, score_set(i));
    w.power_cap = config.power_cap;
    result.consistency[i] = data_consistency(data.workers[i].label_histogram(), global_hist);
    Rng coef_rng = derive_rng(config.seed, Stream::kCoefficients, {i, 0});
    run_coefficients[i] = sample_coefficients(coef_rng);
  }

  const std::vector<double> caps(C, config.power_cap);
  const double bits = payload_bits_for(N, config.bits_per_param);
  double cumulative = 0.0;

  const bool from_best =
      config.broadcast == Broadcast::kGlobalBest && config.algorithm != Algorithm::kFedAvg;
  for (std::size_t t = 1; t <= config.rounds; ++t) {
    // Local phase: every worker starts from the server model and is pulled
    // toward its personal best and the broadcast global best.
    std::vector<LocalRoundResult> local(C);
    parallel_for(C, config.threads, [&](std::size_t i) {
      SwarmCoefficients c{};
      if (swarm) {
        switch (config.coefficient_mode) {
          case CoefficientMode::kFixed: c = config.coefficients; break;
          case CoefficientMode::kPerRun: c = run_coefficients[i]; break;
          case CoefficientMode::kPerRound: {
            Rng coef_rng = derive_rng(config.seed, Stream::kCoefficients, {i, t});
            c = sample_coefficients(coef_rng);
            break;
          }
        }
      }
      workers[i].params = from_best ? global.global_best : global.params;
      const Dataset& train =
          config.grad_source == DataSource::kLocal ? data.workers[i] : data.global_eval;
      Rng train_rng = derive_rng(config.seed, Stream::kTraining, {i, t});
      local[i] = local_round(model, workers[i], global, hyper, c, train, score_set(i), train_rng);
    });

    std::vector<WorkerScore> scores(C);
    std::vector<double> thetas(C);
    for (std::size_t i = 0; i < C; ++i) {
      scores[i] = make_worker_score(i, local[i].local_score, result.consistency[i], config.tau);
      workers[i].score = scores[i].theta;
      thetas[i] = scores[i].theta;
    }

    Rng channel_rng = derive_rng(config.seed, Stream::kChannel, {t});
    ChannelRealization channel = sample_channel(C, N, channel_cfg, channel_rng);

    std::vector<ParamVector> payloads(C);
    std::vector<double> payload_sq(C);
    for (std::size_t i = 0; i < C; ++i) {
      payloads[i] = config.payload == Payload::kDelta ? local[i].delta : workers[i].params;
      payload_sq[i] = sq_norm(payloads[i]);
    }

    SelectionRecord rec;
    rec.round = t;
    rec.theta = thetas;
    rec.transmit_power.assign(C, 0.0);
    for (std::size_t i = 0; i < C; ++i)
      rec.budgets.push_back(LinkBudget{config.carrier_bandwidth, channel.mean_abs_gain(i),
                                       config.power_cap, config.noise_density, bits});

    std::vector<bool> selected(C, false);
    ParamVector aggregate;
    CostReport cost;
    switch (config.algorithm) {
      case Algorithm::kFedAvg: {
        selected.assign(C, true);
        aggregate = ideal_aggregate(payloads, selected);
        rec.b = channel.b;
        cost = fedavg_cost(rec.budgets);
        break;
      }
      case Algorithm::kDslBest: {
        const std::size_t best = select_best_worker(scores);
        selected[best] = true;
        aggregate = payloads[best];
        rec.b = channel.b;
        cost = dslota_cost(std::span<const LinkBudget>(&rec.budgets[best], 1));
        break;
      }
      case Algorithm::kDslOta:
      case Algorithm::kDslMultiIdeal: {
        const double threshold = config.score_gate ? global.prev_threshold : kNoThreshold;
        const auto decision =
            select_workers(scores, threshold, channel, payload_sq, caps, config.scaling);
        selected = decision.selected;
        rec.threshold = threshold;
        rec.b = decision.b;
        rec.fallback = decision.fallback;
        if (config.algorithm == Algorithm::kDslOta) {
          channel.b = decision.b;
          Rng noise_rng = derive_rng(config.seed, Stream::kNoise, {t});
          const auto tx = transmit(payloads, selected, channel, caps, noise_rng);
          rec.transmit_power = tx.transmit_power;
          aggregate = decode(tx.signal, decision.count(), decision.b);
        } else {
          aggregate = ideal_aggregate(payloads, selected);
        }
        std::vector<LinkBudget> chosen;
        for (std::size_t i = 0; i < C; ++i)
          if (selected[i]) chosen.push_back(rec.budgets[i]);
        cost = dslota_cost(chosen);
        break;
      }
    }

    const std::size_t n_selected =
        static_cast<std::size_t>(std::count(selected.begin(), selected.end(), true));
    for (std::size_t i = 0; i < C; ++i)
      if (selected[i]) rec.selected.push_back(i);

    if (config.payload == Payload::kDelta) {
      aggregate_delta(global, aggregate, n_selected);
    } else {
      require(all_finite(aggregate), "aggregated model is not finite");
      global.params = aggregate;
    }

    RoundMetrics m;
    m.round = t;
    m.rmse = rmse_eval(model, global.params, data.global_eval);
    update_global_best(global, global.params, m.rmse);
    global.prev_threshold = adaptive_threshold(std::span<const double>(thetas));
    m.global_best_rmse = global.global_best_score;
    m.server_accuracy = accuracy(model, global.params, data.test);
    m.global_best_accuracy = accuracy(model, global.global_best, data.test);
    m.accuracy = config.eval_model == EvalModel::kGlobalBest ? m.global_best_accuracy
                                                             : m.server_accuracy;
    m.n_selected = n_selected;
    m.fallback = rec.fallback;
    m.time_cost = cost.time;
    m.bandwidth_cost = cost.bandwidth;
    cumulative += cost.time * cost.bandwidth;
    m.cumulative_bandwidth_time = cumulative;

    for (const auto& w : workers) rec.personal_best_rmse.push_back(w.personal_best_score);
    result.metrics.push_back(m);
    result.selections.push_back(std::move(rec));
  }

  result.final_state = std::move(global);
  result.final_workers = std::move(workers);
  return result;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

std::string metrics_csv(const RunResult& result) {
  std::string out = "round,algorithm,accuracy,rmse,n_selected,fallback,T_t,B_t\n";
  const std::string algo(algorithm_name(result.config.algorithm));
  for (const auto& m : result.metrics) {
    out += std::to_string(m.round) + ',' + algo + ',' + num(m.accuracy) + ',' + num(m.rmse) + ',' +
           std::to_string(m.n_selected) + ',' + (m.fallback ? "1" : "0") + ',' +
           num(m.time_cost) + ',' + num(m.bandwidth_cost) + '\n';
  }
  return out;
}

std::string run_json(const RunResult& result) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : result.config.entries()) cfg[k] = v;
  j["config"] = cfg;

  auto rounds = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < result.metrics.size(); ++r) {
    const auto& m = result.metrics[r];
    const auto& s = result.selections[r];
    nlohmann::ordered_json e;
    e["round"] = m.round;
    e["selected"] = s.selected;
    e["theta"] = s.theta;
    e["threshold"] = finite_or_null(s.threshold);
    e["b"] = s.b;
    e["fallback"] = s.fallback;
    e["transmit_power"] = s.transmit_power;
    e["accuracy"] = m.accuracy;
    e["server_accuracy"] = m.server_accuracy;
    e["global_best_accuracy"] = m.global_best_accuracy;
    e["rmse"] = m.rmse;
    e["global_best_rmse"] = m.global_best_rmse;
    e["T_t"] = m.time_cost;
    e["B_t"] = m.bandwidth_cost;
    e["cumulative_bandwidth_time"] = m.cumulative_bandwidth_time;
    rounds.push_back(std::move(e));
  }
  j["rounds"] = std::move(rounds);

  nlohmann::ordered_json summary;
  if (!result.metrics.empty()) {
    const auto& last = result.metrics.back();
    summary["final_accuracy"] = last.accuracy;
    summary["final_server_accuracy"] = last.server_accuracy;
    summary["final_global_best_accuracy"] = last.global_best_accuracy;
    summary["final_rmse"] = last.rmse;
    summary["global_best_rmse"] = result.final_state.global_best_score;
    summary["total_bandwidth_time"] = last.cumulative_bandwidth_time;
  }
  summary["data_consistency"] = result.consistency;
  j["summary"] = std::move(summary);
  return j.dump(2) + "\n";
}

void emit_metrics(const RunResult& result, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());
  const auto write = [](const std::filesystem::path& p, const std::string& body) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot open " + p.string() + " for writing");
    os << body;
    if (!os) throw Error("failed writing " + p.string());
  };
  write(out_dir / "metrics.csv", metrics_csv(result));
  write(out_dir / "run.json", run_json(result));
}

}  // namespace dslota
