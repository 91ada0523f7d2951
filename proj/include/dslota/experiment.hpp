#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "dslota/config.hpp"
#include "dslota/cost.hpp"
#include "dslota/model.hpp"
#include "dslota/selection.hpp"
#include "dslota/swarm.hpp"

namespace dslota {

struct RoundMetrics {
  std::size_t round = 0;  // 1-based
  double accuracy = 0.0;  // held-out test split, model chosen by eval_model
  double server_accuracy = 0.0;
  double global_best_accuracy = 0.0;
  double rmse = 0.0;      // server model on the global evaluation set
  double global_best_rmse = 0.0;
  std::size_t n_selected = 0;
  bool fallback = false;
  double time_cost = 0.0;       // T_t
  double bandwidth_cost = 0.0;  // B_t
  double cumulative_bandwidth_time = 0.0;
};

// Per-round selection and power audit record.
struct SelectionRecord {
  std::size_t round = 0;
  std::vector<std::size_t> selected;
  std::vector<double> theta;
  double threshold = kNoThreshold;
  double b = 0.0;
  bool fallback = false;
  std::vector<double> transmit_power;  // zero for silent workers
  std::vector<double> personal_best_rmse;
  std::vector<LinkBudget> budgets;
};

struct ExperimentData {
  std::vector<Dataset> workers;
  Dataset global_eval;
  Dataset test;
};

struct RunResult {
  ExperimentConfig config;
  std::vector<RoundMetrics> metrics;
  std::vector<SelectionRecord> selections;
  GlobalState final_state;
  std::vector<WorkerState> final_workers;
  std::vector<double> consistency;  // η per worker
};

// Builds worker shards, the global evaluation set and the test split.
ExperimentData build_experiment_data(const ExperimentConfig& config);

// Uniform sample of `size` items (without replacement) from `pool`.
Dataset build_global_eval_set(const Dataset& pool, std::size_t size, Rng& rng);

// Runs every round of the configured algorithm. Deterministic in
// (config, seed) and independent of `config.threads`.
RunResult run_experiment(const ExperimentConfig& config);
RunResult run_experiment(const ExperimentConfig& config, const ExperimentData& data);

// Writes metrics.csv and run.json under `out_dir` (created if missing).
void emit_metrics(const RunResult& result, const std::filesystem::path& out_dir);

std::string metrics_csv(const RunResult& result);
std::string run_json(const RunResult& result);

}  // namespace dslota
