#pragma once

#include <cstddef>
#include <span>

#include "dslota/model.hpp"
#include "dslota/rng.hpp"

namespace dslota {

// How the swarm coefficients c0, c1, c2 are obtained.
enum class CoefficientMode {
  kFixed,     // configured values used as-is
  kPerRun,    // drawn once per worker at start-up
  kPerRound,  // drawn per worker per round
};

struct SwarmCoefficients {
  double inertia = 0.0;   // c0
  double personal = 0.0;  // c1
  double global = 0.0;    // c2
};

// c0 ~ U(0,1), c1, c2 ~ N(0,1).
SwarmCoefficients sample_coefficients(Rng& rng);

struct SwarmHyper {
  SwarmCoefficients coefficients;
  CoefficientMode mode = CoefficientMode::kPerRound;
  double learning_rate = 0.01;
  std::size_t epochs = 1;
  std::size_t batch_size = 64;  // 0 means full batch

  void validate() const;
};

struct WorkerState {
  std::size_t id = 0;
  ParamVector params;
  ParamVector velocity;
  ParamVector personal_best;
  double personal_best_score = 0.0;
  double power_cap = 1.0;
  double score = 0.0;
  SwarmCoefficients coefficients;  // coefficients used in the latest round
};

struct GlobalState {
  ParamVector params;
  ParamVector global_best;
  double global_best_score = 0.0;
  double prev_threshold = 0.0;
};

struct LocalRoundResult {
  ParamVector delta;      // params after the round minus params before it
  double local_score = 0.0;  // rmse of the new params on the scoring set
};

// One swarm step toward the personal and global bests followed by
// `hyper.epochs` epochs of mini-batch SGD on `train`. The personal best is
// refreshed from the rmse on `score_set`.
LocalRoundResult local_round(const Model& model, WorkerState& worker,
                             const GlobalState& global, const SwarmHyper& hyper,
                             const SwarmCoefficients& coefficients, const Dataset& train,
                             const Dataset& score_set, Rng& rng);

// Mini-batch SGD over `train` for `epochs` passes, reshuffling each epoch.
void sgd_epochs(const Model& model, ParamVector& params, const Dataset& train,
                double learning_rate, std::size_t epochs, std::size_t batch_size, Rng& rng);

// Replaces the personal best iff the candidate is strictly better.
bool update_personal_best(WorkerState& worker, std::span<const double> candidate,
                          double candidate_score);

bool update_global_best(GlobalState& global, std::span<const double> candidate,
                        double candidate_score);

// w <- w + mean_delta; the 1/|S| normalisation happens in the decoder.
void aggregate_delta(GlobalState& global, std::span<const double> mean_delta,
                     std::size_t n_selected);

}  // namespace dslota
