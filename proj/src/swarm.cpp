#include "dslota/swarm.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "dslota/error.hpp"

namespace dslota {

SwarmCoefficients sample_coefficients(Rng& rng) {
  SwarmCoefficients c;
  c.inertia = rng.uniform(0.0, 1.0);
  c.personal = rng.normal();
  c.global = rng.normal();
  return c;
}

void SwarmHyper::validate() const {
  require(learning_rate >= 0.0, "learning rate must be nonnegative");
  require(epochs >= 1, "local epochs must be at least 1");
}

void sgd_epochs(const Model& model, ParamVector& params, const Dataset& train,
                double learning_rate, std::size_t epochs, std::size_t batch_size, Rng& rng) {
  require(!train.empty(), "local training set is empty");
  const std::size_t n = train.size();
  const std::size_t bs = (batch_size == 0 || batch_size >= n) ? n : batch_size;
  std::vector<std::size_t> order(n);
  std::vector<Sample> batch;
  batch.reserve(bs);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (bs < n) std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      std::span<const Sample> view;
      if (bs == n) {
        view = train.samples();
      } else {
        batch.clear();
        for (std::size_t k = start; k < end; ++k) batch.push_back(train[order[k]]);
        view = batch;
      }
      const auto lg = model.loss_gradient(params, view);
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= learning_rate * lg.grad[i];
    }
  }
}

LocalRoundResult local_round(const Model& model, WorkerState& worker,
                             const GlobalState& global, const SwarmHyper& hyper,
                             const SwarmCoefficients& c, const Dataset& train,
                             const Dataset& score_set, Rng& rng) {
  hyper.validate();
  const std::size_t n = worker.params.size();
  require(global.global_best.size() == n && worker.personal_best.size() == n &&
              worker.velocity.size() == n,
          "worker " + std::to_string(worker.id) + ": parameter length mismatch with global state");

  const ParamVector before = worker.params;
  for (std::size_t k = 0; k < n; ++k) {
    const double v = c.inertia * worker.velocity[k] +
                     c.personal * (worker.personal_best[k] - before[k]) +
                     c.global * (global.global_best[k] - before[k]);
    worker.velocity[k] = v;
    worker.params[k] = before[k] + v;
  }
  if (hyper.learning_rate > 0.0)
    sgd_epochs(model, worker.params, train, hyper.learning_rate, hyper.epochs, hyper.batch_size,
               rng);
  require(all_finite(worker.params),
          "worker " + std::to_string(worker.id) + ": parameters diverged");
  worker.coefficients = c;

  LocalRoundResult out;
  out.delta.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.delta[k] = worker.params[k] - before[k];
  out.local_score = rmse_eval(model, worker.params, score_set);
  update_personal_best(worker, worker.params, out.local_score);
  return out;
}

bool update_personal_best(WorkerState& worker, std::span<const double> candidate,
                          double candidate_score) {
  if (!(candidate_score < worker.personal_best_score)) return false;
  worker.personal_best.assign(candidate.begin(), candidate.end());
  worker.personal_best_score = candidate_score;
  return true;
}

bool update_global_best(GlobalState& global, std::span<const double> candidate,
                        double candidate_score) {
  if (!(candidate_score < global.global_best_score)) return false;
  global.global_best.assign(candidate.begin(), candidate.end());
  global.global_best_score = candidate_score;
  return true;
}

void aggregate_delta(GlobalState& global, std::span<const double> mean_delta,
                     std::size_t n_selected) {
  require(n_selected >= 1, "aggregate_delta: no worker selected");
  require(mean_delta.size() == global.params.size(), "aggregate_delta: length mismatch");
  for (std::size_t k = 0; k < mean_delta.size(); ++k) global.params[k] += mean_delta[k];
  require(all_finite(global.params), "aggregated global parameters are not finite");
}

}  // namespace dslota
