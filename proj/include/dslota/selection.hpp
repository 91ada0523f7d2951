#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "dslota/channel.hpp"

namespace dslota {

struct WorkerScore {
  std::size_t id = 0;
  double rmse = 0.0;         // F
  double consistency = 0.0;  // η, lower is more representative
  double theta = 0.0;        // τ·F + (1-τ)·η
};

// Total-variation distance between two label histograms, in [0, 1].
double data_consistency(std::span<const double> local_hist, std::span<const double> global_hist);

double worker_score(double rmse, double consistency, double tau);

WorkerScore make_worker_score(std::size_t id, double rmse, double consistency, double tau);

// Mean of the scores.
double adaptive_threshold(std::span<const double> scores);
double adaptive_threshold(std::span<const WorkerScore> scores);

// Threshold used before any score has been reported.
inline constexpr double kNoThreshold = std::numeric_limits<double>::infinity();

// Sufficient per-worker power condition: (b / h_min)^2 · ||w||^2 <= P_max.
bool power_feasible(double h_min_abs, double payload_sq_norm, double b, double power_cap);

// Largest b satisfying power_feasible for one worker (+inf for a zero payload).
double max_feasible_b(double h_min_abs, double payload_sq_norm, double power_cap);

enum class ScalingMode {
  kFixed,    // common b taken from the channel
  kSampled,  // per-worker b_i from the channel; common b = min over selected
  kCoupled,  // b chosen jointly with the selected set
};

struct SelectionDecision {
  std::vector<bool> selected;
  std::vector<bool> score_ok;
  std::vector<bool> power_ok;
  double threshold = kNoThreshold;
  double b = 1.0;
  bool fallback = false;
  std::size_t iterations = 0;  // coupled-mode shrink steps

  std::size_t count() const;
  std::vector<std::size_t> selected_ids() const;
};

// Selects the largest set of workers meeting both the score threshold and the
// power constraint. Never returns an empty set: if nothing qualifies, the
// single lowest-score worker is taken with b clamped to what it can afford.
//
// kCoupled: starting from the score-feasible set, b is the largest common
// amplitude every member can afford; the bottleneck worker is dropped while
// doing so lowers the decoded noise level σ/(|S|·b).
SelectionDecision select_workers(std::span<const WorkerScore> scores, double prev_threshold,
                                 const ChannelRealization& channel,
                                 std::span<const double> payload_sq_norms,
                                 std::span<const double> power_caps, ScalingMode mode);

// Lowest θ, ties to the lowest index.
std::size_t select_best_worker(std::span<const WorkerScore> scores);

}  // namespace dslota
