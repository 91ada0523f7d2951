#include "dslota/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dslota/error.hpp"

namespace dslota {

double data_consistency(std::span<const double> local_hist, std::span<const double> global_hist) {
  require(local_hist.size() == global_hist.size(),
          "data_consistency: histogram lengths differ");
  double tv = 0.0;
  for (std::size_t c = 0; c < local_hist.size(); ++c)
    tv += std::abs(local_hist[c] - global_hist[c]);
  return std::clamp(0.5 * tv, 0.0, 1.0);
}

double worker_score(double rmse, double consistency, double tau) {
  require(tau >= 0.0 && tau <= 1.0, "worker_score: tau must lie in [0, 1]");
  return tau * rmse + (1.0 - tau) * consistency;
}

WorkerScore make_worker_score(std::size_t id, double rmse, double consistency, double tau) {
  return WorkerScore{id, rmse, consistency, worker_score(rmse, consistency, tau)};
}

double adaptive_threshold(std::span<const double> scores) {
  require(!scores.empty(), "adaptive_threshold: no scores");
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

double adaptive_threshold(std::span<const WorkerScore> scores) {
  std::vector<double> thetas;
  thetas.reserve(scores.size());
  for (const auto& s : scores) thetas.push_back(s.theta);
  return adaptive_threshold(thetas);
}

bool power_feasible(double h_min_abs, double payload_sq_norm, double b, double power_cap) {
  require(h_min_abs > 0.0, "power_feasible: channel gain must be positive");
  require(b > 0.0, "power_feasible: b must be positive");
  const double ratio = b / h_min_abs;
  // Relative slack absorbs rounding when b sits exactly on the boundary.
  return ratio * ratio * payload_sq_norm <= power_cap * (1.0 + 1e-12);
}

double max_feasible_b(double h_min_abs, double payload_sq_norm, double power_cap) {
  require(h_min_abs > 0.0, "max_feasible_b: channel gain must be positive");
  if (payload_sq_norm <= 0.0) return std::numeric_limits<double>::infinity();
  return h_min_abs * std::sqrt(std::max(power_cap, 0.0) / payload_sq_norm);
}

std::size_t SelectionDecision::count() const {
  return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), true));
}

std::vector<std::size_t> SelectionDecision::selected_ids() const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < selected.size(); ++i)
    if (selected[i]) ids.push_back(i);
  return ids;
}

std::size_t select_best_worker(std::span<const WorkerScore> scores) {
  require(!scores.empty(), "select_best_worker: no scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i].theta < scores[best].theta) best = i;
  return best;
}

namespace {

void mark_power(SelectionDecision& d, std::span<const double> h_min,
                std::span<const double> sq_norms, std::span<const double> caps) {
  for (std::size_t i = 0; i < d.power_ok.size(); ++i)
    d.power_ok[i] = power_feasible(h_min[i], sq_norms[i], d.b, caps[i]);
}

}  // namespace

SelectionDecision select_workers(std::span<const WorkerScore> scores, double prev_threshold,
                                 const ChannelRealization& channel,
                                 std::span<const double> payload_sq_norms,
                                 std::span<const double> power_caps, ScalingMode mode) {
  const std::size_t C = scores.size();
  require(C >= 1, "select_workers: no workers");
  require(channel.workers() == C && payload_sq_norms.size() == C && power_caps.size() == C,
          "select_workers: inconsistent array lengths");
  require(mode != ScalingMode::kSampled || channel.worker_b.size() == C,
          "select_workers: sampled mode needs per-worker b values");
  for (double cap : power_caps) require(cap > 0.0, "select_workers: power caps must be positive");

  std::vector<double> h_min(C);
  std::vector<double> amplitude(C);
  for (std::size_t i = 0; i < C; ++i) {
    h_min[i] = channel.min_abs_gain(i);
    amplitude[i] = max_feasible_b(h_min[i], payload_sq_norms[i], power_caps[i]);
  }

  SelectionDecision d;
  d.threshold = prev_threshold;
  d.b = channel.b;
  d.selected.assign(C, false);
  d.score_ok.assign(C, false);
  d.power_ok.assign(C, false);
  for (std::size_t i = 0; i < C; ++i) d.score_ok[i] = scores[i].theta <= prev_threshold;

  switch (mode) {
    case ScalingMode::kFixed:
      mark_power(d, h_min, payload_sq_norms, power_caps);
      for (std::size_t i = 0; i < C; ++i) d.selected[i] = d.score_ok[i] && d.power_ok[i];
      break;

    case ScalingMode::kSampled: {
      // Feasible at its own b_i implies feasible at any smaller common b.
      double common = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < C; ++i) {
        d.selected[i] = d.score_ok[i] &&
                        power_feasible(h_min[i], payload_sq_norms[i], channel.worker_b[i],
                                       power_caps[i]);
        if (d.selected[i]) common = std::min(common, channel.worker_b[i]);
      }
      if (std::isfinite(common)) d.b = common;
      mark_power(d, h_min, payload_sq_norms, power_caps);
      break;
    }

    case ScalingMode::kCoupled: {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < C; ++i)
        if (d.score_ok[i]) members.push_back(i);
      // Descending amplitude; the tail element is the current bottleneck.
      std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        return amplitude[a] > amplitude[b];
      });
      std::size_t keep = members.size();
      double best_gain = -1.0;
      for (std::size_t k = members.size(); k >= 1; --k) {
        ++d.iterations;
        const double amp = amplitude[members[k - 1]];
        // Zero payloads never limit b; they ride at the channel default.
        const double gain = static_cast<double>(k) * (std::isfinite(amp) ? amp : channel.b);
        if (gain > best_gain) {
          best_gain = gain;
          keep = k;
        }
        if (!std::isfinite(amp)) break;
      }
      if (!members.empty()) {
        const double amp = amplitude[members[keep - 1]];
        d.b = std::isfinite(amp) ? amp : channel.b;
        for (std::size_t k = 0; k < keep; ++k) d.selected[members[k]] = true;
      }
      mark_power(d, h_min, payload_sq_norms, power_caps);
      break;
    }
  }

  if (d.count() == 0) {
    const std::size_t best = select_best_worker(scores);
    d.fallback = true;
    d.selected[best] = true;
    double b = mode == ScalingMode::kSampled ? channel.worker_b[best] : channel.b;
    if (mode == ScalingMode::kCoupled || amplitude[best] < b) b = amplitude[best];
    if (!std::isfinite(b)) b = channel.b;
    d.b = b;
    mark_power(d, h_min, payload_sq_norms, power_caps);
  }
  return d;
}

}  // namespace dslota
