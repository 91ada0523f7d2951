#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dslota/model.hpp"
#include "dslota/rng.hpp"

namespace dslota {

enum class GainGranularity { kScalarPerWorker, kVectorPerEntry };

struct ChannelConfig {
  // Worker i (1-based) draws gains from N(gain_mean_scale * i, gain_variance).
  double gain_mean_scale = 1.0;
  double gain_variance = 0.625;
  double gain_clamp = 0.05;  // |h| below this is redrawn
  double noise_variance = 1.0;
  double b_default = 1.0;
  // When set, each worker also draws b_i ~ N(b_default, b_variance).
  bool sample_worker_b = false;
  double b_variance = 0.625;
  GainGranularity granularity = GainGranularity::kVectorPerEntry;

  void validate() const;
};

// Per-round multiple-access channel state.
struct ChannelRealization {
  // gains[i] has N entries (vector mode) or one entry (scalar mode).
  std::vector<std::vector<double>> gains;
  double b = 1.0;
  std::vector<double> worker_b;  // filled only when b_i is sampled
  double noise_variance = 0.0;
  GainGranularity granularity = GainGranularity::kVectorPerEntry;

  std::size_t workers() const { return gains.size(); }
  double gain(std::size_t worker, std::size_t entry) const;
  // min_n |h_i^n|
  double min_abs_gain(std::size_t worker) const;
  double mean_abs_gain(std::size_t worker) const;
};

ChannelRealization sample_channel(std::size_t workers, std::size_t num_params,
                                  const ChannelConfig& config, Rng& rng);

struct ReceivedSignal {
  std::vector<double> y;
};

struct Transmission {
  ReceivedSignal signal;
  // ||p_i ⊙ w_i||^2 per worker; zero for workers that stayed silent.
  std::vector<double> transmit_power;
};

// Superposes channel-inverted payloads of the selected workers and adds
// N(0, σ²) receiver noise. `payloads` is indexed by worker; unselected
// entries are ignored. Throws if a selected worker would exceed its cap.
Transmission transmit(std::span<const ParamVector> payloads, const std::vector<bool>& selected,
                      const ChannelRealization& channel, std::span<const double> power_caps,
                      Rng& rng);

// y / (n_selected * b)
ParamVector decode(const ReceivedSignal& y, std::size_t n_selected, double b);

// Exact mean of the selected payloads.
ParamVector ideal_aggregate(std::span<const ParamVector> payloads, const std::vector<bool>& selected);

}  // namespace dslota
