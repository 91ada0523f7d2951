#include "dslota/channel.hpp"

#include <algorithm>
#include <cmath>

#include "dslota/error.hpp"

namespace dslota {

namespace {
// Rounding slack when comparing the realised power with the cap.
constexpr double kPowerTolerance = 1e-9;
}  // namespace

void ChannelConfig::validate() const {
  require(gain_variance >= 0.0, "gain variance must be nonnegative");
  require(gain_clamp > 0.0, "gain clamp must be positive");
  require(noise_variance >= 0.0, "noise variance must be nonnegative");
  require(b_default > 0.0, "power scaling factor b must be positive");
  require(b_variance >= 0.0, "b variance must be nonnegative");
}

double ChannelRealization::gain(std::size_t worker, std::size_t entry) const {
  const auto& h = gains[worker];
  return granularity == GainGranularity::kScalarPerWorker ? h.front() : h[entry];
}

double ChannelRealization::min_abs_gain(std::size_t worker) const {
  double m = std::abs(gains[worker].front());
  for (double h : gains[worker]) m = std::min(m, std::abs(h));
  return m;
}

double ChannelRealization::mean_abs_gain(std::size_t worker) const {
  double s = 0.0;
  for (double h : gains[worker]) s += std::abs(h);
  return s / static_cast<double>(gains[worker].size());
}

ChannelRealization sample_channel(std::size_t workers, std::size_t num_params,
                                  const ChannelConfig& config, Rng& rng) {
  config.validate();
  ChannelRealization ch;
  ch.b = config.b_default;
  ch.noise_variance = config.noise_variance;
  ch.granularity = config.granularity;
  const std::size_t entries =
      config.granularity == GainGranularity::kScalarPerWorker ? 1 : num_params;
  require(entries >= 1, "channel needs at least one entry per worker");
  const double sd = std::sqrt(config.gain_variance);
  ch.gains.assign(workers, std::vector<double>(entries));
  for (std::size_t i = 0; i < workers; ++i) {
    const double mean = config.gain_mean_scale * static_cast<double>(i + 1);
    require(std::abs(mean) >= config.gain_clamp || sd > 0.0,
            "degenerate gain distribution never clears the clamp");
    for (double& h : ch.gains[i]) {
      do {
        h = rng.normal(mean, sd);
      } while (std::abs(h) < config.gain_clamp);
    }
  }
  if (config.sample_worker_b) {
    const double b_sd = std::sqrt(config.b_variance);
    ch.worker_b.resize(workers);
    for (double& b : ch.worker_b) {
      do {
        b = rng.normal(config.b_default, b_sd);
      } while (b < config.gain_clamp);
    }
  }
  return ch;
}

Transmission transmit(std::span<const ParamVector> payloads, const std::vector<bool>& selected,
                      const ChannelRealization& channel, std::span<const double> power_caps,
                      Rng& rng) {
  const std::size_t C = channel.workers();
  require(payloads.size() == C && selected.size() == C && power_caps.size() == C,
          "transmit: array lengths disagree with the channel's worker count");
  require(channel.b > 0.0, "transmit: power scaling factor b must be positive");

  std::size_t N = 0;
  bool any = false;
  for (std::size_t i = 0; i < C; ++i) {
    if (!selected[i]) continue;
    if (!any) N = payloads[i].size();
    any = true;
    require(payloads[i].size() == N, "transmit: payload lengths differ");
  }
  require(any, "transmit: no worker selected");

  Transmission out;
  out.signal.y.assign(N, 0.0);
  out.transmit_power.assign(C, 0.0);
  for (std::size_t i = 0; i < C; ++i) {
    if (!selected[i]) continue;
    double power = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double h = channel.gain(i, n);
      const double x = channel.b / h * payloads[i][n];  // channel inversion
      power += x * x;
      out.signal.y[n] += h * x;
    }
    if (power > power_caps[i] * (1.0 + kPowerTolerance)) {
      throw Error("transmit: worker " + std::to_string(i) + " needs power " +
                  std::to_string(power) + " above its cap " + std::to_string(power_caps[i]));
    }
    out.transmit_power[i] = power;
  }
  if (channel.noise_variance > 0.0) {
    const double sd = std::sqrt(channel.noise_variance);
    for (double& v : out.signal.y) v += rng.normal(0.0, sd);
  }
  return out;
}

ParamVector decode(const ReceivedSignal& y, std::size_t n_selected, double b) {
  require(n_selected >= 1, "decode: no worker selected");
  require(b > 0.0, "decode: power scaling factor b must be positive");
  const double scale = static_cast<double>(n_selected) * b;
  ParamVector out(y.y.size());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = y.y[n] / scale;
  return out;
}

ParamVector ideal_aggregate(std::span<const ParamVector> payloads, const std::vector<bool>& selected) {
  require(payloads.size() == selected.size(), "ideal_aggregate: length mismatch");
  ParamVector sum;
  std::size_t count = 0;
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    if (!selected[i]) continue;
    if (count == 0) sum.assign(payloads[i].size(), 0.0);
    require(payloads[i].size() == sum.size(), "ideal_aggregate: payload lengths differ");
    for (std::size_t n = 0; n < sum.size(); ++n) sum[n] += payloads[i][n];
    ++count;
  }
  require(count >= 1, "ideal_aggregate: no worker selected");
  for (double& v : sum) v /= static_cast<double>(count);
  return sum;
}

}  // namespace dslota
