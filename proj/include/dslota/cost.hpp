#pragma once

#include <span>
#include <string_view>

namespace dslota {

// One worker's uplink in a round.
struct LinkBudget {
  double bandwidth = 1.0;      // B, Hz
  double gain = 1.0;           // h
  double power = 1.0;          // p, W
  double noise_density = 1.0;  // P_z, W/Hz
  double payload_bits = 32.0;  // ||w||
};

enum class Scheme { kOfdma, kMac };

std::string_view scheme_name(Scheme scheme);

struct CostReport {
  double time = 0.0;       // T_t, s
  double bandwidth = 0.0;  // B_t, Hz
  Scheme scheme = Scheme::kOfdma;
};

// B·log2(1 + h·p / (P_z·B)), bits/s.
double shannon_rate(const LinkBudget& budget);

double round_time(double payload_bits, double rate);

// Frequency-multiplexed upload: every link gets its own carrier.
CostReport fedavg_cost(std::span<const LinkBudget> budgets);

// Simultaneous analog upload of the selected links on one shared carrier.
CostReport dslota_cost(std::span<const LinkBudget> selected);

// Bits for N parameters at the given width.
inline double payload_bits_for(std::size_t num_params, double bits_per_param = 32.0) {
  return static_cast<double>(num_params) * bits_per_param;
}

}  // namespace dslota
