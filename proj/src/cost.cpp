#include "dslota/cost.hpp"

#include <algorithm>
#include <cmath>

#include "dslota/error.hpp"

namespace dslota {

std::string_view scheme_name(Scheme scheme) {
  return scheme == Scheme::kOfdma ? "ofdma" : "mac";
}

double shannon_rate(const LinkBudget& budget) {
  require(budget.bandwidth > 0.0, "shannon_rate: bandwidth must be positive");
  require(budget.noise_density > 0.0, "shannon_rate: noise density must be positive");
  require(budget.gain * budget.power >= 0.0, "shannon_rate: received power must be nonnegative");
  const double snr = budget.gain * budget.power / (budget.noise_density * budget.bandwidth);
  return budget.bandwidth * std::log2(1.0 + snr);
}

double round_time(double payload_bits, double rate) {
  require(rate > 0.0, "round_time: rate must be positive");
  require(payload_bits >= 0.0, "round_time: payload must be nonnegative");
  return payload_bits / rate;
}

namespace {

// Upload time is set by the narrowest carrier (lowest index on ties).
double bottleneck_time(std::span<const LinkBudget> budgets) {
  const auto narrow = std::min_element(
      budgets.begin(), budgets.end(),
      [](const LinkBudget& a, const LinkBudget& b) { return a.bandwidth < b.bandwidth; });
  return round_time(narrow->payload_bits, shannon_rate(*narrow));
}

}  // namespace

CostReport fedavg_cost(std::span<const LinkBudget> budgets) {
  require(!budgets.empty(), "fedavg_cost: no links");
  CostReport r;
  r.scheme = Scheme::kOfdma;
  r.time = bottleneck_time(budgets);
  for (const auto& b : budgets) r.bandwidth += b.bandwidth;
  return r;
}

CostReport dslota_cost(std::span<const LinkBudget> selected) {
  require(!selected.empty(), "dslota_cost: no selected links");
  CostReport r;
  r.scheme = Scheme::kMac;
  r.time = bottleneck_time(selected);
  for (const auto& b : selected) r.bandwidth = std::max(r.bandwidth, b.bandwidth);
  return r;
}

}  // namespace dslota
