#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dslota/channel.hpp"
#include "dslota/model.hpp"
#include "dslota/selection.hpp"
#include "dslota/swarm.hpp"

namespace dslota {

enum class Algorithm {
  kDslOta,         // multi-worker selection, analog MAC aggregation
  kFedAvg,         // all workers, ideal channel, no swarm terms
  kDslBest,        // single best worker's model adopted
  kDslMultiIdeal,  // DSL-OTA selection with noise-free aggregation
};

enum class DataSource { kLocal, kGlobal };
enum class Payload { kDelta, kModel };
// Model the workers start each round from.
enum class Broadcast { kServer, kGlobalBest };
// Model whose test accuracy is reported.
enum class EvalModel { kGlobalBest, kServer };

std::string_view algorithm_name(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

// Flat experiment description. Every field has a `key = value` spelling in
// the config file; see README for the full list.
struct ExperimentConfig {
  Algorithm algorithm = Algorithm::kDslOta;
  std::size_t workers = 10;
  std::size_t rounds = 40;
  std::size_t local_epochs = 10;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double tau = 0.9;
  double dirichlet_alpha = 1.0;
  bool iid = false;

  // Model
  Architecture architecture = Architecture::kLinear;
  std::size_t hidden = 16;
  Activation activation = Activation::kTanh;
  double init_scale = 0.1;

  // Data
  std::size_t classes = 3;
  std::size_t dim = 20;
  std::size_t samples_per_worker = 512;
  double separation = 3.0;
  std::size_t eval_pool_size = 4096;
  std::size_t eval_size = 2048;
  std::size_t test_size = 2000;
  std::string dataset_csv;  // empty: synthetic blobs

  // Channel and power
  ChannelConfig channel;
  ScalingMode scaling = ScalingMode::kCoupled;
  double power_cap = 1.0;

  // Swarm dynamics
  CoefficientMode coefficient_mode = CoefficientMode::kPerRound;
  SwarmCoefficients coefficients;
  DataSource grad_source = DataSource::kLocal;
  DataSource score_source = DataSource::kLocal;
  Payload payload = Payload::kDelta;
  Broadcast broadcast = Broadcast::kGlobalBest;  // fedavg always starts from the server model
  EvalModel eval_model = EvalModel::kGlobalBest;
  bool score_gate = true;  // false: θ̄ = +inf every round

  // Cost accounting
  double bits_per_param = 32.0;
  double carrier_bandwidth = 1.0;
  double noise_density = 1.0;

  std::uint64_t seed = 1;
  std::size_t threads = 1;

  // Applies one `key = value` assignment. Unknown keys are errors.
  void set(std::string_view key, std::string_view value);
  void validate() const;

  ModelSpec model_spec() const;

  // Every key with its current value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
};

// Parses a `key = value` document ('#' starts a comment).
ExperimentConfig parse_config(std::string_view text, std::string_view origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace dslota
