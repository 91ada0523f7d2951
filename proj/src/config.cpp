#include "dslota/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "dslota/error.hpp"

namespace dslota {

std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kDslOta: return "dsl_ota";
    case Algorithm::kFedAvg: return "fedavg";
    case Algorithm::kDslBest: return "dsl_best";
    case Algorithm::kDslMultiIdeal: return "dsl_multi_ideal";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  for (auto a : {Algorithm::kDslOta, Algorithm::kFedAvg, Algorithm::kDslBest,
                 Algorithm::kDslMultiIdeal})
    if (algorithm_name(a) == name) return a;
  throw Error("unknown algorithm '" + std::string(name) + "'");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  try {
    std::size_t used = 0;
    const double d = std::stod(s, &used);
    if (used == s.size()) return d;
  } catch (const std::logic_error&) {
  }
  throw Error("config key '" + std::string(key) + "': expected a number, got '" + s + "'");
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw Error("config key '" + std::string(key) + "': expected a nonnegative integer, got '" +
                std::string(v) + "'");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config key '" + std::string(key) + "': expected true/false, got '" +
              std::string(v) + "'");
}

template <typename Enum>
Enum to_enum(std::string_view key, std::string_view v,
             std::initializer_list<std::pair<std::string_view, Enum>> names) {
  for (const auto& [name, e] : names)
    if (name == v) return e;
  std::string allowed;
  for (const auto& [name, e] : names) allowed += (allowed.empty() ? "" : "|") + std::string(name);
  throw Error("config key '" + std::string(key) + "': expected " + allowed + ", got '" +
              std::string(v) + "'");
}

template <typename Enum>
std::string from_enum(Enum e, std::initializer_list<std::pair<std::string_view, Enum>> names) {
  for (const auto& [name, value] : names)
    if (value == e) return std::string(name);
  return "?";
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::initializer_list<std::pair<std::string_view, Architecture>> kArch = {
    {"linear", Architecture::kLinear}, {"mlp", Architecture::kMlp}};
const std::initializer_list<std::pair<std::string_view, Activation>> kAct = {
    {"tanh", Activation::kTanh}, {"relu", Activation::kRelu}};
const std::initializer_list<std::pair<std::string_view, ScalingMode>> kScaling = {
    {"fixed", ScalingMode::kFixed}, {"sampled", ScalingMode::kSampled},
    {"coupled", ScalingMode::kCoupled}};
const std::initializer_list<std::pair<std::string_view, GainGranularity>> kGranularity = {
    {"vector", GainGranularity::kVectorPerEntry}, {"scalar", GainGranularity::kScalarPerWorker}};
const std::initializer_list<std::pair<std::string_view, CoefficientMode>> kCoefMode = {
    {"fixed", CoefficientMode::kFixed}, {"per_run", CoefficientMode::kPerRun},
    {"per_round", CoefficientMode::kPerRound}};
const std::initializer_list<std::pair<std::string_view, DataSource>> kSource = {
    {"local", DataSource::kLocal}, {"global", DataSource::kGlobal}};
const std::initializer_list<std::pair<std::string_view, Payload>> kPayload = {
    {"delta", Payload::kDelta}, {"model", Payload::kModel}};
const std::initializer_list<std::pair<std::string_view, Broadcast>> kBroadcast = {
    {"server", Broadcast::kServer}, {"global_best", Broadcast::kGlobalBest}};
const std::initializer_list<std::pair<std::string_view, EvalModel>> kEvalModel = {
    {"global_best", EvalModel::kGlobalBest}, {"server", EvalModel::kServer}};

struct Field {
  std::string_view key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define DSLOTA_SIZE(name, member)                                                          \
  Field{name, [](ExperimentConfig& c, std::string_view v) { c.member = to_uint(name, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }}
#define DSLOTA_REAL(name, member)                                                            \
  Field{name, [](ExperimentConfig& c, std::string_view v) { c.member = to_double(name, v); }, \
        [](const ExperimentConfig& c) { return fmt_double(c.member); }}
#define DSLOTA_BOOL(name, member)                                                          \
  Field{name, [](ExperimentConfig& c, std::string_view v) { c.member = to_bool(name, v); }, \
        [](const ExperimentConfig& c) { return std::string(c.member ? "true" : "false"); }}
#define DSLOTA_ENUM(name, member, table)                                                          \
  Field{name, [](ExperimentConfig& c, std::string_view v) { c.member = to_enum(name, v, table); }, \
        [](const ExperimentConfig& c) { return from_enum(c.member, table); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      Field{"algorithm",
            [](ExperimentConfig& c, std::string_view v) { c.algorithm = parse_algorithm(v); },
            [](const ExperimentConfig& c) { return std::string(algorithm_name(c.algorithm)); }},
      DSLOTA_SIZE("workers", workers),
      DSLOTA_SIZE("rounds", rounds),
      DSLOTA_SIZE("local_epochs", local_epochs),
      DSLOTA_SIZE("batch_size", batch_size),
      DSLOTA_REAL("learning_rate", learning_rate),
      DSLOTA_REAL("tau", tau),
      DSLOTA_REAL("dirichlet_alpha", dirichlet_alpha),
      DSLOTA_BOOL("iid", iid),
      DSLOTA_ENUM("model", architecture, kArch),
      DSLOTA_SIZE("hidden", hidden),
      DSLOTA_ENUM("activation", activation, kAct),
      DSLOTA_REAL("init_scale", init_scale),
      DSLOTA_SIZE("classes", classes),
      DSLOTA_SIZE("dim", dim),
      DSLOTA_SIZE("samples_per_worker", samples_per_worker),
      DSLOTA_REAL("separation", separation),
      DSLOTA_SIZE("eval_pool_size", eval_pool_size),
      DSLOTA_SIZE("eval_size", eval_size),
      DSLOTA_SIZE("test_size", test_size),
      Field{"dataset_csv",
            [](ExperimentConfig& c, std::string_view v) { c.dataset_csv = std::string(v); },
            [](const ExperimentConfig& c) { return c.dataset_csv; }},
      DSLOTA_REAL("gain_mean_scale", channel.gain_mean_scale),
      DSLOTA_REAL("gain_variance", channel.gain_variance),
      DSLOTA_REAL("gain_clamp", channel.gain_clamp),
      DSLOTA_REAL("noise_variance", channel.noise_variance),
      DSLOTA_REAL("b_value", channel.b_default),
      DSLOTA_REAL("b_variance", channel.b_variance),
      DSLOTA_ENUM("granularity", channel.granularity, kGranularity),
      DSLOTA_ENUM("b_mode", scaling, kScaling),
      DSLOTA_REAL("power_cap", power_cap),
      DSLOTA_ENUM("coefficient_mode", coefficient_mode, kCoefMode),
      DSLOTA_REAL("c0", coefficients.inertia),
      DSLOTA_REAL("c1", coefficients.personal),
      DSLOTA_REAL("c2", coefficients.global),
      DSLOTA_ENUM("grad_source", grad_source, kSource),
      DSLOTA_ENUM("score_source", score_source, kSource),
      DSLOTA_ENUM("payload", payload, kPayload),
      DSLOTA_ENUM("broadcast", broadcast, kBroadcast),
      DSLOTA_ENUM("eval_model", eval_model, kEvalModel),
      DSLOTA_BOOL("score_gate", score_gate),
      DSLOTA_REAL("bits_per_param", bits_per_param),
      DSLOTA_REAL("carrier_bandwidth", carrier_bandwidth),
      DSLOTA_REAL("noise_density", noise_density),
      DSLOTA_SIZE("seed", seed),
      DSLOTA_SIZE("threads", threads),
  };
  return kFields;
}

#undef DSLOTA_SIZE
#undef DSLOTA_REAL
#undef DSLOTA_BOOL
#undef DSLOTA_ENUM

}  // namespace

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  }
  throw Error("unknown config key '" + std::string(key) + "'");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(std::string(f.key), f.get(*this));
  return out;
}

void ExperimentConfig::validate() const {
  require(rounds >= 1, "rounds must be at least 1");
  require(workers >= 1, "workers must be at least 1");
  require(local_epochs >= 1, "local_epochs must be at least 1");
  require(learning_rate >= 0.0, "learning_rate must be nonnegative");
  require(tau >= 0.0 && tau <= 1.0, "tau must lie in [0, 1]");
  require(iid || dirichlet_alpha > 0.0, "dirichlet_alpha must be positive");
  require(classes >= 1 && dim >= 1, "classes and dim must be positive");
  require(architecture == Architecture::kLinear || hidden >= 1, "mlp needs hidden >= 1");
  require(samples_per_worker >= 1, "samples_per_worker must be positive");
  require(eval_size >= 1, "eval_size must be positive");
  require(eval_size <= eval_pool_size, "eval_size exceeds eval_pool_size");
  require(test_size >= 1, "test_size must be positive");
  require(power_cap > 0.0, "power_cap must be positive");
  require(bits_per_param > 0.0, "bits_per_param must be positive");
  require(carrier_bandwidth > 0.0, "carrier_bandwidth must be positive");
  require(noise_density > 0.0, "noise_density must be positive");
  require(threads >= 1, "threads must be at least 1");
  require(dataset_csv.empty() || std::filesystem::exists(dataset_csv),
          "dataset_csv '" + dataset_csv + "' does not exist");
  channel.validate();
}

ModelSpec ExperimentConfig::model_spec() const {
  return architecture == Architecture::kLinear ? ModelSpec::linear(dim, classes)
                                               : ModelSpec::mlp(dim, hidden, classes, activation);
}

ExperimentConfig parse_config(std::string_view text, std::string_view origin) {
  ExperimentConfig cfg;
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw Error(where + ": expected 'key = value'");
    try {
      cfg.set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path.string());
}

}  // namespace dslota
