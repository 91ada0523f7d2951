#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "checks.hpp"
#include "dslota/config.hpp"
#include "dslota/cost.hpp"
#include "dslota/error.hpp"
#include "dslota/experiment.hpp"

namespace fs = std::filesystem;
using namespace dslota;

namespace {

ExperimentConfig load_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  ExperimentConfig config = path.empty() ? ExperimentConfig{} : load_config(path);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos, "--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return config;
}

void print_summary(const RunResult& r, const fs::path& out) {
  const auto& last = r.metrics.back();
  std::printf("%s: %zu rounds, final accuracy %.4f, rmse %.4f, last round %zu selected -> %s\n",
              std::string(algorithm_name(r.config.algorithm)).c_str(), r.metrics.size(),
              last.accuracy, last.rmse, last.n_selected, out.string().c_str());
}

std::vector<std::size_t> parse_sizes(const std::string& list) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = std::min(list.find(',', pos), list.size());
    const std::string item = list.substr(pos, comma - pos);
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == item.size() && !item.empty() && v > 0,
            "expected a positive integer list, got '" + list + "'");
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

std::vector<std::string> split(const std::string& list) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = std::min(list.find(',', pos), list.size());
    out.push_back(list.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), "cannot write " + path.string());
  os << text;
  require(static_cast<bool>(os), "failed writing " + path.string());
}

std::string cost_table(const std::vector<std::size_t>& workers, const LinkBudget& link) {
  std::string csv = "scheme,C,T_t,B_t,ratio\n";
  char line[256];
  for (std::size_t C : workers) {
    const std::vector<LinkBudget> links(C, link);
    const auto f = fedavg_cost(links);
    const auto d = dslota_cost(links);
    for (const auto& r : {f, d}) {
      std::snprintf(line, sizeof line, "%s,%zu,%.12g,%.12g,%.12g\n",
                    std::string(scheme_name(r.scheme)).c_str(), C, r.time, r.bandwidth,
                    f.bandwidth / r.bandwidth);
      csv += line;
    }
  }
  return csv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed swarm learning over a simulated analog multiple-access channel"};
  app.require_subcommand(1);

  std::string config_path, out_dir, algo;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Run one experiment and write metrics");
  simulate->add_option("--config", config_path, "Config file (key = value lines)")
      ->required()
      ->check(CLI::ExistingFile);
  simulate->add_option("--out", out_dir, "Output directory")->required();
  auto* seed_opt = simulate->add_option("--seed", seed, "Override the config seed");
  simulate->add_option("--algo", algo, "dsl_ota | fedavg | dsl_best | dsl_multi_ideal");
  simulate->add_option("--set", sets, "Extra key=value overrides");

  std::string workers_list = "10,20,30,40,50", table_out;
  LinkBudget link;
  std::size_t num_params = 63;
  auto* cost = app.add_subcommand("cost-table", "Tabulate per-round time and bandwidth costs");
  cost->add_option("--workers", workers_list, "Comma-separated worker counts");
  cost->add_option("--out", table_out, "CSV destination")->required();
  cost->add_option("--bandwidth", link.bandwidth, "Per-carrier bandwidth");
  cost->add_option("--gain", link.gain, "Channel gain");
  cost->add_option("--power", link.power, "Transmit power");
  cost->add_option("--noise-density", link.noise_density, "Noise power spectral density");
  cost->add_option("--params", num_params, "Model parameter count");
  double bits_per_param = 32.0;
  cost->add_option("--bits", bits_per_param, "Bits per parameter");

  bool quick = false;
  auto* selftest = app.add_subcommand("selftest", "Run the acceptance checks");
  selftest->add_flag("--quick", quick, "Skip the learning runs");

  std::string sweep_config, param, values, sweep_out = "sweep";
  std::vector<std::string> sweep_sets;
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per value of a config key");
  sweep->add_option("--config", sweep_config, "Base config file")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--param", param, "Config key to vary")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--out", sweep_out, "Output directory");
  sweep->add_option("--set", sweep_sets, "Extra key=value overrides");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      ExperimentConfig config = load_with_overrides(config_path, sets);
      if (*seed_opt) config.seed = seed;
      if (!algo.empty()) config.algorithm = parse_algorithm(algo);
      const auto result = run_experiment(config);
      emit_metrics(result, out_dir);
      print_summary(result, out_dir);
    } else if (*cost) {
      link.payload_bits = payload_bits_for(num_params, bits_per_param);
      write_file(table_out, cost_table(parse_sizes(workers_list), link));
      std::printf("wrote %s\n", table_out.c_str());
    } else if (*selftest) {
      acceptance::SuiteOptions options;
      options.learning = !quick;
      options.on_result = [](const acceptance::CheckResult& r) {
        std::printf("%s\n", acceptance::format_line(r).c_str());
        std::fflush(stdout);
      };
      int failed = 0;
      for (const auto& r : acceptance::run_suite(options)) failed += r.pass ? 0 : 1;
      std::printf("%s\n", failed == 0 ? "selftest passed" : "selftest FAILED");
      return failed == 0 ? 0 : 1;
    } else if (*sweep) {
      const ExperimentConfig base = load_with_overrides(sweep_config, sweep_sets);
      std::string summary = "value,algorithm,final_accuracy,final_rmse,mean_selected,total_bandwidth_time\n";
      for (const auto& value : split(values)) {
        ExperimentConfig config = base;
        config.set(param, value);
        const auto result = run_experiment(config);
        const fs::path dir = fs::path(sweep_out) / (param + "=" + value);
        emit_metrics(result, dir);
        double selected = 0.0;
        for (const auto& m : result.metrics) selected += static_cast<double>(m.n_selected);
        const auto& last = result.metrics.back();
        char row[512];
        std::snprintf(row, sizeof row, "%s,%s,%.12g,%.12g,%.12g,%.12g\n", value.c_str(),
                      std::string(algorithm_name(config.algorithm)).c_str(), last.accuracy,
                      last.rmse, selected / static_cast<double>(result.metrics.size()),
                      last.cumulative_bandwidth_time);
        summary += row;
        std::printf("%s=%s: final accuracy %.4f\n", param.c_str(), value.c_str(), last.accuracy);
      }
      write_file(fs::path(sweep_out) / "summary.csv", summary);
      std::printf("wrote %s\n", (fs::path(sweep_out) / "summary.csv").string().c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
