// Command-line front end: run, sweep, validate, gen-graph, gen-data.
//
// Exit codes: 0 success, 2 invalid input (config, graph, arguments) or a
// failed parameter check in `validate`, 1 any other runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zoc/harness.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 1;

std::vector<std::size_t> parse_t_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || item.empty()) throw zoc::ConfigError("--T", "'" + item + "' is not a positive integer");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void print_summary(const zoc::ExperimentResult& r, const zoc::ExperimentConfig& cfg) {
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  std::printf("experiment %s: %zu trial(s), T = %zu, rho = %.6g, c = %.6g, %.2f s\n", cfg.name.c_str(),
              r.trials.size(), cfg.algorithm.iterations, r.rho, r.c, r.seconds);
  auto last = [](const std::vector<zoc::MetricRecord>& v, const char* label) {
    if (v.empty()) return;
    const auto& first = v.front();
    const auto& end = v.back();
    std::printf("  %-6s gap %.6g -> %.6g   ||Ax|| %.6g -> %.6g\n", label, first.stationarity_gap, end.stationarity_gap,
                first.constraint_violation, end.constraint_violation);
  };
  last(r.primal_dual_mean, zoc::kMethodPrimalDual);
  last(r.rgf_mean, zoc::kMethodRgf);
  std::printf("  output: %s\n", cfg.output_dir.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zeroth-order primal-dual consensus optimization experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::size_t threads = 0;

  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  run->add_option("--threads", threads, "trial threads (0: config value)");

  std::string t_list;
  auto* sw = app.add_subcommand("sweep", "run the config for several T with J = ceil(sqrt(T)) and fit the rate");
  sw->add_option("config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  sw->add_option("--T", t_list, "comma-separated T values, at least 3")->required();
  sw->add_option("--threads", threads, "trial threads (0: config value)");

  auto* val = app.add_subcommand("validate", "print the parameter conditions without running");
  val->add_option("config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);

  std::string kind = "random_connected";
  std::size_t nodes = 10;
  std::size_t block_dim = 1;
  double edge_prob = 0.3;
  std::uint64_t seed = 0;
  std::string out_path;
  auto* gg = app.add_subcommand("gen-graph", "generate a connected topology as JSON");
  gg->add_option("--kind", kind, "ring or random_connected")->check(CLI::IsMember({"ring", "random_connected"}));
  gg->add_option("--nodes", nodes, "number of agents")->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
  gg->add_option("--block-dim", block_dim, "per-agent dimension M")->check(CLI::PositiveNumber);
  gg->add_option("--p", edge_prob, "extra edge probability")->check(CLI::Range(0.0, 1.0));
  gg->add_option("--seed", seed, "seed");
  gg->add_option("-o,--output", out_path, "output file (default: stdout)");

  std::size_t batch = 100;
  std::size_t dim = 10;
  double flip = 0.05;
  std::string out_dir = "data";
  auto* gd = app.add_subcommand("gen-data", "synthesize per-agent classification CSVs agent_<i>.csv");
  gd->add_option("--agents", nodes, "number of agents")->check(CLI::PositiveNumber);
  gd->add_option("--batch", batch, "samples per agent")->check(CLI::PositiveNumber);
  gd->add_option("--dim", dim, "feature dimension")->check(CLI::PositiveNumber);
  gd->add_option("--flip", flip, "label flip probability")->check(CLI::Range(0.0, 1.0));
  gd->add_option("--seed", seed, "seed");
  gd->add_option("--out-dir", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*run) {
      zoc::ExperimentConfig cfg = zoc::load_config(config_path);
      if (threads > 0) cfg.threads = threads;
      const auto result = zoc::run_experiment(cfg);
      print_summary(result, cfg);
    } else if (*sw) {
      zoc::ExperimentConfig cfg = zoc::load_config(config_path);
      if (threads > 0) cfg.threads = threads;
      const auto report = zoc::sweep(cfg, parse_t_list(t_list));
      std::cout << zoc::format_sweep(report);
    } else if (*val) {
      const auto v = zoc::validate(zoc::load_config(config_path));
      std::cout << zoc::format_validation(v);
      return v.report.valid ? 0 : kExitValidation;
    } else if (*gg) {
      const zoc::Topology topo =
          zoc::generate_graph(zoc::parse_graph_kind(kind), nodes, edge_prob, seed, block_dim);
      const zoc::NetworkMatrices mats = zoc::build_matrices(topo);
      const std::string text = nlohmann::json(topo).dump(2) + "\n";
      if (out_path.empty()) {
        std::cout << text;
      } else {
        std::ofstream(out_path) << text;
      }
      std::fprintf(stderr, "nodes %zu, edges %zu, sigma_min %.10g, ||L+|| %.10g\n", topo.num_nodes,
                   topo.num_edges(), mats.sigma_min, mats.lplus_norm);
    } else if (*gd) {
      const auto data = zoc::synthesize_data(nodes, batch, dim, seed, flip);
      std::filesystem::create_directories(out_dir);
      for (std::size_t i = 0; i < data.size(); ++i) {
        zoc::write_classification_csv(std::filesystem::path(out_dir) / ("agent_" + std::to_string(i) + ".csv"), data[i]);
      }
      std::fprintf(stderr, "wrote %zu files to %s\n", data.size(), out_dir.c_str());
    }
  } catch (const zoc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const zoc::GraphError& e) {
    std::cerr << "topology error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
