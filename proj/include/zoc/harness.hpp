#pragma once

// Experiment configuration, orchestration over trials, CSV/JSON persistence,
// T sweeps and the parameter report.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "zoc/baseline.hpp"
#include "zoc/engine.hpp"

namespace zoc {

/// A config value is missing, mistyped or out of range. The message starts
/// with the dotted field path.
class ConfigError : public ArgumentError {
 public:
  ConfigError(const std::string& field, const std::string& what) : ArgumentError(field + ": " + what) {}
};

struct TopologySpec {
  std::string kind = "random_connected";  // ring | random_connected | explicit
  std::size_t nodes = 10;
  std::size_t block_dim = 1;
  double edge_prob = 0.3;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // kind == explicit
};

struct ObjectiveSpec {
  std::string type = "toy";  // toy | logreg | quadratic | zero
  std::uint64_t seed = 0;
  // toy
  bool perturb = false;
  double box_half_width = 5.0;
  // logreg
  double alpha = 0.1;
  double epsilon = 1e-3;
  std::size_t batch = 100;
  double flip_prob = 0.05;
  std::string csv_pattern;  // "{i}" is replaced by the agent index
  // quadratic: explicit (shared by all agents) or random per agent
  std::optional<Matrix> hessian;
  std::optional<Vector> linear;
  double eig_min = 1.0;
  double eig_max = 2.0;
  double linear_scale = 1.0;
};

struct AlgorithmSpec {
  std::optional<double> rho;  // unset: threshold_factor x the sufficient threshold
  std::optional<double> c;
  double threshold_factor = 1.1;
  double mu = 1e-2;
  std::size_t batch = 30;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  std::optional<std::pair<double, double>> init_box;
  GradientSource gradient = GradientSource::kZerothOrder;
  bool distributed = false;  // also run the message-passing mode and check equivalence
};

struct BaselineSpec {
  bool enabled = false;
  double step_c = 1.0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  TopologySpec topology;
  ObjectiveSpec objective;
  NoiseModel noise;
  AlgorithmSpec algorithm;
  BaselineSpec baseline;
  std::size_t mc_samples = 10000;  // rows of the reference normal table
  std::uint64_t metrics_seed = 0;
  std::size_t trials = 1;
  std::size_t threads = 0;  // 0: all available
  std::filesystem::path output_dir = "zoc_output";
  nlohmann::json raw;  // the parsed document, kept for run metadata
};

/// Name of the environment variable that overrides output_dir.
inline constexpr const char* kOutputDirEnv = "ZOC_OUTPUT_DIR";

[[nodiscard]] ExperimentConfig parse_config(const nlohmann::json& doc);
/// Reads a JSON file and applies the output-dir environment override.
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);

/// Everything derived from a config before any iteration runs.
struct Setup {
  Problem problem;
  std::shared_ptr<const NormalTable> table;  // null when all smoothing is closed form
  double L0 = 0.0;
  double rho = 0.0;
  double c = 0.0;
  ParamReport report;
  Box init_box;
  double potential_floor = 0.0;  // lower bound of the potential for the configured batch
};

[[nodiscard]] std::vector<ObjectivePtr> build_objectives(const ObjectiveSpec& spec, const Topology& topo);
[[nodiscard]] Topology build_topology(const TopologySpec& spec);
[[nodiscard]] Setup prepare(const ExperimentConfig& config);

inline constexpr const char* kMethodPrimalDual = "zo_pd";
inline constexpr const char* kMethodRgf = "rgf";

struct TrialResult {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::vector<MetricRecord> primal_dual;
  std::vector<MetricRecord> rgf;
  std::size_t output_index = 0;
  double mode_discrepancy = 0.0;  // max |centralized - distributed| when both ran
  std::string error;              // empty on success
};

struct ExperimentResult {
  std::vector<TrialResult> trials;
  std::vector<MetricRecord> primal_dual_mean;
  std::vector<MetricRecord> rgf_mean;
  double rho = 0.0;
  double c = 0.0;
  ParamReport report;
  double potential_floor = 0.0;
  std::vector<std::string> warnings;
  double seconds = 0.0;
};

/// Runs every trial (OpenMP over trials). With write_files, writes
/// trial_<t>.csv, averaged.csv, plot.gp and run_meta.json under output_dir.
/// Throws after writing whatever finished if any trial failed.
[[nodiscard]] ExperimentResult run_experiment(const ExperimentConfig& config, bool write_files = true);

/// Element-wise mean of equally long record lists.
[[nodiscard]] std::vector<MetricRecord> average_records(const std::vector<const std::vector<MetricRecord>*>& runs);

struct SweepEntry {
  std::size_t total_iters = 0;
  std::size_t batch = 0;
  double mean_gap = 0.0;  // over iterations and trials, estimating E_u[gap at u]
};

struct SweepReport {
  std::vector<SweepEntry> entries;
  RateFit fit;
};

/// Runs the config for each T with J = ceil(sqrt(T)) into output_dir/T_<T>
/// and fits mean gap = gamma1 / T + const. Needs >= 3 distinct T values.
[[nodiscard]] SweepReport sweep(const ExperimentConfig& config, const std::vector<std::size_t>& total_iters,
                                bool write_files = true);

struct ValidationResult {
  ParamReport report;
  double L0 = 0.0;
  double mu = 0.0;
  std::size_t Q = 0;
  double rho = 0.0;
  double c = 0.0;
  double potential_floor = 0.0;
};

[[nodiscard]] ValidationResult validate(const ExperimentConfig& config);
[[nodiscard]] std::string format_validation(const ValidationResult& v);
[[nodiscard]] std::string format_sweep(const SweepReport& r);

/// One parsed CSV data row.
struct CsvRow {
  std::string method;
  std::string trial;
  MetricRecord record;
};

void write_trace_csv(const std::filesystem::path& path, const std::vector<CsvRow>& rows);
[[nodiscard]] std::vector<CsvRow> read_trace_csv(const std::filesystem::path& path);

/// FNV-1a of the canonical JSON dump.
[[nodiscard]] std::string config_hash(const nlohmann::json& doc);

}  // namespace zoc
