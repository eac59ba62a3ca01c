#include "zoc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace zoc {
namespace {

using nlohmann::json;

// Typed access to one JSON object with dotted field paths in errors.
class Section {
 public:
  Section(const json& doc, std::string path, std::initializer_list<const char*> allowed)
      : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(path_.empty() ? "config" : path_, "expected an object");
    for (const auto& [key, value] : doc_.items()) {
      const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
      if (!known) throw ConfigError(field(key), "unknown field");
    }
  }

  [[nodiscard]] std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  [[nodiscard]] bool has(const char* key) const { return doc_.contains(key) && !doc_.at(key).is_null(); }
  [[nodiscard]] const json& at(const char* key) const { return doc_.at(key); }

  [[nodiscard]] double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = doc_.at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    return v.get<double>();
  }

  [[nodiscard]] double positive(const char* key, double fallback) const {
    const double v = number(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(field(key), "must be positive");
    return v;
  }

  [[nodiscard]] std::uint64_t integer(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = doc_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0 && !v.is_number_unsigned())) {
      throw ConfigError(field(key), "expected a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  }

  [[nodiscard]] std::size_t count(const char* key, std::size_t fallback, std::size_t min_value) const {
    const auto v = static_cast<std::size_t>(integer(key, fallback));
    if (v < min_value) throw ConfigError(field(key), "must be at least " + std::to_string(min_value));
    return v;
  }

  [[nodiscard]] bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!doc_.at(key).is_boolean()) throw ConfigError(field(key), "expected true or false");
    return doc_.at(key).get<bool>();
  }

  [[nodiscard]] std::string text(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    if (!doc_.at(key).is_string()) throw ConfigError(field(key), "expected a string");
    return doc_.at(key).get<std::string>();
  }

  // A number, or the string "auto" (returns nullopt).
  [[nodiscard]] std::optional<double> number_or_auto(const char* key) const {
    if (!has(key)) return std::nullopt;
    const json& v = doc_.at(key);
    if (v.is_string() && v.get<std::string>() == "auto") return std::nullopt;
    if (!v.is_number() || !(v.get<double>() > 0.0)) throw ConfigError(field(key), "expected a positive number or \"auto\"");
    return v.get<double>();
  }

  [[nodiscard]] Section child(const char* key, std::initializer_list<const char*> allowed) const {
    static const json empty = json::object();
    return Section(has(key) ? doc_.at(key) : empty, field(key), allowed);
  }

 private:
  const json& doc_;
  std::string path_;
};

std::vector<double> number_list(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(field, "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  cfg.raw = doc;
  const Section top(doc, "", {"name", "topology", "objective", "noise", "algorithm", "baseline", "metrics", "trials",
                              "threads", "output_dir"});
  cfg.name = top.text("name", cfg.name);
  cfg.trials = top.count("trials", 1, 1);
  cfg.threads = top.count("threads", 0, 0);
  cfg.output_dir = top.text("output_dir", cfg.output_dir.string());

  const Section t = top.child("topology", {"kind", "nodes", "block_dim", "edge_prob", "seed", "edges"});
  TopologySpec& ts = cfg.topology;
  ts.kind = t.text("kind", t.has("edges") ? "explicit" : ts.kind);
  if (ts.kind != "ring" && ts.kind != "random_connected" && ts.kind != "explicit") {
    throw ConfigError(t.field("kind"), "expected ring, random_connected or explicit");
  }
  ts.nodes = t.count("nodes", ts.nodes, 2);
  ts.block_dim = t.count("block_dim", ts.block_dim, 1);
  ts.edge_prob = t.number("edge_prob", ts.edge_prob);
  if (!(ts.edge_prob >= 0.0 && ts.edge_prob <= 1.0)) throw ConfigError(t.field("edge_prob"), "must lie in [0, 1]");
  ts.seed = t.integer("seed", ts.seed);
  if (ts.kind == "explicit") {
    if (!t.has("edges") || !t.at("edges").is_array()) throw ConfigError(t.field("edges"), "explicit topology needs an edge list");
    for (const auto& e : t.at("edges")) {
      auto index = [](const json& v) { return v.is_number_integer() && v.get<std::int64_t>() >= 0; };
      if (!e.is_array() || e.size() != 2 || !index(e[0]) || !index(e[1])) {
        throw ConfigError(t.field("edges"), "each edge must be a pair of nonnegative node indices");
      }
      ts.edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
  }

  const Section o = top.child("objective", {"type", "seed", "perturb", "box_half_width", "alpha", "epsilon", "batch",
                                            "flip_prob", "csv", "hessian", "linear", "eig_min", "eig_max",
                                            "linear_scale"});
  ObjectiveSpec& os = cfg.objective;
  os.type = o.text("type", os.type);
  if (os.type != "toy" && os.type != "logreg" && os.type != "quadratic" && os.type != "zero") {
    throw ConfigError(o.field("type"), "expected toy, logreg, quadratic or zero");
  }
  os.seed = o.integer("seed", os.seed);
  os.perturb = o.boolean("perturb", os.perturb);
  os.box_half_width = o.positive("box_half_width", os.type == "quadratic" ? 2.0 : os.box_half_width);
  os.alpha = o.number("alpha", os.alpha);
  if (!(os.alpha >= 0.0)) throw ConfigError(o.field("alpha"), "must be nonnegative");
  os.epsilon = o.positive("epsilon", os.epsilon);
  os.batch = o.count("batch", os.batch, 1);
  os.flip_prob = o.number("flip_prob", os.flip_prob);
  if (!(os.flip_prob >= 0.0 && os.flip_prob <= 1.0)) throw ConfigError(o.field("flip_prob"), "must lie in [0, 1]");
  os.csv_pattern = o.text("csv", "");
  os.eig_min = o.number("eig_min", os.eig_min);
  os.eig_max = o.number("eig_max", os.eig_max);
  if (os.eig_min > os.eig_max) throw ConfigError(o.field("eig_min"), "must not exceed eig_max");
  os.linear_scale = o.number("linear_scale", os.linear_scale);
  const auto m = static_cast<Eigen::Index>(ts.block_dim);
  if (o.has("hessian")) {
    const json& h = o.at("hessian");
    if (!h.is_array() || static_cast<Eigen::Index>(h.size()) != m) {
      throw ConfigError(o.field("hessian"), "expected a block_dim x block_dim array");
    }
    Matrix hm(m, m);
    for (Eigen::Index r = 0; r < m; ++r) {
      const auto row = number_list(h[static_cast<std::size_t>(r)], o.field("hessian"));
      if (static_cast<Eigen::Index>(row.size()) != m) throw ConfigError(o.field("hessian"), "expected a block_dim x block_dim array");
      for (Eigen::Index c = 0; c < m; ++c) hm(r, c) = row[static_cast<std::size_t>(c)];
    }
    os.hessian = hm;
  }
  if (o.has("linear")) {
    const auto v = number_list(o.at("linear"), o.field("linear"));
    if (static_cast<Eigen::Index>(v.size()) != m) throw ConfigError(o.field("linear"), "expected block_dim entries");
    os.linear = Eigen::Map<const Vector>(v.data(), m);
  }
  if (os.linear && !os.hessian) throw ConfigError(o.field("hessian"), "required when linear is given");

  const Section n = top.child("noise", {"kind", "std_dev"});
  const std::string nk = n.text("kind", "none");
  if (nk == "none") {
    cfg.noise = NoiseModel::none();
  } else if (nk == "additive_gaussian") {
    const double sd = n.number("std_dev", 0.0);
    if (!(sd >= 0.0)) throw ConfigError(n.field("std_dev"), "must be nonnegative");
    cfg.noise = NoiseModel::additive_gaussian(sd);
  } else {
    throw ConfigError(n.field("kind"), "expected none or additive_gaussian");
  }

  const Section a = top.child("algorithm", {"rho", "c", "threshold_factor", "mu", "batch", "iterations", "seed",
                                            "init_box", "gradient", "modes"});
  AlgorithmSpec& as = cfg.algorithm;
  as.rho = a.number_or_auto("rho");
  as.c = a.number_or_auto("c");
  as.threshold_factor = a.number("threshold_factor", as.threshold_factor);
  if (!(as.threshold_factor > 1.0)) throw ConfigError(a.field("threshold_factor"), "must exceed 1");
  as.mu = a.positive("mu", as.mu);
  as.batch = a.count("batch", as.batch, 1);
  as.iterations = a.count("iterations", as.iterations, 1);
  as.seed = a.integer("seed", as.seed);
  if (a.has("init_box")) {
    const auto b = number_list(a.at("init_box"), a.field("init_box"));
    if (b.size() != 2 || !(b[0] <= b[1])) throw ConfigError(a.field("init_box"), "expected [lower, upper] with lower <= upper");
    as.init_box = std::make_pair(b[0], b[1]);
  }
  const std::string g = a.text("gradient", "zeroth_order");
  if (g == "zeroth_order") {
    as.gradient = GradientSource::kZerothOrder;
  } else if (g == "reference") {
    as.gradient = GradientSource::kReference;
  } else {
    throw ConfigError(a.field("gradient"), "expected zeroth_order or reference");
  }
  if (a.has("modes")) {
    const json& modes = a.at("modes");
    if (!modes.is_array() || modes.empty()) throw ConfigError(a.field("modes"), "expected a nonempty array");
    bool central = false;
    for (const auto& md : modes) {
      if (md == "centralized") {
        central = true;
      } else if (md == "distributed") {
        as.distributed = true;
      } else {
        throw ConfigError(a.field("modes"), "entries must be centralized or distributed");
      }
    }
    (void)central;  // the centralized run always produces the trace
  }

  const Section b = top.child("baseline", {"enabled", "step_c"});
  cfg.baseline.enabled = b.boolean("enabled", cfg.baseline.enabled);
  cfg.baseline.step_c = b.positive("step_c", cfg.baseline.step_c);

  const Section mt = top.child("metrics", {"mc_samples", "seed"});
  cfg.mc_samples = mt.count("mc_samples", cfg.mc_samples, 1);
  cfg.metrics_seed = mt.integer("seed", cfg.metrics_seed);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg = parse_config(doc);
  const auto base = path.parent_path();
  if (!cfg.objective.csv_pattern.empty() && std::filesystem::path(cfg.objective.csv_pattern).is_relative()) {
    cfg.objective.csv_pattern = (base / cfg.objective.csv_pattern).string();
  }
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
    cfg.output_dir = env;
  }
  return cfg;
}

Topology build_topology(const TopologySpec& spec) {
  Topology topo;
  if (spec.kind == "explicit") {
    topo.num_nodes = spec.nodes;
    topo.block_dim = spec.block_dim;
    topo.edges = spec.edges;
  } else {
    topo = generate_graph(parse_graph_kind(spec.kind), spec.nodes, spec.edge_prob, spec.seed, spec.block_dim);
  }
  topo.validate();
  return topo;
}

namespace {

ObjectivePtr random_quadratic(const ObjectiveSpec& spec, std::size_t m, std::size_t agent) {
  const auto mi = static_cast<Eigen::Index>(m);
  Rng rng = make_rng(spec.seed, {tag(Stream::kData), agent});
  Matrix g(mi, mi);
  for (Eigen::Index c = 0; c < mi; ++c) {
    for (Eigen::Index r = 0; r < mi; ++r) g(r, c) = standard_normal(rng);
  }
  const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
  Vector eig(mi);
  for (Eigen::Index k = 0; k < mi; ++k) eig[k] = uniform(rng, spec.eig_min, spec.eig_max);
  Matrix h = q * eig.asDiagonal() * q.transpose();
  h = (0.5 * (h + h.transpose())).eval();
  Vector b(mi);
  for (Eigen::Index k = 0; k < mi; ++k) b[k] = spec.linear_scale * standard_normal(rng);
  return quadratic_family(h, b, Box::cube(m, -spec.box_half_width, spec.box_half_width));
}

std::string agent_path(const std::string& pattern, std::size_t agent) {
  std::string out = pattern;
  const auto pos = out.find("{i}");
  if (pos == std::string::npos) throw ConfigError("objective.csv", "pattern must contain {i}");
  out.replace(pos, 3, std::to_string(agent));
  return out;
}

}  // namespace

std::vector<ObjectivePtr> build_objectives(const ObjectiveSpec& spec, const Topology& topo) {
  const std::size_t n = topo.num_nodes;
  const std::size_t m = topo.block_dim;
  std::vector<ObjectivePtr> out;
  if (spec.type == "toy") {
    if (m != 1) throw ConfigError("topology.block_dim", "the toy objective is one-dimensional");
    return toy_objectives(n, spec.perturb, spec.seed, spec.box_half_width);
  }
  if (spec.type == "zero") {
    for (std::size_t i = 0; i < n; ++i) out.push_back(zero_objective(m));
    return out;
  }
  if (spec.type == "quadratic") {
    for (std::size_t i = 0; i < n; ++i) {
      if (spec.hessian) {
        const Vector b = spec.linear ? *spec.linear : Vector::Zero(static_cast<Eigen::Index>(m));
        out.push_back(quadratic_family(*spec.hessian, b, Box::cube(m, -spec.box_half_width, spec.box_half_width)));
      } else {
        out.push_back(random_quadratic(spec, m, i));
      }
    }
    return out;
  }
  // logreg
  std::vector<ClassificationData> data;
  if (!spec.csv_pattern.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      data.push_back(read_classification_csv(agent_path(spec.csv_pattern, i)));
      if (data.back().dim() != m) {
        throw ConfigError("objective.csv", "agent " + std::to_string(i) + " data has " +
                                               std::to_string(data.back().dim()) + " features, block_dim is " +
                                               std::to_string(m));
      }
    }
  } else {
    data = synthesize_data(n, spec.batch, m, spec.seed, spec.flip_prob);
  }
  for (const auto& d : data) out.push_back(logreg_objective(d, spec.alpha, spec.epsilon, n));
  return out;
}

Setup prepare(const ExperimentConfig& config) {
  Setup s;
  Topology topo = build_topology(config.topology);
  auto objectives = build_objectives(config.objective, topo);
  s.problem = Problem::make(std::move(topo), std::move(objectives), config.noise);
  const bool need_table = std::any_of(s.problem.objectives.begin(), s.problem.objectives.end(),
                                      [](const ObjectivePtr& f) { return !f->exact_smoothing(); });
  if (need_table) {
    s.table = std::make_shared<const NormalTable>(config.mc_samples, config.topology.block_dim,
                                                  derive_seed(config.metrics_seed, {tag(Stream::kReferenceTable)}));
  }
  s.L0 = s.problem.lipschitz();
  if (!std::isfinite(s.L0)) throw ConfigError("objective", "Lipschitz constant is not finite; use a bounded box");
  const std::size_t q = s.problem.stacked_dim();
  const double mu = config.algorithm.mu;
  // A zero objective has L0 = 0; the thresholds still need a positive value.
  const double l0_for_bounds = s.L0 > 0.0 ? s.L0 : std::numeric_limits<double>::min();
  if (config.algorithm.c) {
    s.c = *config.algorithm.c;
  } else {
    s.c = default_params(l0_for_bounds, mu, q, s.problem.mats, config.algorithm.threshold_factor).c;
  }
  if (config.algorithm.rho) {
    s.rho = *config.algorithm.rho;
  } else {
    s.rho = config.algorithm.threshold_factor *
            validate_params(l0_for_bounds, mu, q, s.problem.mats, s.c, 1.0).required_rho;
  }
  s.report = validate_params(l0_for_bounds, mu, q, s.problem.mats, s.c, s.rho);
  const std::size_t m = config.topology.block_dim;
  if (config.algorithm.init_box) {
    s.init_box = Box::cube(m, config.algorithm.init_box->first, config.algorithm.init_box->second);
  } else {
    s.init_box = default_init_box(s.problem);
  }
  const std::size_t j = config.algorithm.gradient == GradientSource::kReference ? 0 : config.algorithm.batch;
  s.potential_floor = potential_lower_bound(s.L0, q, s.problem.mats.sigma_min, j, s.problem.smoothed_lower_bound(mu));
  return s;
}

std::vector<MetricRecord> average_records(const std::vector<const std::vector<MetricRecord>*>& runs) {
  std::vector<MetricRecord> out;
  if (runs.empty()) return out;
  const std::size_t len = runs.front()->size();
  for (const auto* r : runs) {
    if (r->size() != len) throw ArgumentError("average_records: runs have different lengths");
  }
  const double n = static_cast<double>(runs.size());
  out.resize(len);
  for (std::size_t k = 0; k < len; ++k) {
    MetricRecord m;
    m.iter = (*runs.front())[k].iter;
    for (const auto* r : runs) {
      const MetricRecord& x = (*r)[k];
      m.stationarity_gap += x.stationarity_gap;
      m.constraint_violation += x.constraint_violation;
      m.potential += x.potential;
      m.objective += x.objective;
      m.wall_time += x.wall_time;
    }
    m.stationarity_gap /= n;
    m.constraint_violation /= n;
    m.potential /= n;
    m.objective /= n;
    m.wall_time /= n;
    out[k] = m;
  }
  return out;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<CsvRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (f == nullptr) throw std::runtime_error("cannot write " + path.string());
  std::fputs("method,trial,iter,stationarity_gap,constraint_violation,potential,objective\n", f);
  for (const auto& row : rows) {
    const MetricRecord& r = row.record;
    std::fprintf(f, "%s,%s,%zu,%.17g,%.17g,%.17g,%.17g\n", row.method.c_str(), row.trial.c_str(), r.iter,
                 r.stationarity_gap, r.constraint_violation, r.potential, r.objective);
  }
  if (std::fclose(f) != 0) throw std::runtime_error("error writing " + path.string());
}

std::vector<CsvRow> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "method,trial,iter,stationarity_gap,constraint_violation,potential,objective") {
    throw std::runtime_error(path.string() + ": unexpected header");
  }
  std::vector<CsvRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 7 fields");
    CsvRow row;
    row.method = cells[0];
    row.trial = cells[1];
    try {
      row.record.iter = std::stoul(cells[2]);
      row.record.stationarity_gap = std::strtod(cells[3].c_str(), nullptr);
      row.record.constraint_violation = std::strtod(cells[4].c_str(), nullptr);
      row.record.potential = std::strtod(cells[5].c_str(), nullptr);
      row.record.objective = std::strtod(cells[6].c_str(), nullptr);
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string config_hash(const json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : doc.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

constexpr double kModeTolerance = 1e-12;

TrialResult run_trial(const ExperimentConfig& config, const Setup& setup, std::size_t t) {
  TrialResult tr;
  tr.trial = t;
  tr.seed = derive_seed(config.algorithm.seed, {tag(Stream::kTrial), t});
  AlgoParams params;
  params.rho = setup.rho;
  params.mu = config.algorithm.mu;
  params.batch = config.algorithm.batch;
  params.total_iters = config.algorithm.iterations;
  params.seed = tr.seed;
  params.gradient = config.algorithm.gradient;

  RunOptions opts;
  opts.init_box = setup.init_box;
  opts.table = setup.table.get();
  opts.potential_c = setup.c;

  try {
    std::vector<std::pair<Vector, Vector>> central_states;
    opts.observer = [&](const IterateState& s, const MetricRecord& rec) {
      tr.primal_dual.push_back(rec);
      if (config.algorithm.distributed) central_states.emplace_back(s.x, s.lambda);
    };
    const RunResult central = run_centralized(setup.problem, params, opts);
    tr.output_index = central.output_index;
    if (config.algorithm.distributed) {
      RunOptions dopts = opts;
      dopts.record_metrics = false;
      std::size_t k = 0;
      dopts.observer = [&](const IterateState& s, const MetricRecord&) {
        const auto& [cx, cl] = central_states.at(k++);
        tr.mode_discrepancy = std::max({tr.mode_discrepancy, (s.x - cx).cwiseAbs().maxCoeff(),
                                        s.lambda.size() ? (s.lambda - cl).cwiseAbs().maxCoeff() : 0.0});
      };
      (void)run_distributed(setup.problem, params, dopts);
      if (!(tr.mode_discrepancy < kModeTolerance)) {
        throw std::runtime_error("centralized and distributed runs differ by " + format_double(tr.mode_discrepancy));
      }
    }
    if (config.baseline.enabled) {
      RgfParams rp;
      rp.mu = config.algorithm.mu;
      rp.step_c = config.baseline.step_c;
      rp.mixing = build_mixing(setup.problem.topology);
      rp.total_iters = config.algorithm.iterations;
      rp.seed = tr.seed;
      RunOptions bopts;
      bopts.init_box = setup.init_box;
      bopts.table = setup.table.get();
      bopts.observer = [&](const IterateState&, const MetricRecord& rec) { tr.rgf.push_back(rec); };
      (void)run_rgf(setup.problem, rp, bopts);
    }
  } catch (const std::exception& e) {
    tr.error = e.what();
  }
  return tr;
}

void write_plot_script(const std::filesystem::path& dir, const std::string& name, bool with_rgf) {
  std::ofstream gp(dir / "plot.gp");
  gp << "# gnuplot script; run from this directory: gnuplot plot.gp\n"
     << "set datafile separator ','\n"
     << "set terminal pngcairo size 900,600\n"
     << "set logscale y\n"
     << "set xlabel 'iteration'\n"
     << "set key top right\n"
     << "sel(m, col) = (strcol(1) eq m) ? column(col) : NaN\n";
  auto curves = [&](int col) {
    std::string s = "plot 'averaged.csv' using 3:(sel('zo_pd', " + std::to_string(col) + ")) with lines lw 2 title 'ZO primal-dual'";
    if (with_rgf) s += ", \\\n     'averaged.csv' using 3:(sel('rgf', " + std::to_string(col) + ")) with lines lw 2 title 'RGF (reconstruction)'";
    return s + "\n";
  };
  gp << "set output 'gap.png'\n"
     << "set title '" << name << ": stationarity gap (trial average)'\n"
     << "set ylabel 'stationarity gap'\n"
     << curves(4)
     << "set output 'violation.png'\n"
     << "set title '" << name << ": constraint violation ||Ax|| (trial average)'\n"
     << "set ylabel '||Ax||'\n"
     << curves(5);
}

json report_json(const ParamReport& r) {
  return json{{"valid", r.valid},
              {"c_ok", r.c_ok},
              {"rho_ok", r.rho_ok},
              {"required_c", r.required_c},
              {"required_rho", r.required_rho},
              {"L1", r.L1},
              {"sigma_min", r.sigma_min},
              {"lplus_norm", r.lplus_norm},
              {"k", r.k},
              {"alpha1", r.alpha1},
              {"alpha2", r.alpha2},
              {"alpha2_flipped", r.alpha2_flipped},
              {"alpha3", r.alpha3},
              {"lower_bound_c", r.lower_bound_c},
              {"lower_bound_c_ok", r.lower_bound_c_ok}};
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, bool write_files) {
  const auto start = std::chrono::steady_clock::now();
  const Setup setup = prepare(config);
  ExperimentResult res;
  res.rho = setup.rho;
  res.c = setup.c;
  res.report = setup.report;
  res.potential_floor = setup.potential_floor;
  if (!setup.report.valid) {
    res.warnings.push_back("(c, rho) = (" + format_double(setup.c) + ", " + format_double(setup.rho) +
                           ") do not satisfy the sufficient conditions: need c > " +
                           format_double(setup.report.required_c) + " and rho > " +
                           format_double(setup.report.required_rho));
  }

  res.trials.resize(config.trials);
  const auto n = static_cast<long long>(config.trials);
#ifdef _OPENMP
  const int threads = config.threads > 0 ? static_cast<int>(config.threads) : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (long long t = 0; t < n; ++t) {
    res.trials[static_cast<std::size_t>(t)] = run_trial(config, setup, static_cast<std::size_t>(t));
  }

  std::vector<const std::vector<MetricRecord>*> pd, rgf;
  std::vector<std::string> errors;
  for (const auto& tr : res.trials) {
    if (!tr.error.empty()) {
      errors.push_back("trial " + std::to_string(tr.trial) + ": " + tr.error);
      continue;
    }
    pd.push_back(&tr.primal_dual);
    if (config.baseline.enabled) rgf.push_back(&tr.rgf);
  }
  res.primal_dual_mean = average_records(pd);
  res.rgf_mean = average_records(rgf);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (write_files) {
    const auto& dir = config.output_dir;
    std::filesystem::create_directories(dir);
    for (const auto& tr : res.trials) {
      std::vector<CsvRow> rows;
      const std::string trial = std::to_string(tr.trial);
      for (const auto& r : tr.primal_dual) rows.push_back({kMethodPrimalDual, trial, r});
      for (const auto& r : tr.rgf) rows.push_back({kMethodRgf, trial, r});
      write_trace_csv(dir / ("trial_" + trial + ".csv"), rows);
    }
    std::vector<CsvRow> mean_rows;
    for (const auto& r : res.primal_dual_mean) mean_rows.push_back({kMethodPrimalDual, "mean", r});
    for (const auto& r : res.rgf_mean) mean_rows.push_back({kMethodRgf, "mean", r});
    write_trace_csv(dir / "averaged.csv", mean_rows);
    write_plot_script(dir, config.name, config.baseline.enabled);

    json trials = json::array();
    for (const auto& tr : res.trials) {
      trials.push_back({{"trial", tr.trial},
                        {"seed", tr.seed},
                        {"output_index", tr.output_index},
                        {"mode_discrepancy", tr.mode_discrepancy},
                        {"error", tr.error}});
    }
    const json meta{{"name", config.name},
                    {"config", config.raw},
                    {"config_hash", config_hash(config.raw)},
                    {"version", ZOC_VERSION},
                    {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                          "." + std::to_string(EIGEN_MINOR_VERSION)},
                    {"compiler", __VERSION__},
                    {"rho", setup.rho},
                    {"c", setup.c},
                    {"L0", setup.L0},
                    {"potential_lower_bound", setup.potential_floor},
                    {"validator", report_json(setup.report)},
                    {"baseline", config.baseline.enabled ? "RGF reconstruction (Metropolis mixing, step_c/sqrt(r)); comparison is qualitative" : "disabled"},
                    {"trials", trials}};
    std::ofstream(dir / "run_meta.json") << meta.dump(2) << "\n";
  }

  if (!errors.empty()) {
    std::string msg = std::to_string(errors.size()) + " trial(s) failed";
    for (const auto& e : errors) msg += "\n  " + e;
    throw std::runtime_error(msg);
  }
  return res;
}

SweepReport sweep(const ExperimentConfig& config, const std::vector<std::size_t>& total_iters, bool write_files) {
  std::set<std::size_t> distinct(total_iters.begin(), total_iters.end());
  if (distinct.size() != total_iters.size()) throw ConfigError("sweep.T", "duplicate T values");
  if (total_iters.size() < 3) throw ConfigError("sweep.T", "need >= 3 T values");
  SweepReport report;
  std::vector<RatePoint> points;
  for (std::size_t t_total : total_iters) {
    if (t_total < 1) throw ConfigError("sweep.T", "T must be positive");
    ExperimentConfig c = config;
    c.algorithm.iterations = t_total;
    c.algorithm.batch = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(t_total))));
    c.output_dir = config.output_dir / ("T_" + std::to_string(t_total));
    c.raw["algorithm"]["iterations"] = t_total;
    c.raw["algorithm"]["batch"] = c.algorithm.batch;
    const ExperimentResult r = run_experiment(c, write_files);
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& tr : r.trials) {
      for (const auto& rec : tr.primal_dual) {
        sum += rec.stationarity_gap;
        ++count;
      }
    }
    SweepEntry e{t_total, c.algorithm.batch, sum / static_cast<double>(count)};
    report.entries.push_back(e);
    points.push_back({static_cast<double>(t_total), e.mean_gap});
  }
  report.fit = rate_fit(points);
  if (write_files) {
    json entries = json::array();
    for (const auto& e : report.entries) entries.push_back({{"T", e.total_iters}, {"J", e.batch}, {"mean_gap", e.mean_gap}});
    const json out{{"entries", entries},
                   {"gamma1", report.fit.gamma1},
                   {"constant", report.fit.constant},
                   {"relative_residual", report.fit.relative_residual},
                   {"r_squared", report.fit.r_squared}};
    std::filesystem::create_directories(config.output_dir);
    std::ofstream(config.output_dir / "rate_report.json") << out.dump(2) << "\n";
  }
  return report;
}

ValidationResult validate(const ExperimentConfig& config) {
  const Setup s = prepare(config);
  ValidationResult v;
  v.report = s.report;
  v.L0 = s.L0;
  v.mu = config.algorithm.mu;
  v.Q = s.problem.stacked_dim();
  v.rho = s.rho;
  v.c = s.c;
  v.potential_floor = s.potential_floor;
  return v;
}

std::string format_validation(const ValidationResult& v) {
  const ParamReport& r = v.report;
  std::ostringstream os;
  os << std::setprecision(10);
  os << "derived constants\n"
     << "  Q           = " << v.Q << "\n"
     << "  mu          = " << v.mu << "\n"
     << "  L0          = " << v.L0 << "\n"
     << "  L1          = " << r.L1 << "\n"
     << "  sigma_min   = " << r.sigma_min << "\n"
     << "  ||L+||      = " << r.lplus_norm << "\n"
     << "  k           = " << r.k << "\n"
     << "conditions\n"
     << "  c   = " << v.c << "  required > " << r.required_c << "  " << (r.c_ok ? "PASS" : "FAIL") << "\n"
     << "  rho = " << v.rho << "  required > " << r.required_rho << "  " << (r.rho_ok ? "PASS" : "FAIL") << "\n"
     << "  c >= 2||L+||/sigma_min (potential lower bound) = " << r.lower_bound_c << "  "
     << (r.lower_bound_c_ok ? "PASS" : "FAIL") << "\n"
     << "descent coefficients at (c, rho)\n"
     << "  alpha1 = " << r.alpha1 << "\n"
     << "  alpha2 = " << r.alpha2 << " (as printed), " << r.alpha2_flipped << " (opposite sign)\n"
     << "  alpha3 = " << r.alpha3 << "\n"
     << "potential lower bound = " << v.potential_floor << "\n"
     << "valid = " << (r.valid ? "true" : "false") << "\n";
  return os.str();
}

std::string format_sweep(const SweepReport& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "T,J,mean_gap\n";
  for (const auto& e : r.entries) os << e.total_iters << "," << e.batch << "," << e.mean_gap << "\n";
  os << "fit: mean_gap = gamma1 / T + const\n"
     << "  gamma1            = " << r.fit.gamma1 << "\n"
     << "  const             = " << r.fit.constant << "\n"
     << "  relative residual = " << r.fit.relative_residual << "\n"
     << "  r^2               = " << r.fit.r_squared << "\n";
  return os.str();
}

}  // namespace zoc
