#include "zoc/baseline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace zoc {

void RgfParams::validate(const Topology& topo) const {
  if (!(mu > 0.0)) throw ArgumentError("RGF mu must be positive");
  if (!(step_c > 0.0)) throw ArgumentError("RGF step_c must be positive");
  if (total_iters < 1) throw ArgumentError("RGF total_iters must be at least 1");
  const auto n = static_cast<Eigen::Index>(topo.num_nodes);
  if (mixing.rows() != n || mixing.cols() != n) throw ArgumentError("mixing matrix must be N x N");
}

Matrix build_mixing(const Topology& topo) {
  topo.validate();
  const auto deg = topo.degrees();
  const auto n = static_cast<Eigen::Index>(topo.num_nodes);
  Matrix w = Matrix::Zero(n, n);
  for (const auto& [i, j] : topo.edges) {
    const double v = 1.0 / (1.0 + static_cast<double>(std::max(deg[i], deg[j])));
    w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
  }
  for (Eigen::Index i = 0; i < n; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return w;
}

Vector rgf_step(const VectorRef& x, std::size_t r, const RgfParams& params, const std::vector<Oracle>& oracles,
                Execution exec) {
  if (r < 1) throw ArgumentError("rgf_step: iteration index must be >= 1");
  const auto n = static_cast<Eigen::Index>(oracles.size());
  if (n == 0 || params.mixing.rows() != n) throw ArgumentError("rgf_step: mixing matrix and oracle count differ");
  const auto m = static_cast<Eigen::Index>(oracles.front().dim());
  if (x.size() != n * m) throw ArgumentError("rgf_step: x has the wrong length");
  const double step = rgf_stepsize(params.step_c, r);
  const SmoothingParams single{params.mu, 1};

  Vector out(x.size());
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  auto body = [&](Eigen::Index i) {
    Vector v = Vector::Zero(m);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double wij = params.mixing(i, j);
      if (wij != 0.0) v += wij * x.segment(j * m, m);
    }
    const Oracle& oracle = oracles[static_cast<std::size_t>(i)];
    Rng rng = make_rng(params.seed, {tag(Stream::kBaseline), static_cast<std::uint64_t>(i), r});
    Vector g;
    try {
      g = estimate_gradient(oracle, v, single, rng);
    } catch (const DomainError& e) {
      throw DomainError("RGF agent " + std::to_string(i) + ", iteration " + std::to_string(r) + ": " + e.what());
    }
    out.segment(i * m, m) = oracle.objective().box().project(v - step * g);
  };
  if (exec == Execution::kSerial) {
    for (Eigen::Index i = 0; i < n; ++i) body(i);
  } else {
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return out;
}

RunResult run_rgf(const Problem& problem, const RgfParams& params, const RunOptions& options) {
  params.validate(problem.topology);
  const std::vector<Oracle> oracles = problem.make_oracles();
  Vector x;
  if (options.x0) {
    if (static_cast<std::size_t>(options.x0->size()) != problem.stacked_dim()) throw ArgumentError("x0 has the wrong length");
    x = *options.x0;
  } else {
    x = initial_point(problem, options.init_box ? *options.init_box : default_init_box(problem), params.seed);
  }
  // rho only enters the primal-dual gap, which RGF does not use.
  const MetricRecorder recorder(problem, params.mu, 1.0, 0.0, options.table, options.exec);
  RunResult res;
  res.records.reserve(params.total_iters);
  IterateState state{x, Vector(), x, 0};
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t r = 1; r <= params.total_iters; ++r) {
    Vector next = rgf_step(state.x, r, params, oracles, options.exec);
    state.x_prev = std::move(state.x);
    state.x = std::move(next);
    state.iter = r;
    MetricRecord rec;
    rec.iter = r;
    if (options.record_metrics) rec = recorder.consensus(r, state.x);
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.records.push_back(rec);
    if (options.observer) options.observer(state, rec);
  }
  res.output_index = params.total_iters;
  res.output = state;
  res.final_state = state;
  return res;
}

}  // namespace zoc
