#pragma once

// Randomized gradient-free consensus baseline (RGF): mix with neighbours,
// then step along a single-sample smoothed-gradient estimate with stepsize
// step_c / sqrt(r).

#include <cstdint>
#include <vector>

#include "zoc/engine.hpp"

namespace zoc {

struct RgfParams {
  double mu = 1e-2;
  double step_c = 1.0;
  Matrix mixing;  // N x N, doubly stochastic, zero off the graph
  std::size_t total_iters = 1;
  std::uint64_t seed = 0;

  void validate(const Topology& topo) const;
};

/// Metropolis-Hastings weights: W_ij = 1 / (1 + max(d_i, d_j)) on edges, the
/// diagonal takes the remainder of each row.
[[nodiscard]] Matrix build_mixing(const Topology& topo);

[[nodiscard]] inline double rgf_stepsize(double step_c, std::size_t r) {
  return step_c / std::sqrt(static_cast<double>(r));
}

/// x_i+ = P_box(v_i - step_c / sqrt(r) G_i(v_i)) with v_i = sum_j W_ij x_j.
/// G_i is one sample from agent i's stream for iteration r. Requires r >= 1.
[[nodiscard]] Vector rgf_step(const VectorRef& x, std::size_t r, const RgfParams& params,
                              const std::vector<Oracle>& oracles, Execution exec = Execution::kSerial);

/// T iterations from the same initial point as the primal-dual run with the
/// same options. Metrics use the multiplier-free gap; potential is NaN.
[[nodiscard]] RunResult run_rgf(const Problem& problem, const RgfParams& params, const RunOptions& options = {});

}  // namespace zoc
