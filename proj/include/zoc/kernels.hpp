#pragma once

// Stacked (all-agent) kernels with a serial reference path and an OpenMP path.
// Both paths give bit-identical results: each agent's work only touches its
// own block and its own random stream.

#include <cstdint>
#include <vector>

#include "zoc/objectives.hpp"
#include "zoc/szo.hpp"

namespace zoc {

enum class Execution { kSerial, kParallel };

/// Random stream of agent `agent` at iteration `iter` for gradient estimation.
/// The centralized kernels and the distributed agents both use it.
[[nodiscard]] inline Rng gradient_stream(std::uint64_t seed, std::size_t agent, std::size_t iter) {
  return make_rng(seed, {tag(Stream::kGradient), agent, iter});
}

/// Agent `agent`'s batch estimate at its block `x_block`.
[[nodiscard]] Vector estimate_agent_gradient(const Oracle& oracle, const VectorRef& x_block,
                                             const SmoothingParams& params, std::uint64_t seed, std::size_t agent,
                                             std::size_t iter);

/// Stacked zeroth-order estimate [G_1; ...; G_N] at the stacked point x.
[[nodiscard]] Vector estimate_stacked_gradient(const std::vector<Oracle>& oracles, const VectorRef& x,
                                               const SmoothingParams& params, std::uint64_t seed, std::size_t iter,
                                               Execution exec = Execution::kSerial);

/// Stacked reference grad f_mu with per-coordinate standard errors.
[[nodiscard]] SmoothedGradient stacked_reference_gradient(const std::vector<ObjectivePtr>& objectives,
                                                          const VectorRef& x, double mu, const NormalTable* table,
                                                          Execution exec = Execution::kSerial);

/// Sum of the local smoothed values, f_mu(x) = sum_i f_i,mu(x_i).
[[nodiscard]] SmoothedValue stacked_smoothed_value(const std::vector<ObjectivePtr>& objectives, const VectorRef& x,
                                                   double mu, const NormalTable* table,
                                                   Execution exec = Execution::kSerial);

/// Stacked value and gradient of f_mu in one pass over each agent.
[[nodiscard]] SmoothedEvaluation stacked_smoothed_evaluation(const std::vector<ObjectivePtr>& objectives,
                                                             const VectorRef& x, double mu, const NormalTable* table,
                                                             Execution exec = Execution::kSerial);

}  // namespace zoc
