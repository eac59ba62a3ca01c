#include "zoc/kernels.hpp"

#include <cmath>
#include <exception>
#include <string>

namespace zoc {
namespace {

std::size_t block_size(const std::vector<ObjectivePtr>& objectives, const VectorRef& x) {
  if (objectives.empty()) throw ArgumentError("no local objectives");
  const std::size_t m = objectives.front()->dim();
  if (static_cast<std::size_t>(x.size()) != m * objectives.size()) {
    throw ArgumentError("stacked vector has length " + std::to_string(x.size()) + ", expected " +
                        std::to_string(m * objectives.size()));
  }
  return m;
}

// Runs body(i) for every agent, serially or in an OpenMP loop. The first
// exception by agent index is rethrown so that errors are deterministic too.
template <class Body>
void for_each_agent(std::size_t n, Execution exec, Body&& body) {
  if (exec == Execution::kSerial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

Vector estimate_agent_gradient(const Oracle& oracle, const VectorRef& x_block, const SmoothingParams& params,
                               std::uint64_t seed, std::size_t agent, std::size_t iter) {
  Rng rng = gradient_stream(seed, agent, iter);
  try {
    return estimate_gradient(oracle, x_block, params, rng);
  } catch (const DomainError& e) {
    throw DomainError("agent " + std::to_string(agent) + ", iteration " + std::to_string(iter) + ": " + e.what());
  }
}

Vector estimate_stacked_gradient(const std::vector<Oracle>& oracles, const VectorRef& x,
                                 const SmoothingParams& params, std::uint64_t seed, std::size_t iter, Execution exec) {
  if (oracles.empty()) throw ArgumentError("no oracles");
  const std::size_t m = oracles.front().dim();
  if (static_cast<std::size_t>(x.size()) != m * oracles.size()) throw ArgumentError("stacked gradient: dimension mismatch");
  params.validate();
  Vector out(x.size());
  const auto mi = static_cast<Eigen::Index>(m);
  for_each_agent(oracles.size(), exec, [&](std::size_t i) {
    const auto off = static_cast<Eigen::Index>(i) * mi;
    out.segment(off, mi) = estimate_agent_gradient(oracles[i], x.segment(off, mi), params, seed, i, iter);
  });
  return out;
}

SmoothedGradient stacked_reference_gradient(const std::vector<ObjectivePtr>& objectives, const VectorRef& x,
                                            double mu, const NormalTable* table, Execution exec) {
  const auto mi = static_cast<Eigen::Index>(block_size(objectives, x));
  SmoothedGradient out{Vector(x.size()), Vector(x.size())};
  for_each_agent(objectives.size(), exec, [&](std::size_t i) {
    const auto off = static_cast<Eigen::Index>(i) * mi;
    SmoothedGradient g = objectives[i]->smoothed_gradient(x.segment(off, mi), mu, table);
    out.value.segment(off, mi) = g.value;
    out.std_error.segment(off, mi) = g.std_error;
  });
  return out;
}

SmoothedValue stacked_smoothed_value(const std::vector<ObjectivePtr>& objectives, const VectorRef& x, double mu,
                                     const NormalTable* table, Execution exec) {
  const auto mi = static_cast<Eigen::Index>(block_size(objectives, x));
  std::vector<SmoothedValue> parts(objectives.size());
  for_each_agent(objectives.size(), exec, [&](std::size_t i) {
    parts[i] = objectives[i]->smoothed_value(x.segment(static_cast<Eigen::Index>(i) * mi, mi), mu, table);
  });
  // Fixed summation order keeps both paths identical. Agents share the
  // normal table, so the combined error treats them as independent only
  // approximately.
  SmoothedValue total;
  double var = 0.0;
  for (const auto& p : parts) {
    total.value += p.value;
    var += p.std_error * p.std_error;
  }
  total.std_error = std::sqrt(var);
  return total;
}

SmoothedEvaluation stacked_smoothed_evaluation(const std::vector<ObjectivePtr>& objectives, const VectorRef& x,
                                               double mu, const NormalTable* table, Execution exec) {
  const auto mi = static_cast<Eigen::Index>(block_size(objectives, x));
  std::vector<SmoothedValue> parts(objectives.size());
  SmoothedEvaluation out;
  out.gradient = {Vector(x.size()), Vector(x.size())};
  for_each_agent(objectives.size(), exec, [&](std::size_t i) {
    const auto off = static_cast<Eigen::Index>(i) * mi;
    SmoothedEvaluation e = objectives[i]->smoothed_evaluation(x.segment(off, mi), mu, table);
    parts[i] = e.value;
    out.gradient.value.segment(off, mi) = e.gradient.value;
    out.gradient.std_error.segment(off, mi) = e.gradient.std_error;
  });
  double var = 0.0;
  for (const auto& p : parts) {
    out.value.value += p.value;
    var += p.std_error * p.std_error;
  }
  out.value.std_error = std::sqrt(var);
  return out;
}

}  // namespace zoc
