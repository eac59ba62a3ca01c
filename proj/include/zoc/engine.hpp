#pragma once

// The zeroth-order primal-dual method: primal and dual steps, a centralized
// matrix-form run and a message-passing simulation of the same rounds.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "zoc/graph.hpp"
#include "zoc/kernels.hpp"
#include "zoc/metrics.hpp"
#include "zoc/objectives.hpp"
#include "zoc/szo.hpp"

namespace zoc {

enum class GradientSource {
  kZerothOrder,  // batch estimate from the oracle
  kReference,    // exact (or table Monte-Carlo) grad f_mu; the J -> infinity limit
};

struct AlgoParams {
  double rho = 1.0;
  double mu = 1e-2;
  std::size_t batch = 1;
  std::size_t total_iters = 1;
  std::uint64_t seed = 0;
  GradientSource gradient = GradientSource::kZerothOrder;

  void validate() const;
  [[nodiscard]] SmoothingParams smoothing() const { return {mu, batch}; }
};

struct IterateState {
  Vector x;
  Vector lambda;
  Vector x_prev;
  std::size_t iter = 0;
};

/// One agent's coordinate of the primal update, x - (g + [A^T lambda] + rho [L- x]) / (2 rho d).
/// Shared by both execution modes so they round identically.
[[nodiscard]] inline double primal_coordinate(double x, double g, double at_lambda, double lminus_x, double rho,
                                              double degree) {
  return x - (g + at_lambda + rho * lminus_x) / (2.0 * rho * degree);
}

/// argmin_y <G + A^T lambda + rho A^T A x, y - x> + rho ||y - x||_D^2, i.e.
/// x+ = x - (2 rho D)^{-1} (G + A^T lambda + rho L- x)
///    = (2 rho)^{-1} D^{-1} (rho L+ x - G - A^T lambda).
[[nodiscard]] Vector primal_step(const IterateState& state, const VectorRef& gradient, const NetworkMatrices& mats,
                                 double rho);

/// lambda + rho A x_new.
[[nodiscard]] Vector dual_step(const VectorRef& x_new, const VectorRef& lambda, double rho,
                               const NetworkMatrices& mats);

/// Graph, local objectives and noise for one experiment.
struct Problem {
  Topology topology;
  NetworkMatrices mats;
  std::vector<ObjectivePtr> objectives;
  NoiseModel noise;

  /// Validates the topology and that there is one objective of dimension
  /// block_dim per node.
  static Problem make(Topology topology, std::vector<ObjectivePtr> objectives, NoiseModel noise = {});

  [[nodiscard]] std::size_t stacked_dim() const { return mats.stacked_dim(); }
  /// Lipschitz constant of f(x) = sum_i f_i(x_i) on the product box, sqrt(sum L0_i^2).
  [[nodiscard]] double lipschitz() const;
  /// sum_i of the local lower bounds of f_i,mu.
  [[nodiscard]] double smoothed_lower_bound(double mu) const;
  [[nodiscard]] std::vector<Oracle> make_oracles() const;
};

struct Checkpoint {
  std::size_t iter = 0;
  Vector x;
  Vector lambda;
  Vector x_prev;
};

void to_json(nlohmann::json& j, const Checkpoint& cp);
void from_json(const nlohmann::json& j, Checkpoint& cp);

struct RunOptions {
  /// Starting point; drawn uniformly from `init_box` (per agent) when unset.
  std::optional<Vector> x0;
  /// Per-agent initialization box. Defaults to the objective box when it is
  /// bounded, otherwise [-1, 1]^M.
  std::optional<Box> init_box;
  /// Needed by objectives without closed-form smoothing (metrics and the
  /// reference gradient source).
  const NormalTable* table = nullptr;
  /// Potential weight c. Zero leaves the potential column NaN.
  double potential_c = 0.0;
  bool record_metrics = true;
  Execution exec = Execution::kSerial;
  std::optional<Checkpoint> resume;
  /// Called after every iteration with the new state and its metrics.
  std::function<void(const IterateState&, const MetricRecord&)> observer;
};

struct MessageStats {
  std::size_t rounds = 0;
  /// Messages sent by each agent in one round (the protocol is static).
  std::vector<std::size_t> per_round_sent;
  std::vector<std::size_t> per_round_primal;
  std::vector<std::size_t> per_round_dual;
  std::uint64_t total = 0;
};

struct RunResult {
  std::vector<MetricRecord> records;  // records[r - 1] describes x^r, r = 1..T
  std::size_t output_index = 0;       // u, uniform on {0, ..., T-1}
  IterateState output;                // (x^u, lambda^u); empty when u precedes a resume point
  IterateState final_state;
  std::optional<MessageStats> messages;
};

/// Uniform initial point in the per-agent box, from the seeded init stream.
[[nodiscard]] Vector initial_point(const Problem& problem, const Box& per_agent_box, std::uint64_t seed);
[[nodiscard]] Box default_init_box(const Problem& problem);

[[nodiscard]] RunResult run_centralized(const Problem& problem, const AlgoParams& params,
                                        const RunOptions& options = {});

/// Agents exchange primal blocks with neighbours and the owner of each edge
/// (its first endpoint) sends the edge dual to the other endpoint.
[[nodiscard]] RunResult run_distributed(const Problem& problem, const AlgoParams& params,
                                        const RunOptions& options = {});

/// Evaluates one metric row for x^r with lambda^{r-1}; shared by the engine
/// and the baseline.
class MetricRecorder {
 public:
  MetricRecorder(const Problem& problem, double mu, double rho, double potential_c, const NormalTable* table,
                 Execution exec);

  [[nodiscard]] MetricRecord primal_dual(std::size_t iter, const IterateState& state,
                                         const VectorRef& lambda_prev) const;
  /// For methods without duals: multiplier-free gap, NaN potential.
  [[nodiscard]] MetricRecord consensus(std::size_t iter, const VectorRef& x) const;
  [[nodiscard]] const std::optional<AnalysisConstants>& constants() const { return consts_; }

 private:
  const Problem& problem_;
  double mu_;
  double rho_;
  const NormalTable* table_;
  Execution exec_;
  std::optional<AnalysisConstants> consts_;
};

}  // namespace zoc
