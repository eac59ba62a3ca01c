#pragma once

// Stochastic zeroth-order oracle and Gaussian-smoothing gradient estimators.

#include <cstdint>

#include "zoc/objectives.hpp"
#include "zoc/random.hpp"
#include "zoc/types.hpp"

namespace zoc {

struct NoiseModel {
  enum class Kind { kNone, kAdditiveGaussian };
  Kind kind = Kind::kNone;
  double std_dev = 0.0;

  static NoiseModel none() { return {}; }
  static NoiseModel additive_gaussian(double std_dev);
};

struct SmoothingParams {
  double mu = 1e-2;
  std::size_t batch = 1;

  void validate() const;
};

/// Perturbations that leave the domain box are redrawn at most this many times.
inline constexpr int kPerturbationRetryCap = 100;

/// Noisy functional values of one local objective. Counts its queries; an
/// oracle belongs to a single trial and is not shared across threads.
class Oracle {
 public:
  explicit Oracle(ObjectivePtr objective, NoiseModel noise = NoiseModel::none());

  /// f(x) plus a fresh noise draw. Throws DomainError outside the box.
  double query(const VectorRef& x, Rng& rng) const;
  /// f(x) + xi for a given noise realisation xi.
  double query_with_noise(const VectorRef& x, double xi) const;
  double draw_noise(Rng& rng) const;

  [[nodiscard]] const LocalObjective& objective() const { return *objective_; }
  [[nodiscard]] const ObjectivePtr& objective_ptr() const { return objective_; }
  [[nodiscard]] const NoiseModel& noise() const { return noise_; }
  [[nodiscard]] std::size_t dim() const { return objective_->dim(); }

  [[nodiscard]] std::uint64_t queries() const { return queries_; }
  void reset_queries() { queries_ = 0; }

 private:
  ObjectivePtr objective_;
  NoiseModel noise_;
  mutable std::uint64_t queries_ = 0;
};

/// One sample (H(x + mu phi, xi) - H(x, xi)) / mu * phi; both queries share xi.
[[nodiscard]] Vector single_sample_estimate(const Oracle& oracle, const VectorRef& x, double mu, Rng& rng);

/// Mean of `params.batch` single-sample estimates drawn in order from `rng`.
[[nodiscard]] Vector estimate_gradient(const Oracle& oracle, const VectorRef& x, const SmoothingParams& params,
                                       Rng& rng);

/// Monte-Carlo estimate of f_mu(x) from `mc_samples` noisy queries at x + mu phi.
[[nodiscard]] SmoothedValue smoothed_value(const Oracle& oracle, const VectorRef& x, double mu,
                                           std::size_t mc_samples, Rng& rng);

/// Reference grad f_mu: closed form when the objective has one, otherwise
/// Monte Carlo over `table` (standard error reported).
[[nodiscard]] SmoothedGradient smoothed_gradient_reference(const LocalObjective& objective, const VectorRef& x,
                                                           double mu, const NormalTable* table = nullptr);

struct EstimatorDiagnostic {
  double mean_sq_norm = 0.0;
  double mean_sq_norm_se = 0.0;
  double mean_sq_deviation = 0.0;
  double mean_sq_deviation_se = 0.0;
  /// L0^2 (Q + 4)^2 / J^2, reported for comparison only.
  double norm_bound = 0.0;
  std::size_t replicates = 0;
};

/// Empirical E||G||^2 and E||G - grad f_mu(x)||^2 over `replicates` batch estimates.
[[nodiscard]] EstimatorDiagnostic estimator_norm_diagnostic(const Oracle& oracle, const VectorRef& x,
                                                            const SmoothingParams& params, std::size_t replicates,
                                                            Rng& rng, const Vector& reference_gradient);

}  // namespace zoc
