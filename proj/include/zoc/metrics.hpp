#pragma once

// Analysis diagnostics: stationarity gap, constraint violation, potential,
// the (c, rho) validator and the sublinear rate fit.

#include <cstddef>
#include <vector>

#include "zoc/graph.hpp"
#include "zoc/types.hpp"

namespace zoc {

/// Lipschitz constant of grad f_mu, 2 L0 sqrt(Q) / mu.
[[nodiscard]] double smoothing_lipschitz(double L0, double mu, std::size_t Q);

struct AnalysisConstants {
  double L0 = 0.0;
  double L1 = 0.0;
  double sigma_min = 0.0;
  double lplus_norm = 0.0;
  double c = 0.0;
  double k = 0.0;  // 2 (6 L1^2 / (rho sigma_min) + 3 c L1 / 2)
  double rho = 0.0;

  static AnalysisConstants compute(double L0, double mu, std::size_t Q, const NetworkMatrices& mats, double c,
                                   double rho);
};

struct MetricRecord {
  std::size_t iter = 0;
  double stationarity_gap = 0.0;
  double constraint_violation = 0.0;
  double potential = 0.0;  // NaN where the method has no potential (RGF)
  double objective = 0.0;  // f(x) = sum_i f_i(x_i), noiseless
  double wall_time = 0.0;  // seconds since the run started
};

/// ||A x||.
[[nodiscard]] double constraint_violation(const VectorRef& x, const NetworkMatrices& mats);

/// ||grad f_mu(x) + A^T lambda_prev + rho A^T A x||^2 + ||A x||^2.
[[nodiscard]] double stationarity_gap(const VectorRef& x, const VectorRef& lambda_prev, const NetworkMatrices& mats,
                                      double rho, const VectorRef& grad_f_mu);

/// Gap for methods without dual variables: the multiplier is chosen to
/// minimise the first term, leaving N times the squared norm of the block
/// average of grad f_mu, plus ||A x||^2.
[[nodiscard]] double consensus_stationarity_gap(const VectorRef& x, const NetworkMatrices& mats,
                                                const VectorRef& grad_f_mu);

/// U = f_mu + <lambda, A x> + rho/2 ||A x||^2.
[[nodiscard]] double augmented_lagrangian(double f_mu, const VectorRef& x, const VectorRef& lambda,
                                          const NetworkMatrices& mats, double rho);

/// P = U(x, lambda) + c rho/2 (||A x||^2 + ||x - x_prev||_B^2), B = L+ + k/(c rho) I.
[[nodiscard]] double potential(const VectorRef& x, const VectorRef& x_prev, const VectorRef& lambda,
                               const NetworkMatrices& mats, const AnalysisConstants& consts, double f_mu);

struct ParamReport {
  bool valid = false;  // both sufficient conditions hold
  bool c_ok = false;
  bool rho_ok = false;
  double required_c = 0.0;    // c must exceed this
  double required_rho = 0.0;  // rho must exceed this
  double L1 = 0.0;
  double sigma_min = 0.0;
  double lplus_norm = 0.0;
  double k = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;          // 3 rho ||L+|| / sigma_min - c rho / 2, as printed
  double alpha2_flipped = 0.0;  // c rho / 2 - 3 rho ||L+|| / sigma_min
  double alpha3 = 0.0;
  double lower_bound_c = 0.0;  // c >= 2 ||L+|| / sigma_min is used by the potential lower bound
  bool lower_bound_c_ok = false;
};

/// Throws ArgumentError on nonpositive L0, mu, c or rho, or on Q = 0.
[[nodiscard]] ParamReport validate_params(double L0, double mu, std::size_t Q, const NetworkMatrices& mats, double c,
                                          double rho);

/// Smallest admissible c and rho scaled by `factor` (> 1): c = factor * required_c,
/// then rho = factor * required_rho(c).
struct TunedParams {
  double c = 0.0;
  double rho = 0.0;
};
[[nodiscard]] TunedParams default_params(double L0, double mu, std::size_t Q, const NetworkMatrices& mats,
                                         double factor = 1.1);

/// -L0 (Q + 4)^2 / (sigma_min J^2) + f_lower. batch = 0 means J -> infinity,
/// where the bound is f_lower.
[[nodiscard]] double potential_lower_bound(double L0, std::size_t Q, double sigma_min, std::size_t batch,
                                           double f_lower);

struct RatePoint {
  double total_iters = 0.0;
  double mean_gap = 0.0;
};

struct RateFit {
  double gamma1 = 0.0;    // coefficient of 1/T
  double constant = 0.0;  // intercept
  double relative_residual = 0.0;  // ||y - y_hat|| / ||y||
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Least squares fit of mean_gap = gamma1 / T + constant. Needs at least 3
/// distinct T values.
[[nodiscard]] RateFit rate_fit(const std::vector<RatePoint>& points);

/// Least-squares slope of log(y) against log(x).
[[nodiscard]] double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys);

/// Trailing moving average; element k averages values[k .. k + window - 1].
[[nodiscard]] std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

}  // namespace zoc
