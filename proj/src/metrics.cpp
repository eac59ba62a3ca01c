#include "zoc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace zoc {
namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError(std::string(name) + " must be positive and finite");
}

void check_primal(const VectorRef& x, const NetworkMatrices& mats) {
  if (static_cast<std::size_t>(x.size()) != mats.stacked_dim()) {
    throw ArgumentError("primal vector has length " + std::to_string(x.size()) + ", expected " +
                        std::to_string(mats.stacked_dim()));
  }
}

void check_dual(const VectorRef& lambda, const NetworkMatrices& mats) {
  if (static_cast<std::size_t>(lambda.size()) != mats.dual_dim()) {
    throw ArgumentError("dual vector has length " + std::to_string(lambda.size()) + ", expected " +
                        std::to_string(mats.dual_dim()));
  }
}

}  // namespace

double smoothing_lipschitz(double L0, double mu, std::size_t Q) {
  return 2.0 * L0 * std::sqrt(static_cast<double>(Q)) / mu;
}

AnalysisConstants AnalysisConstants::compute(double L0, double mu, std::size_t Q, const NetworkMatrices& mats,
                                             double c, double rho) {
  // L0 = 0 (constant objectives) is allowed here: the potential stays defined.
  if (!(L0 >= 0.0) || !std::isfinite(L0)) throw ArgumentError("L0 must be nonnegative and finite");
  require_positive(mu, "mu");
  require_positive(c, "c");
  require_positive(rho, "rho");
  if (Q == 0) throw ArgumentError("Q must be positive");
  AnalysisConstants k;
  k.L0 = L0;
  k.L1 = smoothing_lipschitz(L0, mu, Q);
  k.sigma_min = mats.sigma_min;
  k.lplus_norm = mats.lplus_norm;
  k.c = c;
  k.rho = rho;
  k.k = 2.0 * (6.0 * k.L1 * k.L1 / (rho * mats.sigma_min) + 1.5 * c * k.L1);
  return k;
}

double constraint_violation(const VectorRef& x, const NetworkMatrices& mats) {
  check_primal(x, mats);
  return (mats.incidence * x).norm();
}

double stationarity_gap(const VectorRef& x, const VectorRef& lambda_prev, const NetworkMatrices& mats, double rho,
                        const VectorRef& grad_f_mu) {
  check_primal(x, mats);
  check_dual(lambda_prev, mats);
  if (grad_f_mu.size() != x.size()) throw ArgumentError("gradient length differs from x");
  const Vector ax = mats.incidence * x;
  const Vector grad_u = grad_f_mu + mats.incidence.transpose() * lambda_prev + rho * (mats.incidence.transpose() * ax);
  return grad_u.squaredNorm() + ax.squaredNorm();
}

double consensus_stationarity_gap(const VectorRef& x, const NetworkMatrices& mats, const VectorRef& grad_f_mu) {
  check_primal(x, mats);
  if (grad_f_mu.size() != x.size()) throw ArgumentError("gradient length differs from x");
  // range(A^T) is the complement of the consensus subspace, so the best
  // multiplier removes everything but the block average.
  const auto m = static_cast<Eigen::Index>(mats.block_dim);
  Vector avg = Vector::Zero(m);
  for (std::size_t i = 0; i < mats.num_nodes; ++i) avg += grad_f_mu.segment(static_cast<Eigen::Index>(i) * m, m);
  avg /= static_cast<double>(mats.num_nodes);
  const double ax2 = (mats.incidence * x).squaredNorm();
  return static_cast<double>(mats.num_nodes) * avg.squaredNorm() + ax2;
}

double augmented_lagrangian(double f_mu, const VectorRef& x, const VectorRef& lambda, const NetworkMatrices& mats,
                            double rho) {
  check_primal(x, mats);
  check_dual(lambda, mats);
  const Vector ax = mats.incidence * x;
  return f_mu + lambda.dot(ax) + 0.5 * rho * ax.squaredNorm();
}

double potential(const VectorRef& x, const VectorRef& x_prev, const VectorRef& lambda, const NetworkMatrices& mats,
                 const AnalysisConstants& consts, double f_mu) {
  check_primal(x_prev, mats);
  const double u = augmented_lagrangian(f_mu, x, lambda, mats, consts.rho);
  const Vector dx = x - x_prev;
  const double b_norm = dx.dot(mats.signless_laplacian * dx) + consts.k / (consts.c * consts.rho) * dx.squaredNorm();
  const double v = 0.5 * consts.rho * ((mats.incidence * x).squaredNorm() + b_norm);
  return u + consts.c * v;
}

ParamReport validate_params(double L0, double mu, std::size_t Q, const NetworkMatrices& mats, double c, double rho) {
  require_positive(L0, "L0");
  require_positive(mu, "mu");
  require_positive(c, "c");
  require_positive(rho, "rho");
  if (Q == 0) throw ArgumentError("Q must be positive");
  if (!(mats.sigma_min > 0.0)) throw ArgumentError("sigma_min must be positive (is the graph connected?)");

  ParamReport r;
  const double s = mats.sigma_min;
  const double l1 = smoothing_lipschitz(L0, mu, Q);
  r.L1 = l1;
  r.sigma_min = s;
  r.lplus_norm = mats.lplus_norm;
  r.required_c = 6.0 * mats.lplus_norm / s;
  const double b = c * l1 + l1 / 4.0 + l1 * l1 / 4.0 + 0.25;
  r.required_rho = b + std::sqrt(b * b + 6.0 * l1 * l1 / s);
  r.c_ok = c > r.required_c;
  r.rho_ok = rho > r.required_rho;
  r.valid = r.c_ok && r.rho_ok;
  r.k = 2.0 * (6.0 * l1 * l1 / (rho * s) + 1.5 * c * l1);
  r.alpha1 = rho * rho - (2.0 * c * l1 + l1 / 2.0 + l1 * l1 / 2.0 + 0.5) * rho - 6.0 * l1 * l1 / s;
  r.alpha2 = 3.0 * rho * mats.lplus_norm / s - c * rho / 2.0;
  r.alpha2_flipped = -r.alpha2;
  r.alpha3 = 9.0 / (rho * s) + (6.0 * c + 1.0) / l1;
  r.lower_bound_c = 2.0 * mats.lplus_norm / s;
  r.lower_bound_c_ok = c >= r.lower_bound_c;
  return r;
}

TunedParams default_params(double L0, double mu, std::size_t Q, const NetworkMatrices& mats, double factor) {
  if (!(factor > 1.0)) throw ArgumentError("threshold factor must exceed 1");
  // The rho threshold depends on c but not on rho, so one evaluation with a
  // placeholder rho is enough.
  const ParamReport probe = validate_params(L0, mu, Q, mats, 1.0, 1.0);
  TunedParams t;
  t.c = factor * probe.required_c;
  t.rho = factor * validate_params(L0, mu, Q, mats, t.c, 1.0).required_rho;
  return t;
}

double potential_lower_bound(double L0, std::size_t Q, double sigma_min, std::size_t batch, double f_lower) {
  if (batch == 0) return f_lower;
  const double q4 = static_cast<double>(Q) + 4.0;
  const double j = static_cast<double>(batch);
  return -L0 * q4 * q4 / (sigma_min * j * j) + f_lower;
}

RateFit rate_fit(const std::vector<RatePoint>& points) {
  std::set<double> distinct;
  for (const auto& p : points) {
    if (!(p.total_iters > 0.0)) throw ArgumentError("rate_fit: T must be positive");
    distinct.insert(p.total_iters);
  }
  if (distinct.size() < 3) throw ArgumentError("rate_fit: need >= 3 distinct T values");
  const auto n = static_cast<Eigen::Index>(points.size());
  Matrix design(n, 2);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0 / points[static_cast<std::size_t>(i)].total_iters;
    design(i, 1) = 1.0;
    y[i] = points[static_cast<std::size_t>(i)].mean_gap;
  }
  const Vector coef = design.colPivHouseholderQr().solve(y);
  RateFit fit;
  fit.gamma1 = coef[0];
  fit.constant = coef[1];
  fit.points = points.size();
  const Vector resid = y - design * coef;
  const double ynorm = y.norm();
  fit.relative_residual = ynorm > 0.0 ? resid.norm() / ynorm : resid.norm();
  const double ss_tot = (y.array() - y.mean()).square().sum();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - resid.squaredNorm() / ss_tot : 1.0;
  return fit;
}

double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw ArgumentError("loglog_slope: need >= 2 paired points");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw ArgumentError("loglog_slope: values must be positive");
    mx += std::log(xs[i]);
    my += std::log(ys[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = std::log(xs[i]) - mx;
    sxy += dx * (std::log(ys[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw ArgumentError("loglog_slope: x values are all equal");
  return sxy / sxx;
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
  if (window == 0) throw ArgumentError("moving_average: window must be positive");
  std::vector<double> out;
  if (values.size() < window) return out;
  out.reserve(values.size() - window + 1);
  for (std::size_t k = 0; k + window <= values.size(); ++k) {
    double s = 0.0;
    for (std::size_t t = k; t < k + window; ++t) s += values[t];
    out.push_back(s / static_cast<double>(window));
  }
  return out;
}

}  // namespace zoc
