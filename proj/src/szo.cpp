#include "zoc/szo.hpp"

#include <cmath>
#include <string>

namespace zoc {

NoiseModel NoiseModel::additive_gaussian(double std_dev) {
  if (!(std_dev >= 0.0)) throw ArgumentError("noise std_dev must be nonnegative");
  return {Kind::kAdditiveGaussian, std_dev};
}

void SmoothingParams::validate() const {
  if (!(mu > 0.0)) throw ArgumentError("smoothing parameter mu must be positive");
  if (batch < 1) throw ArgumentError("batch size J must be at least 1");
}

Oracle::Oracle(ObjectivePtr objective, NoiseModel noise) : objective_(std::move(objective)), noise_(noise) {
  if (!objective_) throw ArgumentError("oracle needs an objective");
}

double Oracle::draw_noise(Rng& rng) const {
  if (noise_.kind == NoiseModel::Kind::kNone || noise_.std_dev == 0.0) return 0.0;
  return noise_.std_dev * standard_normal(rng);
}

double Oracle::query_with_noise(const VectorRef& x, double xi) const {
  if (!objective_->box().contains(x)) throw DomainError("query point outside the domain box of '" + objective_->name() + "'");
  ++queries_;
  return objective_->value(x) + xi;
}

double Oracle::query(const VectorRef& x, Rng& rng) const { return query_with_noise(x, draw_noise(rng)); }

Vector single_sample_estimate(const Oracle& oracle, const VectorRef& x, double mu, Rng& rng) {
  const Box& box = oracle.objective().box();
  if (!box.contains(x)) throw DomainError("gradient estimate requested outside the domain box");
  const auto m = x.size();
  Vector phi(m);
  Vector probe(m);
  int attempt = 0;
  for (;; ++attempt) {
    if (attempt >= kPerturbationRetryCap) {
      throw DomainError("perturbed point left the domain box " + std::to_string(kPerturbationRetryCap) +
                        " times; move x away from the boundary or reduce mu");
    }
    for (Eigen::Index k = 0; k < m; ++k) phi[k] = standard_normal(rng);
    probe = x + mu * phi;
    if (box.contains(probe)) break;
  }
  const double xi = oracle.draw_noise(rng);
  const double diff = oracle.query_with_noise(probe, xi) - oracle.query_with_noise(x, xi);
  return (diff / mu) * phi;
}

Vector estimate_gradient(const Oracle& oracle, const VectorRef& x, const SmoothingParams& params, Rng& rng) {
  params.validate();
  if (static_cast<std::size_t>(x.size()) != oracle.dim()) throw ArgumentError("estimate_gradient: dimension mismatch");
  Vector sum = Vector::Zero(x.size());
  for (std::size_t j = 0; j < params.batch; ++j) sum += single_sample_estimate(oracle, x, params.mu, rng);
  return sum / static_cast<double>(params.batch);
}

SmoothedValue smoothed_value(const Oracle& oracle, const VectorRef& x, double mu, std::size_t mc_samples, Rng& rng) {
  if (mc_samples < 1) throw ArgumentError("smoothed_value needs at least one sample");
  if (!(mu > 0.0)) throw ArgumentError("smoothing parameter mu must be positive");
  const Box& box = oracle.objective().box();
  Vector probe(x.size());
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t s = 0; s < mc_samples; ++s) {
    int attempt = 0;
    for (;; ++attempt) {
      if (attempt >= kPerturbationRetryCap) throw DomainError("smoothed_value: perturbed point keeps leaving the box");
      for (Eigen::Index k = 0; k < x.size(); ++k) probe[k] = x[k] + mu * standard_normal(rng);
      if (box.contains(probe)) break;
    }
    const double v = oracle.query(probe, rng);
    const double delta = v - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (v - mean);
  }
  const double n = static_cast<double>(mc_samples);
  const double se = mc_samples > 1 ? std::sqrt(m2 / (n - 1.0) / n) : 0.0;
  return {mean, se};
}

SmoothedGradient smoothed_gradient_reference(const LocalObjective& objective, const VectorRef& x, double mu,
                                             const NormalTable* table) {
  if (!(mu > 0.0)) throw ArgumentError("smoothing parameter mu must be positive");
  return objective.smoothed_gradient(x, mu, table);
}

EstimatorDiagnostic estimator_norm_diagnostic(const Oracle& oracle, const VectorRef& x, const SmoothingParams& params,
                                              std::size_t replicates, Rng& rng, const Vector& reference_gradient) {
  if (replicates < 100) throw ArgumentError("estimator_norm_diagnostic needs at least 100 replicates");
  if (reference_gradient.size() != x.size()) throw ArgumentError("reference gradient dimension mismatch");
  double norm_mean = 0.0, norm_m2 = 0.0, dev_mean = 0.0, dev_m2 = 0.0;
  for (std::size_t r = 0; r < replicates; ++r) {
    const Vector g = estimate_gradient(oracle, x, params, rng);
    const double n2 = g.squaredNorm();
    const double d2 = (g - reference_gradient).squaredNorm();
    const double k = static_cast<double>(r + 1);
    double delta = n2 - norm_mean;
    norm_mean += delta / k;
    norm_m2 += delta * (n2 - norm_mean);
    delta = d2 - dev_mean;
    dev_mean += delta / k;
    dev_m2 += delta * (d2 - dev_mean);
  }
  const double n = static_cast<double>(replicates);
  EstimatorDiagnostic out;
  out.replicates = replicates;
  out.mean_sq_norm = norm_mean;
  out.mean_sq_norm_se = std::sqrt(norm_m2 / (n - 1.0) / n);
  out.mean_sq_deviation = dev_mean;
  out.mean_sq_deviation_se = std::sqrt(dev_m2 / (n - 1.0) / n);
  const double l0 = oracle.objective().lipschitz();
  const double q = static_cast<double>(x.size());
  const double j = static_cast<double>(params.batch);
  out.norm_bound = l0 * l0 * (q + 4.0) * (q + 4.0) / (j * j);
  return out;
}

}  // namespace zoc
