#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "zoc/types.hpp"

namespace zoc {

/// Gradient of the Gaussian-smoothed function with per-coordinate standard
/// error (zero when the value is exact or deterministic quadrature).
struct SmoothedGradient {
  Vector value;
  Vector std_error;
};

struct SmoothedValue {
  double value = 0.0;
  double std_error = 0.0;
};

struct SmoothedEvaluation {
  SmoothedValue value;
  SmoothedGradient gradient;
};

/// Fixed table of i.i.d. standard normals, one sample per column, shared by
/// Monte-Carlo reference computations so they are deterministic.
class NormalTable {
 public:
  NormalTable(std::size_t samples, std::size_t dim, std::uint64_t seed);
  [[nodiscard]] const Matrix& samples() const { return samples_; }
  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(samples_.cols()); }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(samples_.rows()); }

 private:
  Matrix samples_;
};

/// A local cost f_i : R^M -> R with the constants the analysis needs.
///
/// `lipschitz()` is a valid L0 on `box()`; `lower_bound()` bounds f from below
/// on the box. `value` itself does not check the box; the oracle does.
class LocalObjective {
 public:
  virtual ~LocalObjective() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual std::size_t dim() const = 0;
  [[nodiscard]] virtual double value(const VectorRef& x) const = 0;

  [[nodiscard]] const Box& box() const { return box_; }
  [[nodiscard]] double lipschitz() const { return lipschitz_; }
  [[nodiscard]] double lower_bound() const { return lower_bound_; }

  /// Lower bound of f_mu (defaults to the bound on f, valid for any mu).
  [[nodiscard]] virtual double smoothed_lower_bound(double /*mu*/) const { return lower_bound_; }

  /// True when smoothed_gradient/smoothed_value need no NormalTable.
  [[nodiscard]] virtual bool exact_smoothing() const { return false; }

  /// grad f_mu(x). The default is Monte Carlo of the difference formula
  /// (f(x + mu u) - f(x)) / mu * u over the table samples.
  [[nodiscard]] virtual SmoothedGradient smoothed_gradient(const VectorRef& x, double mu,
                                                           const NormalTable* table) const;
  /// f_mu(x). Default: Monte Carlo average of f(x + mu u) over the table samples.
  [[nodiscard]] virtual SmoothedValue smoothed_value(const VectorRef& x, double mu,
                                                     const NormalTable* table) const;
  /// Both at once; objectives override it when the two share work.
  [[nodiscard]] virtual SmoothedEvaluation smoothed_evaluation(const VectorRef& x, double mu,
                                                               const NormalTable* table) const {
    return {smoothed_value(x, mu, table), smoothed_gradient(x, mu, table)};
  }

 protected:
  LocalObjective(Box box, double lipschitz, double lower_bound)
      : box_(std::move(box)), lipschitz_(lipschitz), lower_bound_(lower_bound) {}

 private:
  Box box_;
  double lipschitz_;
  double lower_bound_;
};

using ObjectivePtr = std::shared_ptr<const LocalObjective>;

/// |cos(x + phase) + |x| + exp(x)| on a 1-D box. The inner expression is
/// strictly positive for |phase| < pi, so smoothing has closed forms.
class ToyObjective final : public LocalObjective {
 public:
  explicit ToyObjective(double phase = 0.0, double box_half_width = 5.0);

  [[nodiscard]] std::string name() const override { return "toy"; }
  [[nodiscard]] std::size_t dim() const override { return 1; }
  [[nodiscard]] double value(const VectorRef& x) const override;
  [[nodiscard]] bool exact_smoothing() const override { return true; }
  [[nodiscard]] SmoothedGradient smoothed_gradient(const VectorRef& x, double mu,
                                                   const NormalTable* table) const override;
  [[nodiscard]] SmoothedValue smoothed_value(const VectorRef& x, double mu,
                                             const NormalTable* table) const override;
  [[nodiscard]] double phase() const { return phase_; }

 private:
  double phase_;
};

/// f(x) = 1/2 x^T H x + b^T x on a box.
class QuadraticObjective final : public LocalObjective {
 public:
  QuadraticObjective(Matrix hessian, Vector linear, Box box);

  [[nodiscard]] std::string name() const override { return "quadratic"; }
  [[nodiscard]] std::size_t dim() const override { return static_cast<std::size_t>(linear_.size()); }
  [[nodiscard]] double value(const VectorRef& x) const override;
  [[nodiscard]] double smoothed_lower_bound(double mu) const override;
  [[nodiscard]] bool exact_smoothing() const override { return true; }
  [[nodiscard]] SmoothedGradient smoothed_gradient(const VectorRef& x, double mu,
                                                   const NormalTable* table) const override;
  [[nodiscard]] SmoothedValue smoothed_value(const VectorRef& x, double mu,
                                             const NormalTable* table) const override;

  [[nodiscard]] const Matrix& hessian() const { return hessian_; }
  [[nodiscard]] const Vector& linear() const { return linear_; }

 private:
  Matrix hessian_;
  Vector linear_;
};

/// One agent's mini-batch: rows of `features` are v_ij, labels are +-1.
struct ClassificationData {
  Matrix features;
  Vector labels;

  [[nodiscard]] std::size_t batch_size() const { return static_cast<std::size_t>(labels.size()); }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
};

/// (1/(N b)) [ sum_j log(1 + exp(-y_j x^T v_j)) + alpha log(eps + ||x||_1) ].
class LogisticObjective final : public LocalObjective {
 public:
  LogisticObjective(ClassificationData data, double alpha, double epsilon, std::size_t num_agents);

  [[nodiscard]] std::string name() const override { return "logreg"; }
  [[nodiscard]] std::size_t dim() const override { return data_.dim(); }
  [[nodiscard]] double value(const VectorRef& x) const override;
  [[nodiscard]] SmoothedGradient smoothed_gradient(const VectorRef& x, double mu,
                                                   const NormalTable* table) const override;
  [[nodiscard]] SmoothedValue smoothed_value(const VectorRef& x, double mu,
                                             const NormalTable* table) const override;
  [[nodiscard]] SmoothedEvaluation smoothed_evaluation(const VectorRef& x, double mu,
                                                       const NormalTable* table) const override;

  [[nodiscard]] const ClassificationData& data() const { return data_; }

 private:
  [[nodiscard]] SmoothedEvaluation evaluate(const VectorRef& x, double mu, const NormalTable* table, bool want_value,
                                            bool want_gradient) const;

  ClassificationData data_;
  double alpha_;
  double epsilon_;
  double scale_;  // 1 / (N b)
  Vector feature_norms_;
};

[[nodiscard]] ObjectivePtr toy_objective(double phase = 0.0, double box_half_width = 5.0);
[[nodiscard]] ObjectivePtr quadratic_family(const Matrix& hessian, const Vector& linear, const Box& box);
[[nodiscard]] ObjectivePtr logreg_objective(const ClassificationData& data, double alpha, double epsilon,
                                            std::size_t num_agents);
/// Identically zero objective of the given dimension.
[[nodiscard]] ObjectivePtr zero_objective(std::size_t dim);

/// Toy objectives for N agents. With `perturb`, agent i gets a phase shift
/// drawn uniformly from [-pi/2, pi/2].
[[nodiscard]] std::vector<ObjectivePtr> toy_objectives(std::size_t num_agents, bool perturb, std::uint64_t seed,
                                                       double box_half_width = 5.0);

/// Gaussian features, a planted vector with ceil(M/4) nonzeros, labels
/// sign(x*^T v) flipped independently with probability `flip_prob`.
[[nodiscard]] std::vector<ClassificationData> synthesize_data(std::size_t num_agents, std::size_t batch,
                                                              std::size_t dim, std::uint64_t seed,
                                                              double flip_prob = 0.05);

/// CSV rows: label, then M features. No header.
void write_classification_csv(const std::filesystem::path& path, const ClassificationData& data);
[[nodiscard]] ClassificationData read_classification_csv(const std::filesystem::path& path);

/// sum_i f_i(x_i) over the stacked vector.
[[nodiscard]] double stacked_value(const std::vector<ObjectivePtr>& objectives, const VectorRef& x);

/// Largest |f(x) - f(y)| / ||x - y|| over random pairs in `box` (or the
/// objective's box when bounded).
[[nodiscard]] double sample_lipschitz(const LocalObjective& f, const Box& box, std::size_t pairs,
                                      std::uint64_t seed);
[[nodiscard]] double sample_minimum(const LocalObjective& f, const Box& box, std::size_t points,
                                    std::uint64_t seed);

}  // namespace zoc
