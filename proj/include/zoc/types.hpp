#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace zoc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

/// Invalid graph input: self-loop, duplicate edge, disconnected, bad index.
class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A query point (or a perturbed query point) lies outside the objective's domain box.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or parameter mismatch in a numerical routine.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Axis-aligned box. Infinite bounds are allowed.
struct Box {
  Vector lower;
  Vector upper;

  static Box unbounded(std::size_t dim) {
    const double inf = std::numeric_limits<double>::infinity();
    return {Vector::Constant(static_cast<Eigen::Index>(dim), -inf),
            Vector::Constant(static_cast<Eigen::Index>(dim), inf)};
  }
  static Box cube(std::size_t dim, double lo, double hi) {
    return {Vector::Constant(static_cast<Eigen::Index>(dim), lo),
            Vector::Constant(static_cast<Eigen::Index>(dim), hi)};
  }

  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }

  [[nodiscard]] bool contains(const VectorRef& x) const {
    if (x.size() != lower.size()) return false;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      if (!(x[k] >= lower[k] && x[k] <= upper[k])) return false;
    }
    return true;
  }

  [[nodiscard]] bool bounded() const { return lower.allFinite() && upper.allFinite(); }

  [[nodiscard]] Vector project(const VectorRef& x) const { return x.cwiseMax(lower).cwiseMin(upper); }
};

}  // namespace zoc
