#include "zoc/quadrature.hpp"

#include <cmath>

#include "zoc/types.hpp"

namespace zoc {

GaussHermiteRule gauss_hermite(int order) {
  if (order < 1) throw ArgumentError("Gauss-Hermite order must be positive");
  // Jacobi matrix of the monic probabilists' Hermite recurrence.
  Matrix jacobi = Matrix::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  GaussHermiteRule rule;
  rule.nodes.resize(static_cast<std::size_t>(order));
  rule.weights.resize(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) {
    rule.nodes[static_cast<std::size_t>(k)] = eig.eigenvalues()[k];
    const double v0 = eig.eigenvectors()(0, k);
    rule.weights[static_cast<std::size_t>(k)] = v0 * v0;
  }
  return rule;
}

const GaussHermiteRule& default_gauss_hermite() {
  static const GaussHermiteRule rule = gauss_hermite(32);
  return rule;
}

}  // namespace zoc
