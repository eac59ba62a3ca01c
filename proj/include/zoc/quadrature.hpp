#pragma once

#include <vector>

namespace zoc {

/// Gauss-Hermite rule for E[g(Z)], Z ~ N(0, 1): sum_k weights[k] * g(nodes[k]).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Golub-Welsch construction for the probabilists' Hermite weight; weights sum to 1.
[[nodiscard]] GaussHermiteRule gauss_hermite(int order);

/// Shared 32-point rule.
[[nodiscard]] const GaussHermiteRule& default_gauss_hermite();

}  // namespace zoc
