#include <doctest.h>

#include <cmath>

#include "zoc/baseline.hpp"

using namespace zoc;

namespace {

Topology make(std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> edges, std::size_t m = 1) {
  Topology t;
  t.num_nodes = n;
  t.edges = std::move(edges);
  t.block_dim = m;
  return t;
}

RgfParams params_for(const Topology& topo, std::size_t iters = 1) {
  RgfParams p;
  p.mixing = build_mixing(topo);
  p.total_iters = iters;
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("baseline");

TEST_CASE("Metropolis weights on small graphs") {
  const Matrix w2 = build_mixing(make(2, {{0, 1}}));
  CHECK(w2.isApprox(Matrix::Constant(2, 2, 0.5)));

  const Matrix w3 = build_mixing(make(3, {{0, 1}, {1, 2}, {2, 0}}));
  CHECK((w3.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);

  const Matrix star = build_mixing(make(4, {{0, 1}, {0, 2}, {0, 3}}));
  CHECK(star(0, 1) == 0.25);
  CHECK(star(3, 0) == 0.25);
  CHECK(star(0, 0) == doctest::Approx(0.25));
  CHECK(star(1, 1) == 0.75);
  CHECK(star(1, 2) == 0.0);
}

TEST_CASE("mixing is symmetric, doubly stochastic and respects the graph") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Topology t = generate_graph(GraphKind::kRandomConnected, 12, 0.25, seed, 1);
    const Matrix w = build_mixing(t);
    CHECK((w - w.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((w.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK((w.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK(w.minCoeff() >= 0.0);
    const auto nb = t.neighbors();
    for (std::size_t i = 0; i < 12; ++i) {
      for (std::size_t j = 0; j < 12; ++j) {
        const bool adjacent = std::find(nb[i].begin(), nb[i].end(), j) != nb[i].end();
        if (i != j && !adjacent) CHECK(w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == 0.0);
      }
    }
    // Consensual vectors are fixed.
    const Vector ones = Vector::Constant(12, 2.5);
    CHECK(((w * ones).array() - 2.5).abs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("stepsize is step_c over sqrt(r)") {
  CHECK(rgf_stepsize(1.0, 4) == 0.5 * rgf_stepsize(1.0, 1));
  CHECK(rgf_stepsize(3.0, 9) == 1.0);
}

TEST_CASE("zero objectives: consensual points are fixed, others are averaged") {
  const Topology t = make(2, {{0, 1}});
  const std::vector<Oracle> zero = {Oracle(zero_objective(1)), Oracle(zero_objective(1))};
  RgfParams p = params_for(t);
  Vector x(2);
  x << 1.0, 0.0;
  const Vector avg = rgf_step(x, 1, p, zero);
  CHECK(avg[0] == 0.5);
  CHECK(avg[1] == 0.5);
  CHECK(rgf_step(avg, 2, p, zero) == avg);
  CHECK_THROWS_AS((void)rgf_step(x, 0, p, zero), ArgumentError);
}

TEST_CASE("with zero gradients the iterates contract to the initial average") {
  const Topology t = generate_graph(GraphKind::kRandomConnected, 9, 0.2, 3, 2);
  const Problem prob = Problem::make(t, std::vector<ObjectivePtr>(9, zero_objective(2)));
  RgfParams p = params_for(t, 100);
  const Vector x0 = initial_point(prob, Box::cube(2, -1, 1), 4);
  Vector mean = Vector::Zero(2);
  for (Eigen::Index i = 0; i < 9; ++i) mean += x0.segment(2 * i, 2) / 9.0;
  const Vector target = mean.replicate(9, 1);
  const auto oracles = prob.make_oracles();
  Vector x = x0;
  std::vector<double> err;
  for (std::size_t r = 1; r <= 100; ++r) {
    x = rgf_step(x, r, p, oracles);
    err.push_back((x - target).norm());
  }
  CHECK(err.back() < 1e-3 * (x0 - target).norm());
  // Geometric: the error ratio over 10-step windows stays below the 10th
  // power of the second largest eigenvalue modulus, up to rounding.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(p.mixing);
  const double slem = std::max(std::abs(eig.eigenvalues()[0]), std::abs(eig.eigenvalues()[7]));
  for (std::size_t r = 10; r + 10 < 60; r += 10) {
    CHECK(err[r + 10] <= std::pow(slem, 10) * err[r] * (1.0 + 1e-9));
  }
}

TEST_CASE("RGF runs are deterministic, parallel-safe and stay in the box") {
  const Topology t = generate_graph(GraphKind::kRandomConnected, 6, 0.3, 1, 1);
  const Problem prob = Problem::make(t, toy_objectives(6, false, 0), NoiseModel::additive_gaussian(0.01));
  RgfParams p = params_for(t, 200);
  p.seed = 12;
  RunOptions o;
  o.init_box = Box::cube(1, -2, 2);
  const RunResult a = run_rgf(prob, p, o);
  o.exec = Execution::kParallel;
  const RunResult b = run_rgf(prob, p, o);
  CHECK(a.final_state.x == b.final_state.x);
  REQUIRE(a.records.size() == 200);
  CHECK(a.records.front().iter == 1);
  CHECK(a.records.back().iter == 200);
  CHECK(std::isnan(a.records.back().potential));
  CHECK(a.final_state.x.cwiseAbs().maxCoeff() <= 5.0);
  CHECK(a.records.back().constraint_violation < a.records.front().constraint_violation);

  // Same starting point as the primal-dual method with the same seed.
  std::optional<Vector> first;
  RunOptions probe = o;
  probe.record_metrics = false;
  probe.observer = [&](const IterateState& s, const MetricRecord&) {
    if (!first) first = s.x_prev;
  };
  (void)run_rgf(prob, p, probe);
  CHECK(*first == initial_point(prob, Box::cube(1, -2, 2), p.seed));
}

TEST_CASE("RGF parameter validation") {
  const Topology t = make(2, {{0, 1}});
  RgfParams p = params_for(t);
  p.step_c = 0.0;
  CHECK_THROWS_AS(p.validate(t), ArgumentError);
  p.step_c = 1.0;
  p.mixing = Matrix::Identity(3, 3);
  CHECK_THROWS_AS(p.validate(t), ArgumentError);
}

TEST_SUITE_END();
