#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "oracles.hpp"
#include "zoc/engine.hpp"

using namespace zoc;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

Topology path2(std::size_t m = 1) {
  Topology t;
  t.num_nodes = 2;
  t.edges = {{0, 1}};
  t.block_dim = m;
  return t;
}

IterateState state(const Vector& x, const Vector& lambda) { return {x, lambda, x, 0}; }

std::vector<ObjectivePtr> random_quadratics(std::size_t n, std::size_t m, std::uint64_t seed, double box = 1e6) {
  Rng rng(seed);
  const auto mi = static_cast<Eigen::Index>(m);
  std::vector<ObjectivePtr> out;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix r(mi, mi);
    for (Eigen::Index a = 0; a < mi; ++a) {
      for (Eigen::Index b = 0; b < mi; ++b) r(a, b) = uniform(rng, -1, 1);
    }
    Vector b(mi);
    for (Eigen::Index a = 0; a < mi; ++a) b[a] = uniform(rng, -1, 1);
    out.push_back(quadratic_family(r.transpose() * r + 0.5 * Matrix::Identity(mi, mi), b, Box::cube(m, -box, box)));
  }
  return out;
}

// Mixed objectives with noise: toy on M = 1, logistic on M = 2.
Problem noisy_problem(const Topology& topo) {
  std::vector<ObjectivePtr> fs;
  if (topo.block_dim == 1) {
    fs = toy_objectives(topo.num_nodes, true, 3);
  } else {
    const auto data = synthesize_data(topo.num_nodes, 15, topo.block_dim, 4);
    for (const auto& d : data) fs.push_back(logreg_objective(d, 0.1, 1e-3, topo.num_nodes));
  }
  return Problem::make(topo, fs, NoiseModel::additive_gaussian(0.05));
}

// Records (x^r, lambda^r) for r = 1..T through the observer.
struct Recorder {
  std::vector<Vector> xs;
  std::vector<Vector> lambdas;
  RunOptions options() {
    RunOptions o;
    o.record_metrics = false;
    o.observer = [this](const IterateState& s, const MetricRecord&) {
      xs.push_back(s.x);
      lambdas.push_back(s.lambda);
    };
    return o;
  }
};

double max_discrepancy(const Recorder& a, const Recorder& b) {
  REQUIRE(a.xs.size() == b.xs.size());
  double worst = 0.0;
  for (std::size_t r = 0; r < a.xs.size(); ++r) {
    worst = std::max(worst, (a.xs[r] - b.xs[r]).cwiseAbs().maxCoeff());
    if (a.lambdas[r].size() > 0) worst = std::max(worst, (a.lambdas[r] - b.lambdas[r]).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace

TEST_SUITE_BEGIN("engine");

TEST_CASE("primal step on a single edge") {
  const NetworkMatrices mats = build_matrices(path2());
  const Vector x1 = primal_step(state(vec({1.0, 0.0}), Vector::Zero(1)), Vector::Zero(2), mats, 1.0);
  CHECK(x1[0] == doctest::Approx(0.5));
  CHECK(x1[1] == doctest::Approx(0.5));

  // rho = 2, lambda = 1: x+ = x - (A^T lambda + rho L- x) / (2 rho d) = (1,0) - ((1,-1) + (2,-2)) / 4.
  const IterateState s = state(vec({1.0, 0.0}), vec({1.0}));
  const Vector x2 = primal_step(s, Vector::Zero(2), mats, 2.0);
  CHECK(x2[0] == doctest::Approx(0.25));
  CHECK(x2[1] == doctest::Approx(0.75));
  const Vector arg = oracle::argmin_quadratic(oracle::primal_subproblem(s, Vector::Zero(2), mats, 2.0), s.x);
  CHECK((x2 - arg).norm() < 1e-12);
}

TEST_CASE("primal step solves the subproblem on random instances") {
  Rng rng(77);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + uniform_index(rng, 4);
    const std::size_t m = 1 + uniform_index(rng, 3);
    const Topology topo = generate_graph(GraphKind::kRandomConnected, n, 0.4, 1000 + static_cast<std::uint64_t>(t), m);
    const NetworkMatrices mats = build_matrices(topo);
    const auto q = static_cast<Eigen::Index>(mats.stacked_dim());
    const auto e = static_cast<Eigen::Index>(mats.dual_dim());
    Vector x(q), g(q), lambda(e);
    for (Eigen::Index k = 0; k < q; ++k) x[k] = uniform(rng, -2, 2);
    for (Eigen::Index k = 0; k < q; ++k) g[k] = uniform(rng, -5, 5);
    for (Eigen::Index k = 0; k < e; ++k) lambda[k] = uniform(rng, -3, 3);
    const double rho = std::exp(uniform(rng, std::log(0.1), std::log(50.0)));
    const IterateState s = state(x, lambda);
    const Vector xp = primal_step(s, g, mats, rho);

    const Vector arg = oracle::argmin_quadratic(oracle::primal_subproblem(s, g, mats, rho), x);
    CHECK((xp - arg).norm() / arg.norm() < 1e-8);

    // First-order condition G + A^T lambda + rho A^T A x + 2 rho D (x+ - x) = 0.
    const Matrix& a = mats.incidence;
    const Vector resid = g + a.transpose() * lambda + rho * a.transpose() * (a * x) +
                         2.0 * rho * mats.degree.cwiseProduct(xp - x);
    CHECK(resid.norm() < 1e-9 * (1.0 + g.norm()));

    // The signless-Laplacian form of the same update.
    const Vector alt = (rho * mats.signless_laplacian * x - g - a.transpose() * lambda)
                           .cwiseQuotient(2.0 * rho * mats.degree);
    CHECK((xp - alt).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + alt.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("primal step rejects bad dimensions") {
  const NetworkMatrices mats = build_matrices(path2());
  CHECK_THROWS_AS((void)primal_step(state(vec({1.0}), Vector::Zero(1)), Vector::Zero(1), mats, 1.0), ArgumentError);
  CHECK_THROWS_AS((void)primal_step(state(vec({1.0, 0.0}), Vector::Zero(2)), Vector::Zero(2), mats, 1.0),
                  ArgumentError);
  CHECK_THROWS_AS((void)primal_step(state(vec({1.0, 0.0}), Vector::Zero(1)), Vector::Zero(2), mats, 0.0),
                  ArgumentError);
  CHECK_THROWS_AS((void)dual_step(vec({1.0}), Vector::Zero(1), 1.0, mats), ArgumentError);
}

TEST_CASE("dual step") {
  const NetworkMatrices mats = build_matrices(path2());
  CHECK(dual_step(vec({0.3, 0.3}), vec({4.0}), 7.0, mats)[0] == 4.0);
  CHECK(dual_step(vec({0.5, 0.5}), vec({0.0}), 1.0, mats)[0] == 0.0);
  CHECK(dual_step(vec({1.0, 0.0}), vec({1.0}), 2.0, mats)[0] == 3.0);
}

TEST_CASE("consensual point with zero gradient is a fixed point") {
  for (std::size_t m : {1u, 2u}) {
    const Topology topo = generate_graph(GraphKind::kRandomConnected, 6, 0.3, 5, m);
    const NetworkMatrices mats = build_matrices(topo);
    Vector block(static_cast<Eigen::Index>(m));
    for (Eigen::Index k = 0; k < block.size(); ++k) block[k] = 0.7 - static_cast<double>(k);
    const Vector x = block.replicate(6, 1);
    const IterateState s = state(x, Vector::Zero(static_cast<Eigen::Index>(mats.dual_dim())));
    const Vector xp = primal_step(s, Vector::Zero(x.size()), mats, 3.0);
    CHECK((xp - x).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(dual_step(xp, s.lambda, 3.0, mats).isZero(1e-15));
  }
}

TEST_CASE("single step matches the closed form with a large batch") {
  const Topology topo = path2(2);
  const auto fs = random_quadratics(2, 2, 8);
  const Problem p = Problem::make(topo, fs);
  AlgoParams params;
  params.rho = 2.0;
  params.mu = 0.01;
  params.batch = 200'000;
  params.total_iters = 1;
  params.seed = 5;
  RunOptions opts;
  opts.x0 = vec({0.5, -0.2, 0.1, 0.4});
  opts.record_metrics = false;
  const RunResult res = run_centralized(p, params, opts);

  const Vector x0 = *opts.x0;
  Vector grad(4);
  for (Eigen::Index i = 0; i < 2; ++i) {
    grad.segment(2 * i, 2) = fs[static_cast<std::size_t>(i)]->smoothed_gradient(x0.segment(2 * i, 2), 0.01, nullptr).value;
  }
  const NetworkMatrices& mats = p.mats;
  const Vector expected = x0 - (grad + params.rho * mats.signed_laplacian * x0).cwiseQuotient(2.0 * params.rho * mats.degree);

  // Estimator spread per coordinate from independent single samples.
  const auto oracles = p.make_oracles();
  Vector sq = Vector::Zero(4);
  Rng rng(9);
  const int probe = 5000;
  for (int s = 0; s < probe; ++s) {
    for (Eigen::Index i = 0; i < 2; ++i) {
      const Vector g = single_sample_estimate(oracles[static_cast<std::size_t>(i)], x0.segment(2 * i, 2), 0.01, rng);
      sq.segment(2 * i, 2) += (g - grad.segment(2 * i, 2)).cwiseAbs2();
    }
  }
  const Vector se = (sq / probe / static_cast<double>(params.batch)).cwiseSqrt().cwiseQuotient(2.0 * params.rho * mats.degree);
  for (Eigen::Index k = 0; k < 4; ++k) {
    CAPTURE(k);
    CHECK(std::abs(res.final_state.x[k] - expected[k]) < 4.0 * se[k]);
  }
  CHECK(res.final_state.lambda[0] == doctest::Approx(params.rho * (res.final_state.x[0] - res.final_state.x[2])));
}

TEST_CASE("zero objectives from a consensual start never move") {
  const Topology topo = generate_graph(GraphKind::kRing, 5, 0.0, 0, 2);
  std::vector<ObjectivePtr> fs(5, zero_objective(2));
  const Problem p = Problem::make(topo, fs, NoiseModel::additive_gaussian(1.0));
  AlgoParams params;
  params.rho = 1.5;
  params.batch = 3;
  params.total_iters = 25;
  RunOptions opts;
  opts.x0 = vec({0.2, -1.0}).replicate(5, 1);
  for (const RunResult& res : {run_centralized(p, params, opts), run_distributed(p, params, opts)}) {
    CHECK(res.final_state.x == *opts.x0);
    CHECK(res.final_state.lambda.isZero(0.0));
    for (const auto& rec : res.records) {
      CHECK(rec.stationarity_gap == 0.0);
      CHECK(rec.constraint_violation == 0.0);
    }
  }
}

TEST_CASE("runs are deterministic in the seed") {
  const Topology topo = generate_graph(GraphKind::kRandomConnected, 6, 0.3, 2, 1);
  const Problem p = noisy_problem(topo);
  AlgoParams params;
  params.rho = 50.0;
  params.batch = 4;
  params.total_iters = 40;
  params.seed = 99;
  RunOptions opts;
  opts.init_box = Box::cube(1, -2, 2);
  const RunResult a = run_centralized(p, params, opts);
  const RunResult b = run_centralized(p, params, opts);
  CHECK(a.final_state.x == b.final_state.x);
  CHECK(a.final_state.lambda == b.final_state.lambda);
  CHECK(a.output_index == b.output_index);
  REQUIRE(a.records.size() == 40);
  for (std::size_t r = 0; r < a.records.size(); ++r) {
    CHECK(a.records[r].stationarity_gap == b.records[r].stationarity_gap);
    CHECK(a.records[r].objective == b.records[r].objective);
  }
  params.seed = 100;
  CHECK(run_centralized(p, params, opts).final_state.x != a.final_state.x);
}

TEST_CASE("serial and parallel kernels agree bit for bit") {
  const Topology topo = generate_graph(GraphKind::kRandomConnected, 8, 0.3, 2, 2);
  const Problem p = noisy_problem(topo);
  const auto oracles = p.make_oracles();
  Vector x = Vector::Constant(16, 0.3);
  const SmoothingParams sp{0.02, 7};
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(estimate_stacked_gradient(oracles, x, sp, 4, r, Execution::kSerial) ==
          estimate_stacked_gradient(oracles, x, sp, 4, r, Execution::kParallel));
  }
  const NormalTable table(500, 2, 3);
  const SmoothedEvaluation s = stacked_smoothed_evaluation(p.objectives, x, 0.02, &table, Execution::kSerial);
  const SmoothedEvaluation q = stacked_smoothed_evaluation(p.objectives, x, 0.02, &table, Execution::kParallel);
  CHECK(s.value.value == q.value.value);
  CHECK(s.gradient.value == q.gradient.value);
  CHECK(stacked_smoothed_value(p.objectives, x, 0.02, &table).value == s.value.value);
}

TEST_CASE("distributed mode reproduces the centralized iterates") {
  struct Case {
    Topology topo;
    std::size_t iters;
  };
  const std::vector<Case> cases = {
      {generate_graph(GraphKind::kRing, 4, 0.0, 0, 1), 1},
      {generate_graph(GraphKind::kRing, 6, 0.0, 0, 1), 200},
      {generate_graph(GraphKind::kRandomConnected, 10, 0.3, 11, 1), 200},
      {generate_graph(GraphKind::kRandomConnected, 7, 0.5, 3, 2), 60},
      {path2(1), 30},
  };
  for (const auto& c : cases) {
    CAPTURE(c.topo.num_nodes);
    const Problem p = noisy_problem(c.topo);
    AlgoParams params;
    params.rho = 40.0;
    params.batch = 3;
    params.total_iters = c.iters;
    params.seed = 17;
    for (GradientSource src : {GradientSource::kZerothOrder, GradientSource::kReference}) {
      params.gradient = src;
      const NormalTable table(200, c.topo.block_dim, 1);
      Recorder rc, rd;
      RunOptions oc = rc.options();
      RunOptions od = rd.options();
      oc.table = od.table = &table;
      oc.init_box = od.init_box = Box::cube(c.topo.block_dim, -1, 1);
      const RunResult a = run_centralized(p, params, oc);
      const RunResult b = run_distributed(p, params, od);
      const double gap = max_discrepancy(rc, rd);
      CHECK(gap < 1e-12);
      CHECK(gap == 0.0);
      CHECK(a.output_index == b.output_index);
      CHECK(a.output.x == b.output.x);
    }
  }
}

TEST_CASE("message counts follow the protocol") {
  {
    const Problem p = Problem::make(path2(), {toy_objective(), toy_objective()});
    AlgoParams params;
    params.rho = 10.0;
    params.total_iters = 3;
    RunOptions o;
    o.record_metrics = false;
    const RunResult r = run_distributed(p, params, o);
    REQUIRE(r.messages);
    // Both endpoints send their primal block; only the owner sends the edge dual.
    CHECK(r.messages->per_round_primal == std::vector<std::size_t>{1, 1});
    CHECK(r.messages->per_round_dual == std::vector<std::size_t>{1, 0});
    CHECK(r.messages->per_round_sent == std::vector<std::size_t>{2, 1});
    CHECK(r.messages->rounds == 3);
    CHECK(r.messages->total == 9);
  }
  {
    const Topology ring = generate_graph(GraphKind::kRing, 4, 0.0, 0, 1);
    const Problem p = Problem::make(ring, toy_objectives(4, false, 0));
    AlgoParams params;
    params.rho = 10.0;
    params.total_iters = 1;
    const RunResult r = run_distributed(p, params);
    std::size_t duals = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(r.messages->per_round_primal[i] == 2);
      duals += r.messages->per_round_dual[i];
    }
    CHECK(duals == ring.num_edges());
  }
}

TEST_CASE("duals stay in the range of the incidence matrix") {
  const Topology topo = generate_graph(GraphKind::kRandomConnected, 8, 0.3, 6, 2);
  const Problem p = noisy_problem(topo);
  AlgoParams params;
  params.rho = 30.0;
  params.batch = 2;
  params.total_iters = 50;
  Recorder rec;
  RunOptions o = rec.options();
  const Vector x0 = initial_point(p, Box::cube(2, -1, 1), params.seed);
  o.x0 = x0;
  (void)run_centralized(p, params, o);
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(p.mats.dual_dim()));
  for (std::size_t r = 0; r < rec.xs.size(); ++r) {
    sum += p.mats.incidence * rec.xs[r];
    const Vector& lam = rec.lambdas[r];
    CHECK((lam - params.rho * sum).norm() <= 1e-9 * lam.norm());
    CHECK(oracle::range_residual(p.mats.incidence, lam) < 1e-9 * lam.norm());
    // ||A x^{r+1}|| = ||lambda^{r+1} - lambda^r|| / rho.
    const Vector prev = r == 0 ? Vector::Zero(lam.size()) : rec.lambdas[r - 1];
    const double lhs = (p.mats.incidence * rec.xs[r]).norm();
    CHECK(std::abs(lhs - (lam - prev).norm() / params.rho) <= 1e-12 * lhs);
  }
}

TEST_CASE("output index is uniform and returns that iterate") {
  const Problem p = noisy_problem(path2());
  AlgoParams params;
  params.rho = 1e3;
  params.total_iters = 5;
  std::map<std::size_t, int> counts;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    params.seed = seed;
    RunOptions o;
    o.record_metrics = false;
    std::vector<IterateState> states;
    o.observer = [&](const IterateState& s, const MetricRecord&) { states.push_back(s); };
    const RunResult r = run_centralized(p, params, o);
    ++counts[r.output_index];
    if (seed < 50) {
      if (r.output_index == 0) {
        CHECK(r.output.iter == 0);
        CHECK(r.output.lambda.isZero(0.0));
      } else {
        CHECK(r.output.x == states[r.output_index - 1].x);
        CHECK(r.output.lambda == states[r.output_index - 1].lambda);
      }
    }
  }
  REQUIRE(counts.size() == 5);
  for (const auto& [u, n] : counts) {
    CAPTURE(u);
    CHECK(u < 5);
    CHECK(std::abs(n - 400) < 80);  // ~4.5 binomial standard deviations
  }
}

TEST_CASE("resuming from a checkpoint continues the same run") {
  const Topology topo = generate_graph(GraphKind::kRandomConnected, 5, 0.3, 4, 1);
  const Problem p = noisy_problem(topo);
  AlgoParams params;
  params.rho = 25.0;
  params.batch = 3;
  params.total_iters = 20;
  params.seed = 8;
  std::optional<Checkpoint> cp;
  RunOptions o;
  o.observer = [&](const IterateState& s, const MetricRecord&) {
    if (s.iter == 10) cp = Checkpoint{s.iter, s.x, s.lambda, s.x_prev};
  };
  const RunResult full = run_centralized(p, params, o);
  REQUIRE(cp);

  nlohmann::json j = *cp;
  RunOptions resumed;
  resumed.resume = nlohmann::json::parse(j.dump()).get<Checkpoint>();
  for (const RunResult& r : {run_centralized(p, params, resumed), run_distributed(p, params, resumed)}) {
    CHECK(r.final_state.x == full.final_state.x);
    CHECK(r.final_state.lambda == full.final_state.lambda);
    REQUIRE(r.records.size() == 10);
    for (std::size_t k = 0; k < 10; ++k) {
      CHECK(r.records[k].iter == full.records[10 + k].iter);
      CHECK(r.records[k].stationarity_gap == full.records[10 + k].stationarity_gap);
    }
  }
  Checkpoint bad = *cp;
  bad.iter = 21;
  resumed.resume = bad;
  CHECK_THROWS_AS((void)run_centralized(p, params, resumed), ArgumentError);
}

TEST_CASE("oracle errors carry agent and iteration") {
  const Problem p = Problem::make(path2(), {toy_objective(), toy_objective()});
  AlgoParams params;
  params.rho = 1.0;
  params.mu = 1e4;  // every perturbation escapes [-5, 5]
  params.total_iters = 3;
  RunOptions o;
  o.record_metrics = false;
  o.x0 = vec({0.0, 0.0});
  CHECK_THROWS_WITH_AS((void)run_centralized(p, params, o), doctest::Contains("agent 0, iteration 0"), DomainError);
  CHECK_THROWS_WITH_AS((void)run_distributed(p, params, o), doctest::Contains("iteration 0"), DomainError);
}

TEST_CASE("problem and parameter validation") {
  CHECK_THROWS_AS(Problem::make(path2(), {toy_objective()}), ArgumentError);
  CHECK_THROWS_AS(Problem::make(path2(2), {toy_objective(), toy_objective()}), ArgumentError);
  Topology disconnected;
  disconnected.num_nodes = 3;
  disconnected.edges = {{0, 1}};
  CHECK_THROWS_AS(Problem::make(disconnected, toy_objectives(3, false, 0)), GraphError);

  AlgoParams params;
  params.rho = -1.0;
  CHECK_THROWS_AS(params.validate(), ArgumentError);
  params.rho = 1.0;
  params.total_iters = 0;
  CHECK_THROWS_AS(params.validate(), ArgumentError);
  params.total_iters = 1;
  params.batch = 0;
  CHECK_THROWS_AS(params.validate(), ArgumentError);

  const Problem p = Problem::make(path2(), {toy_objective(), toy_objective()});
  CHECK(p.lipschitz() == doctest::Approx(std::sqrt(2.0) * (2.0 + std::exp(5.0))));
  CHECK_THROWS_AS((void)initial_point(p, Box::cube(1, -6, 6), 0), ArgumentError);
  const Vector x0 = initial_point(p, Box::cube(1, -2, 2), 3);
  CHECK(x0 == initial_point(p, Box::cube(1, -2, 2), 3));
  CHECK(x0.cwiseAbs().maxCoeff() <= 2.0);
}

TEST_SUITE_END();
