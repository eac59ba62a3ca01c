#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "zoc/metrics.hpp"
#include "zoc/szo.hpp"

using namespace zoc;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

ClassificationData one_point(double y, const Vector& v) {
  ClassificationData d;
  d.features = v.transpose();
  d.labels = Vector::Constant(1, y);
  return d;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "zoc_test_objectives";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE_BEGIN("objectives");

TEST_CASE("toy objective values") {
  const auto f = toy_objective();
  CHECK(f->value(vec({0.0})) == doctest::Approx(2.0).epsilon(1e-15));
  const double pi = std::numbers::pi;
  CHECK(f->value(vec({pi})) == doctest::Approx(std::abs(-1.0 + pi + std::exp(pi))).epsilon(1e-14));
  CHECK(f->box().lower[0] == -5.0);
  CHECK(f->box().upper[0] == 5.0);
  CHECK(f->dim() == 1);
}

TEST_CASE("toy objective has a kink at zero") {
  const auto f = toy_objective();
  const double h = 1e-6;
  const double right = (f->value(vec({h})) - f->value(vec({0.0}))) / h;
  const double left = (f->value(vec({0.0})) - f->value(vec({-h}))) / h;
  CHECK(right == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(left == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("per-agent phase perturbation is off by default and seeded when on") {
  for (const auto& f : toy_objectives(5, false, 1)) {
    CHECK(dynamic_cast<const ToyObjective&>(*f).phase() == 0.0);
  }
  const auto a = toy_objectives(5, true, 3);
  const auto b = toy_objectives(5, true, 3);
  bool any_nonzero = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double pa = dynamic_cast<const ToyObjective&>(*a[i]).phase();
    CHECK(pa == dynamic_cast<const ToyObjective&>(*b[i]).phase());
    CHECK(std::abs(pa) <= std::numbers::pi / 2);
    any_nonzero = any_nonzero || pa != 0.0;
  }
  CHECK(any_nonzero);
  CHECK_THROWS_AS(ToyObjective(4.0), ArgumentError);
}

TEST_CASE("toy closed-form smoothing matches Monte Carlo") {
  const NormalTable table(200'000, 1, 5);
  const ToyObjective f(0.4);
  for (double x : {-3.0, -0.02, 0.0, 0.01, 1.5}) {
    for (double mu : {0.01, 0.3}) {
      CAPTURE(x);
      CAPTURE(mu);
      const Vector p = vec({x});
      const SmoothedValue mc = f.LocalObjective::smoothed_value(p, mu, &table);
      CHECK(std::abs(mc.value - f.smoothed_value(p, mu, nullptr).value) < 4.0 * mc.std_error + 1e-12);
      const SmoothedGradient mg = f.LocalObjective::smoothed_gradient(p, mu, &table);
      CHECK(std::abs(mg.value[0] - f.smoothed_gradient(p, mu, nullptr).value[0]) < 4.0 * mg.std_error[0] + 1e-12);
    }
  }
}

TEST_CASE("logistic objective values") {
  const auto data = synthesize_data(3, 20, 4, 9);
  const std::size_t n = 3;
  const auto f = logreg_objective(data[0], 0.0, 1e-3, n);
  const double base = std::log(2.0) / static_cast<double>(n);
  CHECK(f->value(Vector::Zero(4)) == doctest::Approx(base).epsilon(1e-15));
  CHECK(logreg_objective(data[0], 1.0, 1.0, n)->value(Vector::Zero(4)) == doctest::Approx(base).epsilon(1e-15));

  const auto single = logreg_objective(one_point(1.0, vec({1.0, 0.0})), 0.0, 1e-3, 4);
  CHECK(single->value(vec({10.0, 0.0})) == doctest::Approx(std::log1p(std::exp(-10.0)) / 4.0).epsilon(1e-14));
  // Large margins stay finite.
  CHECK(std::isfinite(single->value(vec({-1e4, 0.0}))));
  CHECK(single->value(vec({-1e4, 0.0})) == doctest::Approx(1e4 / 4.0));

  CHECK_THROWS_AS((void)logreg_objective(data[0], 0.1, 0.0, n), ArgumentError);
  CHECK_THROWS_AS((void)logreg_objective(data[0], -0.1, 1e-3, n), ArgumentError);
  CHECK_THROWS_AS((void)logreg_objective(one_point(0.5, vec({1.0})), 0.1, 1e-3, 1), ArgumentError);
}

TEST_CASE("logistic smoothing against Monte Carlo oracles") {
  const auto data = synthesize_data(2, 30, 3, 4);
  const LogisticObjective f(data[1], 0.5, 1e-2, 2);
  const NormalTable table(100'000, 3, 8);
  const NormalTable other(400'000, 3, 99);
  const Vector x = vec({0.3, -0.01, 0.8});
  for (double mu : {0.01, 0.2}) {
    CAPTURE(mu);
    // Value: quadrature + table against plain Monte Carlo of f(x + mu u).
    const SmoothedValue fast = f.smoothed_value(x, mu, &table);
    const SmoothedValue mc = f.LocalObjective::smoothed_value(x, mu, &other);
    CHECK(std::abs(fast.value - mc.value) < 4.0 * std::hypot(fast.std_error, mc.std_error));
    // Gradient: against the difference formula averaged over an independent table.
    const SmoothedGradient g = f.smoothed_gradient(x, mu, &table);
    const SmoothedGradient g_mc = f.LocalObjective::smoothed_gradient(x, mu, &other);
    for (Eigen::Index k = 0; k < 3; ++k) {
      CHECK(std::abs(g.value[k] - g_mc.value[k]) < 4.0 * std::hypot(g.std_error[k], g_mc.std_error[k]));
    }
    // The fused pass returns the same numbers as the separate calls.
    const SmoothedEvaluation e = f.smoothed_evaluation(x, mu, &table);
    CHECK(e.value.value == fast.value);
    CHECK(e.gradient.value == g.value);
  }
  CHECK_THROWS_AS((void)f.smoothed_gradient(x, 0.1, nullptr), ArgumentError);
}

TEST_CASE("synthesized data") {
  const auto data = synthesize_data(15, 100, 10, 21);
  REQUIRE(data.size() == 15);
  for (const auto& d : data) {
    CHECK(d.features.rows() == 100);
    CHECK(d.features.cols() == 10);
    for (Eigen::Index j = 0; j < d.labels.size(); ++j) CHECK(std::abs(d.labels[j]) == 1.0);
  }
  const auto again = synthesize_data(15, 100, 10, 21);
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(data[i].features == again[i].features);
    CHECK(data[i].labels == again[i].labels);
  }
  CHECK(synthesize_data(15, 100, 10, 22)[0].features != data[0].features);
}

TEST_CASE("without label flips the labels are a linear threshold of the features") {
  // M = 1: the planted vector is a nonzero scalar, so y v has one sign.
  const auto d1 = synthesize_data(1, 200, 1, 5, 0.0)[0];
  const double s = d1.labels[0] * d1.features(0, 0);
  for (Eigen::Index j = 0; j < d1.labels.size(); ++j) CHECK(d1.labels[j] * d1.features(j, 0) * s > 0.0);

  // M = 4: a perceptron through the origin separates the batch.
  const auto d = synthesize_data(1, 60, 4, 6, 0.0)[0];
  Vector w = Vector::Zero(4);
  int mistakes = 1;
  for (int epoch = 0; epoch < 100'000 && mistakes > 0; ++epoch) {
    mistakes = 0;
    for (Eigen::Index j = 0; j < d.labels.size(); ++j) {
      if (d.labels[j] * d.features.row(j).dot(w) <= 0.0) {
        w += d.labels[j] * d.features.row(j).transpose();
        ++mistakes;
      }
    }
  }
  CHECK(mistakes == 0);

  // With flips on, the same seed keeps the features and changes some labels.
  const auto noisy = synthesize_data(1, 60, 4, 6, 0.5)[0];
  CHECK(noisy.features == d.features);
  CHECK(noisy.labels != d.labels);
}

TEST_CASE("classification CSV round trip") {
  const auto d = synthesize_data(1, 7, 3, 2)[0];
  const auto path = scratch("agent.csv");
  write_classification_csv(path, d);
  const auto back = read_classification_csv(path);
  CHECK(back.features == d.features);
  CHECK(back.labels == d.labels);

  const auto bad = scratch("bad.csv");
  std::ofstream(bad) << "1,0.5,2\n0,1,1\n";
  CHECK_THROWS_WITH_AS((void)read_classification_csv(bad), doctest::Contains("label"), std::runtime_error);
  std::ofstream(bad) << "1,0.5,2\n1,1\n";
  CHECK_THROWS_WITH_AS((void)read_classification_csv(bad), doctest::Contains("column"), std::runtime_error);
  CHECK_THROWS((void)read_classification_csv(scratch("missing.csv")));
}

TEST_CASE("quadratic family") {
  const double mu = 0.3;
  {
    const auto f = quadratic_family(2.0 * Matrix::Identity(2, 2), Vector::Zero(2), Box::unbounded(2));
    const Vector x = vec({1.0, 0.0});
    CHECK(f->value(x) == 1.0);
    CHECK(f->smoothed_gradient(x, mu, nullptr).value == vec({2.0, 0.0}));
    CHECK(f->smoothed_value(x, mu, nullptr).value == doctest::Approx(1.0 + mu * mu * 2.0).epsilon(1e-15));
  }
  {
    const Vector a = vec({1.5, -2.0});
    const auto f = quadratic_family(Matrix::Zero(2, 2), a, Box::unbounded(2));
    const Vector x = vec({0.3, 0.7});
    CHECK(f->smoothed_value(x, mu, nullptr).value == f->value(x));
  }
  {
    Matrix h = Matrix::Zero(2, 2);
    h(0, 0) = 1.0;
    h(1, 1) = -1.0;
    const auto f = quadratic_family(h, Vector::Zero(2), Box::cube(2, -3, 3));
    const Vector x = vec({1.0, 1.0});
    CHECK(f->value(x) == 0.0);
    CHECK(f->smoothed_gradient(x, mu, nullptr).value == vec({1.0, -1.0}));
    CHECK(f->smoothed_value(x, mu, nullptr).value == 0.0);
  }
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS((void)quadratic_family(asym, Vector::Zero(2), Box::unbounded(2)), ArgumentError);
}

TEST_CASE("declared L0 and lower bounds survive sampling audits") {
  const auto data = synthesize_data(4, 25, 3, 12);
  Matrix h(3, 3);
  h << 2.0, 0.5, 0.0, 0.5, -1.0, 0.3, 0.0, 0.3, 0.5;
  std::vector<std::pair<ObjectivePtr, Box>> cases = {
      {toy_objective(), Box::cube(1, -5, 5)},
      {toy_objective(-1.2), Box::cube(1, -5, 5)},
      {quadratic_family(h, vec({1.0, -0.5, 0.2}), Box::cube(3, -2, 2)), Box::cube(3, -2, 2)},
      {logreg_objective(data[0], 0.1, 1e-3, 4), Box::cube(3, -3, 3)},
      {logreg_objective(data[1], 2.0, 0.5, 4), Box::cube(3, -0.01, 0.01)},
  };
  std::uint64_t seed = 1;
  for (const auto& [f, box] : cases) {
    CAPTURE(f->name());
    const double sampled = sample_lipschitz(*f, box, 100'000, seed++);
    CHECK(sampled > 0.0);
    CHECK(sampled <= f->lipschitz());
    CHECK(sample_minimum(*f, box, 100'000, seed++) >= f->lower_bound());
  }
}

TEST_CASE("stacked evaluation is the blockwise sum") {
  const auto data = synthesize_data(3, 10, 2, 1);
  std::vector<ObjectivePtr> fs;
  for (const auto& d : data) fs.push_back(logreg_objective(d, 0.1, 1e-3, 3));
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    Vector x(6);
    for (Eigen::Index k = 0; k < 6; ++k) x[k] = uniform(rng, -2, 2);
    double direct = 0.0;
    for (Eigen::Index i = 0; i < 3; ++i) direct += fs[static_cast<std::size_t>(i)]->value(x.segment(2 * i, 2));
    CHECK(stacked_value(fs, x) == direct);
  }
  CHECK_THROWS_AS((void)stacked_value(fs, Vector::Zero(5)), ArgumentError);
}

TEST_CASE("smoothed gradient Lipschitz constant") {
  // ||grad f_mu(x) - grad f_mu(y)|| <= 2 L0 sqrt(Q) / mu ||x - y||, checked with
  // central differences of the smoothed value.
  const double mu = 0.05;
  const ToyObjective f(0.3);
  const double bound = smoothing_lipschitz(f.lipschitz(), mu, 1);
  Rng rng(3);
  const double h = 1e-5;
  auto fd = [&](double x) {
    return (f.smoothed_value(vec({x + h}), mu, nullptr).value - f.smoothed_value(vec({x - h}), mu, nullptr).value) /
           (2 * h);
  };
  for (int t = 0; t < 1000; ++t) {
    const double x = uniform(rng, -4.9, 4.9);
    const double y = uniform(rng, -4.9, 4.9);
    if (x == y) continue;
    CHECK(std::abs(fd(x) - fd(y)) <= 1.05 * bound * std::abs(x - y));
  }
}

TEST_CASE("normal table and zero objective") {
  const NormalTable a(1000, 3, 4);
  const NormalTable b(1000, 3, 4);
  CHECK(a.size() == 1000);
  CHECK(a.dim() == 3);
  CHECK(a.samples() == b.samples());
  CHECK(std::abs(a.samples().mean()) < 0.1);

  const auto z = zero_objective(2);
  CHECK(z->value(vec({3.0, 4.0})) == 0.0);
  CHECK(z->lipschitz() == 0.0);
  CHECK(z->smoothed_gradient(vec({3.0, 4.0}), 0.1, nullptr).value.isZero(0.0));
}

TEST_SUITE_END();
