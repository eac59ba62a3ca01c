#include "zoc/objectives.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include "zoc/quadrature.hpp"
#include "zoc/random.hpp"

namespace zoc {

NormalTable::NormalTable(std::size_t samples, std::size_t dim, std::uint64_t seed)
    : samples_(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(samples)) {
  Rng rng = make_rng(seed, {tag(Stream::kReferenceTable), dim});
  for (Eigen::Index r = 0; r < samples_.cols(); ++r) {
    for (Eigen::Index c = 0; c < samples_.rows(); ++c) samples_(c, r) = standard_normal(rng);
  }
}

namespace {

void require_table(const NormalTable* table, std::size_t dim, const char* who) {
  if (table == nullptr || table->size() < 2) {
    throw ArgumentError(std::string(who) + ": Monte-Carlo smoothing needs a normal table with >= 2 rows");
  }
  if (table->dim() != dim) throw ArgumentError(std::string(who) + ": normal table dimension mismatch");
}

// Running mean / variance accumulator per coordinate (Welford).
struct VectorMoments {
  explicit VectorMoments(Eigen::Index dim) : mean(Vector::Zero(dim)), m2(Vector::Zero(dim)) {}
  void add(const Vector& v) {
    ++count;
    const Vector delta = v - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta.cwiseProduct(v - mean);
  }
  [[nodiscard]] Vector std_error() const {
    if (count < 2) return Vector::Zero(mean.size());
    const double n = static_cast<double>(count);
    return (m2 / (n - 1.0) / n).cwiseSqrt();
  }
  std::size_t count = 0;
  Vector mean;
  Vector m2;
};

struct ScalarMoments {
  void add(double v) {
    ++count;
    const double delta = v - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (v - mean);
  }
  [[nodiscard]] double std_error() const {
    if (count < 2) return 0.0;
    const double n = static_cast<double>(count);
    return std::sqrt(m2 / (n - 1.0) / n);
  }
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;
};

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

SmoothedGradient LocalObjective::smoothed_gradient(const VectorRef& x, double mu, const NormalTable* table) const {
  require_table(table, dim(), "smoothed_gradient");
  const double fx = value(x);
  VectorMoments acc(x.size());
  Vector probe(x.size());
  for (Eigen::Index r = 0; r < table->samples().cols(); ++r) {
    const auto u = table->samples().col(r);
    probe = x + mu * u;
    acc.add(((value(probe) - fx) / mu) * u);
  }
  return {acc.mean, acc.std_error()};
}

SmoothedValue LocalObjective::smoothed_value(const VectorRef& x, double mu, const NormalTable* table) const {
  require_table(table, dim(), "smoothed_value");
  ScalarMoments acc;
  Vector probe(x.size());
  for (Eigen::Index r = 0; r < table->samples().cols(); ++r) {
    probe = x + mu * table->samples().col(r);
    acc.add(value(probe));
  }
  return {acc.mean, acc.std_error()};
}

// ---------------------------------------------------------------------------
// Toy objective

ToyObjective::ToyObjective(double phase, double box_half_width)
    : LocalObjective(Box::cube(1, -box_half_width, box_half_width),
                     // |d/dx| <= |sin| + |sign| + exp(x) on the box
                     2.0 + std::exp(box_half_width), 0.0),
      phase_(phase) {
  if (!(std::abs(phase) < std::numbers::pi)) throw ArgumentError("toy objective phase must satisfy |phase| < pi");
}

double ToyObjective::value(const VectorRef& x) const {
  if (x.size() != 1) throw ArgumentError("toy objective is one-dimensional");
  const double v = x[0];
  return std::abs(std::cos(v + phase_) + std::abs(v) + std::exp(v));
}

SmoothedGradient ToyObjective::smoothed_gradient(const VectorRef& x, double mu, const NormalTable*) const {
  if (x.size() != 1) throw ArgumentError("toy objective is one-dimensional");
  const double v = x[0];
  const double damp = std::exp(-0.5 * mu * mu);
  Vector g(1);
  g[0] = -std::sin(v + phase_) * damp + std::erf(v / (mu * std::numbers::sqrt2)) + std::exp(v + 0.5 * mu * mu);
  return {g, Vector::Zero(1)};
}

SmoothedValue ToyObjective::smoothed_value(const VectorRef& x, double mu, const NormalTable*) const {
  if (x.size() != 1) throw ArgumentError("toy objective is one-dimensional");
  const double v = x[0];
  const double damp = std::exp(-0.5 * mu * mu);
  // E|v + mu Z| for the folded normal.
  const double folded = mu * std::sqrt(2.0 / std::numbers::pi) * std::exp(-v * v / (2.0 * mu * mu)) +
                        v * std::erf(v / (mu * std::numbers::sqrt2));
  return {std::cos(v + phase_) * damp + folded + std::exp(v + 0.5 * mu * mu), 0.0};
}

// ---------------------------------------------------------------------------
// Quadratic family

namespace {

void validate_quadratic(const Matrix& h, const Vector& b, const Box& box) {
  if (h.rows() != h.cols() || h.rows() != b.size()) {
    throw ArgumentError("quadratic objective: H must be square and match b");
  }
  if (box.dim() != static_cast<std::size_t>(b.size())) throw ArgumentError("quadratic objective: box dimension");
  if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + h.cwiseAbs().maxCoeff())) {
    throw ArgumentError("quadratic objective: H is not symmetric");
  }
}

double box_radius(const Box& box) { return box.lower.cwiseAbs().cwiseMax(box.upper.cwiseAbs()).norm(); }

double quadratic_lipschitz(const Matrix& h, const Vector& b, const Box& box) {
  validate_quadratic(h, b, box);
  if (h.isZero(0.0)) return b.norm();
  if (!box.bounded()) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h, Eigen::EigenvaluesOnly);
  return b.norm() + eig.eigenvalues().cwiseAbs().maxCoeff() * box_radius(box);
}

double quadratic_lower_bound(const Matrix& h, const Vector& b, const Box& box) {
  validate_quadratic(h, b, box);
  if (h.isZero(0.0) && b.isZero(0.0)) return 0.0;
  if (h.isZero(0.0) && !box.bounded()) return -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  double bound = -std::numeric_limits<double>::infinity();
  if (lmin > 0.0) bound = -0.5 * b.dot(h.ldlt().solve(b));
  if (box.bounded()) {
    const double r = box_radius(box);
    bound = std::max(bound, 0.5 * std::min(lmin, 0.0) * r * r - b.norm() * r);
  }
  return bound;
}

}  // namespace

QuadraticObjective::QuadraticObjective(Matrix hessian, Vector linear, Box box)
    : LocalObjective(box, quadratic_lipschitz(hessian, linear, box), quadratic_lower_bound(hessian, linear, box)),
      hessian_(std::move(hessian)),
      linear_(std::move(linear)) {}

double QuadraticObjective::value(const VectorRef& x) const {
  if (x.size() != linear_.size()) throw ArgumentError("quadratic objective: dimension mismatch");
  return 0.5 * x.dot(hessian_ * x) + linear_.dot(x);
}

double QuadraticObjective::smoothed_lower_bound(double mu) const {
  return lower_bound() + 0.5 * mu * mu * hessian_.trace();
}

SmoothedGradient QuadraticObjective::smoothed_gradient(const VectorRef& x, double, const NormalTable*) const {
  if (x.size() != linear_.size()) throw ArgumentError("quadratic objective: dimension mismatch");
  return {hessian_ * x + linear_, Vector::Zero(x.size())};
}

SmoothedValue QuadraticObjective::smoothed_value(const VectorRef& x, double mu, const NormalTable*) const {
  return {value(x) + 0.5 * mu * mu * hessian_.trace(), 0.0};
}

// ---------------------------------------------------------------------------
// Sparse logistic regression

namespace {

double logistic_lipschitz(const ClassificationData& data, double alpha, double epsilon, std::size_t n) {
  if (!(epsilon > 0.0)) throw ArgumentError("logreg objective: epsilon must be positive");
  if (alpha < 0.0) throw ArgumentError("logreg objective: alpha must be nonnegative");
  if (n == 0 || data.batch_size() == 0) throw ArgumentError("logreg objective: empty batch or zero agents");
  if (data.features.rows() != data.labels.size()) throw ArgumentError("logreg objective: features/labels mismatch");
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(data.batch_size()));
  // Data term: |d/dx log(1+exp(-y x^T v))| <= ||v||. Regulariser: ||sign/(eps+|x|_1)|| <= sqrt(M)/eps.
  return scale * (data.features.rowwise().norm().sum() +
                  alpha * std::sqrt(static_cast<double>(data.dim())) / epsilon);
}

double logistic_lower_bound(const ClassificationData& data, double alpha, double epsilon, std::size_t n) {
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(data.batch_size()));
  return scale * alpha * std::log(epsilon);
}

}  // namespace

LogisticObjective::LogisticObjective(ClassificationData data, double alpha, double epsilon, std::size_t num_agents)
    : LocalObjective(Box::unbounded(data.dim()), logistic_lipschitz(data, alpha, epsilon, num_agents),
                     logistic_lower_bound(data, alpha, epsilon, num_agents)),
      data_(std::move(data)),
      alpha_(alpha),
      epsilon_(epsilon),
      scale_(1.0 / (static_cast<double>(num_agents) * static_cast<double>(data_.batch_size()))),
      feature_norms_(data_.features.rowwise().norm()) {
  for (Eigen::Index j = 0; j < data_.labels.size(); ++j) {
    if (data_.labels[j] != 1.0 && data_.labels[j] != -1.0) throw ArgumentError("logreg objective: labels must be +-1");
  }
}

double LogisticObjective::value(const VectorRef& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) throw ArgumentError("logreg objective: dimension mismatch");
  const Vector margins = data_.features * x;
  double loss = 0.0;
  for (Eigen::Index j = 0; j < margins.size(); ++j) loss += softplus(-data_.labels[j] * margins[j]);
  return scale_ * (loss + alpha_ * std::log(epsilon_ + x.lpNorm<1>()));
}

SmoothedEvaluation LogisticObjective::evaluate(const VectorRef& x, double mu, const NormalTable* table,
                                               bool want_value, bool want_gradient) const {
  if (static_cast<std::size_t>(x.size()) != dim()) throw ArgumentError("logreg objective: dimension mismatch");
  SmoothedEvaluation out;
  // Data term: x^T v + mu ||v|| Z is one-dimensional, so each data point
  // needs only a 1-D Gaussian integral.
  const auto& gh = default_gauss_hermite();
  const Vector margins = data_.features * x;
  Vector coeff(margins.size());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < margins.size(); ++j) {
    const double y = data_.labels[j];
    const double spread = mu * feature_norms_[j];
    double acc = 0.0;
    for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
      const double t = -y * (margins[j] + spread * gh.nodes[k]);
      if (want_gradient) acc += gh.weights[k] * (-y * sigmoid(t));
      if (want_value) loss += gh.weights[k] * softplus(t);
    }
    coeff[j] = acc;
  }
  out.value.value = scale_ * loss;
  if (want_gradient) {
    out.gradient.value = scale_ * (data_.features.transpose() * coeff);
    out.gradient.std_error = Vector::Zero(x.size());
  }
  if (alpha_ == 0.0) return out;

  // Regulariser: Monte Carlo over the table columns, z = x + mu u, with the
  // pathwise gradient sign(z) / (eps + ||z||_1). This loop dominates metric
  // cost, so it runs on raw pointers with plain sums.
  require_table(table, dim(), "logreg smoothing");
  const std::size_t m = dim();
  const std::size_t n = table->size();
  const Vector xc = x;
  const double* xp = xc.data();
  const double* u = table->samples().data();
  std::vector<double> z(m), g_sum(m, 0.0), g_sq(m, 0.0);
  double v_sum = 0.0;
  double v_sq = 0.0;
  for (std::size_t r = 0; r < n; ++r, u += m) {
    double l1 = epsilon_;
    for (std::size_t k = 0; k < m; ++k) {
      z[k] = xp[k] + mu * u[k];
      l1 += std::fabs(z[k]);
    }
    if (want_gradient) {
      const double inv = 1.0 / l1;
      for (std::size_t k = 0; k < m; ++k) {
        // z == 0 has probability zero; copysign avoids a data-dependent branch.
        const double g = std::copysign(inv, z[k]);
        g_sum[k] += g;
        g_sq[k] += g * g;
      }
    }
    if (want_value) {
      const double v = std::log(l1);
      v_sum += v;
      v_sq += v * v;
    }
  }
  const double nn = static_cast<double>(n);
  const double w = scale_ * alpha_;
  if (want_gradient) {
    for (std::size_t k = 0; k < m; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const double mean = g_sum[k] / nn;
      const double var = std::max(g_sq[k] / nn - mean * mean, 0.0) * (nn / (nn - 1.0));
      out.gradient.value[kk] += w * mean;
      out.gradient.std_error[kk] = w * std::sqrt(var / nn);
    }
  }
  if (want_value) {
    const double mean = v_sum / nn;
    const double var = std::max(v_sq / nn - mean * mean, 0.0) * (nn / (nn - 1.0));
    out.value.value += w * mean;
    out.value.std_error = w * std::sqrt(var / nn);
  }
  return out;
}

SmoothedGradient LogisticObjective::smoothed_gradient(const VectorRef& x, double mu, const NormalTable* table) const {
  return evaluate(x, mu, table, false, true).gradient;
}

SmoothedValue LogisticObjective::smoothed_value(const VectorRef& x, double mu, const NormalTable* table) const {
  return evaluate(x, mu, table, true, false).value;
}

SmoothedEvaluation LogisticObjective::smoothed_evaluation(const VectorRef& x, double mu,
                                                          const NormalTable* table) const {
  return evaluate(x, mu, table, true, true);
}

// ---------------------------------------------------------------------------
// Factories, data, audits

namespace {

class ZeroObjective final : public LocalObjective {
 public:
  explicit ZeroObjective(std::size_t dim) : LocalObjective(Box::unbounded(dim), 0.0, 0.0), dim_(dim) {}
  [[nodiscard]] std::string name() const override { return "zero"; }
  [[nodiscard]] std::size_t dim() const override { return dim_; }
  [[nodiscard]] double value(const VectorRef&) const override { return 0.0; }
  [[nodiscard]] bool exact_smoothing() const override { return true; }
  [[nodiscard]] SmoothedGradient smoothed_gradient(const VectorRef& x, double, const NormalTable*) const override {
    return {Vector::Zero(x.size()), Vector::Zero(x.size())};
  }
  [[nodiscard]] SmoothedValue smoothed_value(const VectorRef&, double, const NormalTable*) const override {
    return {0.0, 0.0};
  }

 private:
  std::size_t dim_;
};

}  // namespace

ObjectivePtr toy_objective(double phase, double box_half_width) {
  return std::make_shared<ToyObjective>(phase, box_half_width);
}

ObjectivePtr quadratic_family(const Matrix& hessian, const Vector& linear, const Box& box) {
  return std::make_shared<QuadraticObjective>(hessian, linear, box);
}

ObjectivePtr logreg_objective(const ClassificationData& data, double alpha, double epsilon, std::size_t num_agents) {
  return std::make_shared<LogisticObjective>(data, alpha, epsilon, num_agents);
}

ObjectivePtr zero_objective(std::size_t dim) { return std::make_shared<ZeroObjective>(dim); }

std::vector<ObjectivePtr> toy_objectives(std::size_t num_agents, bool perturb, std::uint64_t seed,
                                         double box_half_width) {
  std::vector<ObjectivePtr> out;
  out.reserve(num_agents);
  Rng rng = make_rng(seed, {tag(Stream::kPhase)});
  for (std::size_t i = 0; i < num_agents; ++i) {
    const double phase = perturb ? uniform(rng, -0.5 * std::numbers::pi, 0.5 * std::numbers::pi) : 0.0;
    out.push_back(toy_objective(phase, box_half_width));
  }
  return out;
}

std::vector<ClassificationData> synthesize_data(std::size_t num_agents, std::size_t batch, std::size_t dim,
                                                std::uint64_t seed, double flip_prob) {
  if (num_agents == 0 || batch == 0 || dim == 0) throw ArgumentError("synthesize_data: sizes must be positive");
  Rng rng = make_rng(seed, {tag(Stream::kData)});
  const auto m = static_cast<Eigen::Index>(dim);

  // Planted sparse vector: ceil(M/4) distinct coordinates, nonzero values.
  const std::size_t support = (dim + 3) / 4;
  std::vector<std::size_t> idx(dim);
  for (std::size_t k = 0; k < dim; ++k) idx[k] = k;
  for (std::size_t k = 0; k < support; ++k) {
    const std::size_t pick = k + static_cast<std::size_t>(uniform_index(rng, dim - k));
    std::swap(idx[k], idx[pick]);
  }
  Vector planted = Vector::Zero(m);
  for (std::size_t k = 0; k < support; ++k) {
    double v = 0.0;
    while (v == 0.0) v = standard_normal(rng);
    planted[static_cast<Eigen::Index>(idx[k])] = v;
  }

  std::vector<ClassificationData> out(num_agents);
  for (auto& d : out) {
    d.features.resize(static_cast<Eigen::Index>(batch), m);
    d.labels.resize(static_cast<Eigen::Index>(batch));
    for (Eigen::Index j = 0; j < d.features.rows(); ++j) {
      for (Eigen::Index k = 0; k < m; ++k) d.features(j, k) = standard_normal(rng);
      double label = planted.dot(d.features.row(j).transpose()) >= 0.0 ? 1.0 : -1.0;
      if (uniform01(rng) < flip_prob) label = -label;
      d.labels[j] = label;
    }
  }
  return out;
}

void write_classification_csv(const std::filesystem::path& path, const ClassificationData& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[64];
  for (Eigen::Index j = 0; j < data.labels.size(); ++j) {
    out << (data.labels[j] > 0 ? "1" : "-1");
    for (Eigen::Index k = 0; k < data.features.cols(); ++k) {
      std::snprintf(buf, sizeof buf, ",%.17g", data.features(j, k));
      out << buf;
    }
    out << '\n';
  }
}

ClassificationData read_classification_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
      }
    }
    if (row.size() < 2) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": need label and features");
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": inconsistent column count");
    }
    if (row[0] != 1.0 && row[0] != -1.0) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": label must be 1 or -1");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no data rows");
  ClassificationData d;
  const auto b = static_cast<Eigen::Index>(rows.size());
  const auto m = static_cast<Eigen::Index>(rows.front().size() - 1);
  d.features.resize(b, m);
  d.labels.resize(b);
  for (Eigen::Index j = 0; j < b; ++j) {
    d.labels[j] = rows[static_cast<std::size_t>(j)][0];
    for (Eigen::Index k = 0; k < m; ++k) d.features(j, k) = rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(k + 1)];
  }
  return d;
}

double stacked_value(const std::vector<ObjectivePtr>& objectives, const VectorRef& x) {
  if (objectives.empty()) return 0.0;
  const auto m = static_cast<Eigen::Index>(objectives.front()->dim());
  if (x.size() != m * static_cast<Eigen::Index>(objectives.size())) throw ArgumentError("stacked_value: dimension mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < objectives.size(); ++i) total += objectives[i]->value(x.segment(static_cast<Eigen::Index>(i) * m, m));
  return total;
}

namespace {

Vector uniform_point(Rng& rng, const Box& box) {
  Vector p(box.lower.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) p[k] = uniform(rng, box.lower[k], box.upper[k]);
  return p;
}

}  // namespace

double sample_lipschitz(const LocalObjective& f, const Box& box, std::size_t pairs, std::uint64_t seed) {
  if (!box.bounded()) throw ArgumentError("sample_lipschitz needs a bounded box");
  Rng rng(seed);
  double best = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    const Vector a = uniform_point(rng, box);
    const Vector b = uniform_point(rng, box);
    const double dist = (a - b).norm();
    if (dist == 0.0) continue;
    best = std::max(best, std::abs(f.value(a) - f.value(b)) / dist);
  }
  return best;
}

double sample_minimum(const LocalObjective& f, const Box& box, std::size_t points, std::uint64_t seed) {
  if (!box.bounded()) throw ArgumentError("sample_minimum needs a bounded box");
  Rng rng(seed);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < points; ++p) best = std::min(best, f.value(uniform_point(rng, box)));
  return best;
}

}  // namespace zoc
