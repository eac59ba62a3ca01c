#include "zoc/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace zoc {

void AlgoParams::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ArgumentError("rho must be positive and finite");
  smoothing().validate();
  if (total_iters < 1) throw ArgumentError("total_iters T must be at least 1");
}

Vector primal_step(const IterateState& state, const VectorRef& gradient, const NetworkMatrices& mats, double rho) {
  const auto q = static_cast<Eigen::Index>(mats.stacked_dim());
  if (state.x.size() != q || gradient.size() != q) throw ArgumentError("primal_step: x or G has the wrong length");
  if (static_cast<std::size_t>(state.lambda.size()) != mats.dual_dim()) throw ArgumentError("primal_step: lambda has the wrong length");
  if (!(rho > 0.0)) throw ArgumentError("primal_step: rho must be positive");
  const Matrix& a = mats.incidence;
  const Matrix& lm = mats.signed_laplacian;
  Vector out(q);
  // Explicit ascending loops over the nonzeros: the distributed agents add
  // the same terms in the same order, which makes the two modes agree bit for bit.
  for (Eigen::Index col = 0; col < q; ++col) {
    double at_lambda = 0.0;
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
      const double coef = a(k, col);
      if (coef != 0.0) at_lambda += coef * state.lambda[k];
    }
    double lminus_x = 0.0;
    for (Eigen::Index c = 0; c < q; ++c) {
      const double coef = lm(c, col);  // symmetric; column access is contiguous
      if (coef != 0.0) lminus_x += coef * state.x[c];
    }
    out[col] = primal_coordinate(state.x[col], gradient[col], at_lambda, lminus_x, rho, mats.degree[col]);
  }
  return out;
}

Vector dual_step(const VectorRef& x_new, const VectorRef& lambda, double rho, const NetworkMatrices& mats) {
  if (static_cast<std::size_t>(x_new.size()) != mats.stacked_dim()) throw ArgumentError("dual_step: x has the wrong length");
  if (static_cast<std::size_t>(lambda.size()) != mats.dual_dim()) throw ArgumentError("dual_step: lambda has the wrong length");
  const Matrix& a = mats.incidence;
  Vector out(lambda.size());
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    double ax = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      const double coef = a(k, c);
      if (coef != 0.0) ax += coef * x_new[c];
    }
    out[k] = lambda[k] + rho * ax;
  }
  return out;
}

Problem Problem::make(Topology topology, std::vector<ObjectivePtr> objectives, NoiseModel noise) {
  topology.validate();
  if (objectives.size() != topology.num_nodes) {
    throw ArgumentError("need one objective per node: got " + std::to_string(objectives.size()) + " for " +
                        std::to_string(topology.num_nodes) + " nodes");
  }
  for (std::size_t i = 0; i < objectives.size(); ++i) {
    if (!objectives[i]) throw ArgumentError("objective " + std::to_string(i) + " is null");
    if (objectives[i]->dim() != topology.block_dim) {
      throw ArgumentError("objective " + std::to_string(i) + " has dimension " + std::to_string(objectives[i]->dim()) +
                          ", block_dim is " + std::to_string(topology.block_dim));
    }
  }
  Problem p;
  p.mats = build_matrices(topology);
  p.topology = std::move(topology);
  p.objectives = std::move(objectives);
  p.noise = noise;
  return p;
}

double Problem::lipschitz() const {
  double s = 0.0;
  for (const auto& f : objectives) s += f->lipschitz() * f->lipschitz();
  return std::sqrt(s);
}

double Problem::smoothed_lower_bound(double mu) const {
  double s = 0.0;
  for (const auto& f : objectives) s += f->smoothed_lower_bound(mu);
  return s;
}

std::vector<Oracle> Problem::make_oracles() const {
  std::vector<Oracle> out;
  out.reserve(objectives.size());
  for (const auto& f : objectives) out.emplace_back(f, noise);
  return out;
}

void to_json(nlohmann::json& j, const Checkpoint& cp) {
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  j = nlohmann::json{{"iter", cp.iter}, {"x", vec(cp.x)}, {"lambda", vec(cp.lambda)}, {"x_prev", vec(cp.x_prev)}};
}

void from_json(const nlohmann::json& j, Checkpoint& cp) {
  auto vec = [&](const char* key) {
    const auto v = j.at(key).get<std::vector<double>>();
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  cp.iter = j.at("iter").get<std::size_t>();
  cp.x = vec("x");
  cp.lambda = vec("lambda");
  cp.x_prev = j.contains("x_prev") ? vec("x_prev") : cp.x;
}

Box default_init_box(const Problem& problem) {
  const Box& b = problem.objectives.front()->box();
  if (b.bounded()) return b;
  return Box::cube(problem.topology.block_dim, -1.0, 1.0);
}

Vector initial_point(const Problem& problem, const Box& box, std::uint64_t seed) {
  const std::size_t m = problem.topology.block_dim;
  if (box.dim() != m) throw ArgumentError("init box dimension differs from block_dim");
  if (!box.bounded()) throw ArgumentError("init box must be bounded");
  for (std::size_t k = 0; k < m; ++k) {
    if (!(box.lower[static_cast<Eigen::Index>(k)] <= box.upper[static_cast<Eigen::Index>(k)])) {
      throw ArgumentError("init box has lower > upper");
    }
  }
  Vector x(static_cast<Eigen::Index>(problem.stacked_dim()));
  for (std::size_t i = 0; i < problem.topology.num_nodes; ++i) {
    const Box& domain = problem.objectives[i]->box();
    if (!domain.contains(box.lower) || !domain.contains(box.upper)) {
      throw ArgumentError("init box is not inside the domain box of agent " + std::to_string(i));
    }
    Rng rng = make_rng(seed, {tag(Stream::kInit), i});
    for (std::size_t k = 0; k < m; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      x[static_cast<Eigen::Index>(i * m + k)] = uniform(rng, box.lower[kk], box.upper[kk]);
    }
  }
  return x;
}

MetricRecorder::MetricRecorder(const Problem& problem, double mu, double rho, double potential_c,
                               const NormalTable* table, Execution exec)
    : problem_(problem), mu_(mu), rho_(rho), table_(table), exec_(exec) {
  if (potential_c > 0.0) {
    consts_ = AnalysisConstants::compute(problem.lipschitz(), mu, problem.stacked_dim(), problem.mats, potential_c, rho);
  }
}

MetricRecord MetricRecorder::primal_dual(std::size_t iter, const IterateState& state,
                                         const VectorRef& lambda_prev) const {
  MetricRecord rec;
  rec.iter = iter;
  if (consts_) {
    const SmoothedEvaluation e = stacked_smoothed_evaluation(problem_.objectives, state.x, mu_, table_, exec_);
    rec.stationarity_gap = stationarity_gap(state.x, lambda_prev, problem_.mats, rho_, e.gradient.value);
    rec.potential = potential(state.x, state.x_prev, state.lambda, problem_.mats, *consts_, e.value.value);
  } else {
    const SmoothedGradient grad = stacked_reference_gradient(problem_.objectives, state.x, mu_, table_, exec_);
    rec.stationarity_gap = stationarity_gap(state.x, lambda_prev, problem_.mats, rho_, grad.value);
    rec.potential = std::numeric_limits<double>::quiet_NaN();
  }
  rec.constraint_violation = constraint_violation(state.x, problem_.mats);
  rec.objective = stacked_value(problem_.objectives, state.x);
  return rec;
}

MetricRecord MetricRecorder::consensus(std::size_t iter, const VectorRef& x) const {
  MetricRecord rec;
  rec.iter = iter;
  const SmoothedGradient grad = stacked_reference_gradient(problem_.objectives, x, mu_, table_, exec_);
  rec.stationarity_gap = consensus_stationarity_gap(x, problem_.mats, grad.value);
  rec.constraint_violation = constraint_violation(x, problem_.mats);
  rec.potential = std::numeric_limits<double>::quiet_NaN();
  rec.objective = stacked_value(problem_.objectives, x);
  return rec;
}

namespace {

IterateState starting_state(const Problem& problem, const AlgoParams& params, const RunOptions& options) {
  const auto q = static_cast<Eigen::Index>(problem.stacked_dim());
  const auto e = static_cast<Eigen::Index>(problem.mats.dual_dim());
  IterateState s;
  if (options.resume) {
    const Checkpoint& cp = *options.resume;
    if (cp.x.size() != q || cp.x_prev.size() != q || cp.lambda.size() != e) {
      throw ArgumentError("checkpoint dimensions do not match the problem");
    }
    if (cp.iter > params.total_iters) throw ArgumentError("checkpoint iteration is beyond total_iters");
    s.x = cp.x;
    s.lambda = cp.lambda;
    s.x_prev = cp.x_prev;
    s.iter = cp.iter;
    return s;
  }
  if (options.x0) {
    if (options.x0->size() != q) throw ArgumentError("x0 has the wrong length");
    s.x = *options.x0;
  } else {
    s.x = initial_point(problem, options.init_box ? *options.init_box : default_init_box(problem), params.seed);
  }
  s.lambda = Vector::Zero(e);
  s.x_prev = s.x;
  return s;
}

// Shared outer loop. The stepper advances x and lambda by one round.
template <class Stepper>
RunResult drive(const Problem& problem, const AlgoParams& params, const RunOptions& options, Stepper& stepper) {
  params.validate();
  const std::size_t t_total = params.total_iters;
  Rng output_rng = make_rng(params.seed, {tag(Stream::kOutputIndex)});
  RunResult res;
  res.output_index = static_cast<std::size_t>(uniform_index(output_rng, t_total));

  IterateState state = starting_state(problem, params, options);
  stepper.reset(state);
  if (state.iter == res.output_index) res.output = state;

  std::optional<MetricRecorder> recorder;
  if (options.record_metrics) {
    recorder.emplace(problem, params.mu, params.rho, options.potential_c, options.table, options.exec);
  }
  res.records.reserve(t_total - state.iter);
  const auto start = std::chrono::steady_clock::now();
  Vector lambda_prev;
  for (std::size_t r = state.iter; r < t_total; ++r) {
    lambda_prev = state.lambda;
    stepper.advance(state, r);
    MetricRecord rec;
    rec.iter = r + 1;
    if (recorder) rec = recorder->primal_dual(r + 1, state, lambda_prev);
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.records.push_back(rec);
    if (options.observer) options.observer(state, rec);
    if (state.iter == res.output_index) res.output = state;
  }
  res.final_state = std::move(state);
  return res;
}

Vector reference_or_estimate(const Problem& problem, const std::vector<Oracle>& oracles, const AlgoParams& params,
                             const RunOptions& options, const VectorRef& x, std::size_t r) {
  if (params.gradient == GradientSource::kReference) {
    return stacked_reference_gradient(problem.objectives, x, params.mu, options.table, options.exec).value;
  }
  return estimate_stacked_gradient(oracles, x, params.smoothing(), params.seed, r, options.exec);
}

class CentralizedStepper {
 public:
  CentralizedStepper(const Problem& problem, const AlgoParams& params, const RunOptions& options)
      : problem_(problem), params_(params), options_(options), oracles_(problem.make_oracles()) {}

  void reset(const IterateState&) {}

  void advance(IterateState& s, std::size_t r) {
    const Vector g = reference_or_estimate(problem_, oracles_, params_, options_, s.x, r);
    Vector x_new = primal_step(s, g, problem_.mats, params_.rho);
    s.lambda = dual_step(x_new, s.lambda, params_.rho, problem_.mats);
    s.x_prev = std::move(s.x);
    s.x = std::move(x_new);
    s.iter = r + 1;
  }

 private:
  const Problem& problem_;
  const AlgoParams& params_;
  const RunOptions& options_;
  std::vector<Oracle> oracles_;
};

// ---- message-passing simulation ----

struct Message {
  enum class Kind { kPrimal, kDual };
  std::size_t from = 0;
  std::size_t to = 0;
  Kind kind = Kind::kPrimal;
  std::size_t edge = 0;
  Vector payload;
};

// Reliable, ordered, synchronous delivery restricted to graph edges.
class Network {
 public:
  explicit Network(const Topology& topo) : neighbors_(topo.neighbors()), inbox_(topo.num_nodes), sent_(topo.num_nodes) {}

  void send(Message m) {
    const auto& nb = neighbors_[m.from];
    if (!std::binary_search(nb.begin(), nb.end(), m.to)) {
      throw std::logic_error("agent " + std::to_string(m.from) + " tried to message non-neighbour " + std::to_string(m.to));
    }
    ++sent_[m.from];
    inbox_[m.to].push_back(std::move(m));
  }

  std::vector<Message> take(std::size_t agent) { return std::exchange(inbox_[agent], {}); }

  const std::vector<std::size_t>& sent() const { return sent_; }
  void reset_counts() { std::fill(sent_.begin(), sent_.end(), 0); }

 private:
  std::vector<std::vector<std::size_t>> neighbors_;
  std::vector<std::vector<Message>> inbox_;
  std::vector<std::size_t> sent_;
};

// One agent. It reads only its oracle, its own block, the cached blocks of
// its neighbours and the duals of its incident edges.
class Agent {
 public:
  struct Link {
    std::size_t edge;
    std::size_t neighbor;
    bool owner;  // this agent is the edge's first endpoint
    Vector lambda;
  };

  Agent(std::size_t id, const Problem& problem)
      : id_(id), m_(problem.topology.block_dim), oracle_(problem.objectives[id], problem.noise) {
    const auto& edges = problem.topology.edges;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const auto [a, b] = edges[k];
      if (a == id_) links_.push_back({k, b, true, Vector::Zero(static_cast<Eigen::Index>(m_))});
      if (b == id_) links_.push_back({k, a, false, Vector::Zero(static_cast<Eigen::Index>(m_))});
    }
    degree_ = static_cast<double>(links_.size());
    for (const auto& l : links_) closed_.push_back(l.neighbor);
    closed_.push_back(id_);
    std::sort(closed_.begin(), closed_.end());
  }

  void load(const IterateState& s) {
    const auto mi = static_cast<Eigen::Index>(m_);
    x_ = s.x.segment(static_cast<Eigen::Index>(id_) * mi, mi);
    cache_.clear();
    for (auto& l : links_) {
      l.lambda = s.lambda.segment(static_cast<Eigen::Index>(l.edge) * mi, mi);
      cache_.emplace_back(l.neighbor, s.x.segment(static_cast<Eigen::Index>(l.neighbor) * mi, mi));
    }
    std::sort(cache_.begin(), cache_.end(), [](const auto& p, const auto& q) { return p.first < q.first; });
  }

  // Primal update with the locally available information.
  void primal(const AlgoParams& params, const RunOptions& options, std::size_t r) {
    Vector g;
    if (params.gradient == GradientSource::kReference) {
      g = oracle_.objective().smoothed_gradient(x_, params.mu, options.table).value;
    } else {
      g = estimate_agent_gradient(oracle_, x_, params.smoothing(), params.seed, id_, r);
    }
    Vector x_new(x_.size());
    for (Eigen::Index m = 0; m < x_.size(); ++m) {
      double at_lambda = 0.0;
      for (const auto& l : links_) at_lambda += (l.owner ? 1.0 : -1.0) * l.lambda[m];
      double lminus_x = 0.0;
      for (std::size_t node : closed_) {
        if (node == id_) {
          lminus_x += degree_ * x_[m];
        } else {
          lminus_x += -1.0 * neighbor_block(node)[m];
        }
      }
      x_new[m] = primal_coordinate(x_[m], g[m], at_lambda, lminus_x, params.rho, degree_);
    }
    x_ = std::move(x_new);
  }

  void send_primal(Network& net) const {
    for (const auto& l : links_) net.send({id_, l.neighbor, Message::Kind::kPrimal, l.edge, x_});
  }

  // Owned duals: lambda_ij += rho (x_i - x_j), summed in ascending node order.
  void dual(double rho, Network& net) {
    for (auto& l : links_) {
      if (!l.owner) continue;
      const Vector& xj = neighbor_block(l.neighbor);
      for (Eigen::Index m = 0; m < x_.size(); ++m) {
        double diff = 0.0;
        if (id_ < l.neighbor) {
          diff += 1.0 * x_[m];
          diff += -1.0 * xj[m];
        } else {
          diff += -1.0 * xj[m];
          diff += 1.0 * x_[m];
        }
        l.lambda[m] = l.lambda[m] + rho * diff;
      }
      net.send({id_, l.neighbor, Message::Kind::kDual, l.edge, l.lambda});
    }
  }

  void receive(std::vector<Message> msgs) {
    for (auto& msg : msgs) {
      if (msg.kind == Message::Kind::kPrimal) {
        for (auto& [node, block] : cache_) {
          if (node == msg.from) block = std::move(msg.payload);
        }
      } else {
        for (auto& l : links_) {
          if (l.edge == msg.edge && !l.owner) l.lambda = std::move(msg.payload);
        }
      }
    }
  }

  void store(IterateState& s) const {
    const auto mi = static_cast<Eigen::Index>(m_);
    s.x.segment(static_cast<Eigen::Index>(id_) * mi, mi) = x_;
    for (const auto& l : links_) {
      if (l.owner) s.lambda.segment(static_cast<Eigen::Index>(l.edge) * mi, mi) = l.lambda;
    }
  }

  [[nodiscard]] std::size_t owned() const {
    return static_cast<std::size_t>(std::count_if(links_.begin(), links_.end(), [](const Link& l) { return l.owner; }));
  }

 private:
  const Vector& neighbor_block(std::size_t node) const {
    for (const auto& [n, block] : cache_) {
      if (n == node) return block;
    }
    throw std::logic_error("agent has no cached block for node " + std::to_string(node));
  }

  std::size_t id_;
  std::size_t m_;
  Oracle oracle_;
  Vector x_;
  double degree_ = 0.0;
  std::vector<Link> links_;                           // ascending edge index
  std::vector<std::size_t> closed_;                   // {id} and neighbours, ascending
  std::vector<std::pair<std::size_t, Vector>> cache_;  // neighbour blocks, ascending node
};

class DistributedStepper {
 public:
  DistributedStepper(const Problem& problem, const AlgoParams& params, const RunOptions& options)
      : params_(params), options_(options), net_(problem.topology) {
    agents_.reserve(problem.topology.num_nodes);
    for (std::size_t i = 0; i < problem.topology.num_nodes; ++i) agents_.emplace_back(i, problem);
    stats_.per_round_sent.assign(agents_.size(), 0);
    stats_.per_round_primal.assign(agents_.size(), 0);
    stats_.per_round_dual.assign(agents_.size(), 0);
  }

  void reset(const IterateState& s) {
    for (auto& a : agents_) a.load(s);
  }

  void advance(IterateState& s, std::size_t r) {
    net_.reset_counts();
    for (auto& a : agents_) a.primal(params_, options_, r);
    for (const auto& a : agents_) a.send_primal(net_);
    for (std::size_t i = 0; i < agents_.size(); ++i) agents_[i].receive(net_.take(i));
    const std::vector<std::size_t> after_primal = net_.sent();
    for (auto& a : agents_) a.dual(params_.rho, net_);
    for (std::size_t i = 0; i < agents_.size(); ++i) agents_[i].receive(net_.take(i));

    for (std::size_t i = 0; i < agents_.size(); ++i) {
      stats_.per_round_sent[i] = net_.sent()[i];
      stats_.per_round_primal[i] = after_primal[i];
      stats_.per_round_dual[i] = net_.sent()[i] - after_primal[i];
      stats_.total += net_.sent()[i];
    }
    ++stats_.rounds;

    s.x_prev = s.x;
    for (const auto& a : agents_) a.store(s);
    s.iter = r + 1;
  }

  [[nodiscard]] const MessageStats& stats() const { return stats_; }

 private:
  const AlgoParams& params_;
  const RunOptions& options_;
  Network net_;
  std::vector<Agent> agents_;
  MessageStats stats_;
};

}  // namespace

RunResult run_centralized(const Problem& problem, const AlgoParams& params, const RunOptions& options) {
  CentralizedStepper stepper(problem, params, options);
  return drive(problem, params, options, stepper);
}

RunResult run_distributed(const Problem& problem, const AlgoParams& params, const RunOptions& options) {
  DistributedStepper stepper(problem, params, options);
  RunResult res = drive(problem, params, options, stepper);
  res.messages = stepper.stats();
  return res;
}

}  // namespace zoc
