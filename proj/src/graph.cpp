#include "zoc/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "zoc/random.hpp"

namespace zoc {

std::vector<std::size_t> Topology::degrees() const {
  std::vector<std::size_t> deg(num_nodes, 0);
  for (const auto& [i, j] : edges) {
    if (i < num_nodes) ++deg[i];
    if (j < num_nodes) ++deg[j];
  }
  return deg;
}

std::vector<std::vector<std::size_t>> Topology::neighbors() const {
  std::vector<std::vector<std::size_t>> nb(num_nodes);
  for (const auto& [i, j] : edges) {
    nb[i].push_back(j);
    nb[j].push_back(i);
  }
  for (auto& list : nb) std::sort(list.begin(), list.end());
  return nb;
}

namespace {

void check_ranges(const Topology& topo) {
  for (const auto& [i, j] : topo.edges) {
    if (i >= topo.num_nodes || j >= topo.num_nodes) {
      throw GraphError("edge (" + std::to_string(i) + ", " + std::to_string(j) +
                       ") references a node outside [0, " + std::to_string(topo.num_nodes) + ")");
    }
  }
}

}  // namespace

bool check_connected(const Topology& topo) {
  check_ranges(topo);
  if (topo.num_nodes == 0) return false;
  const auto nb = topo.neighbors();
  std::vector<char> seen(topo.num_nodes, 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t w : nb[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == topo.num_nodes;
}

void Topology::validate() const {
  if (num_nodes == 0) throw GraphError("graph has no nodes");
  if (block_dim == 0) throw GraphError("block dimension must be positive");
  check_ranges(*this);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& [i, j] : edges) {
    if (i == j) throw GraphError("self-loop at node " + std::to_string(i));
    const auto key = std::minmax(i, j);
    if (!seen.insert(key).second) {
      throw GraphError("duplicate edge between nodes " + std::to_string(key.first) + " and " +
                       std::to_string(key.second));
    }
  }
  if (!check_connected(*this)) throw GraphError("graph is not connected");
}

NetworkMatrices build_matrices(const Topology& topo) {
  topo.validate();
  const auto n = static_cast<Eigen::Index>(topo.num_nodes);
  const auto m = static_cast<Eigen::Index>(topo.block_dim);
  const auto e = static_cast<Eigen::Index>(topo.num_edges());

  Matrix scalar_incidence = Matrix::Zero(e, n);
  for (Eigen::Index k = 0; k < e; ++k) {
    const auto [i, j] = topo.edges[static_cast<std::size_t>(k)];
    scalar_incidence(k, static_cast<Eigen::Index>(i)) = 1.0;
    scalar_incidence(k, static_cast<Eigen::Index>(j)) = -1.0;
  }

  NetworkMatrices mats;
  mats.num_nodes = topo.num_nodes;
  mats.block_dim = topo.block_dim;
  mats.num_edges = topo.num_edges();

  // Kronecker product with I_M.
  mats.incidence = Matrix::Zero(e * m, n * m);
  for (Eigen::Index k = 0; k < e; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = scalar_incidence(k, i);
      if (a == 0.0) continue;
      for (Eigen::Index d = 0; d < m; ++d) mats.incidence(k * m + d, i * m + d) = a;
    }
  }

  const auto deg = topo.degrees();
  mats.degree.resize(n * m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < m; ++d) mats.degree[i * m + d] = static_cast<double>(deg[static_cast<std::size_t>(i)]);
  }

  mats.signed_laplacian = mats.incidence.transpose() * mats.incidence;
  mats.signless_laplacian = -mats.signed_laplacian;
  mats.signless_laplacian.diagonal() += 2.0 * mats.degree;

  // Spectra from the scalar N x N operators; the Kronecker factor I_M only
  // repeats every eigenvalue M times.
  const Matrix scalar_lminus = scalar_incidence.transpose() * scalar_incidence;
  Eigen::SelfAdjointEigenSolver<Matrix> lminus_eig(scalar_lminus, Eigen::EigenvaluesOnly);
  const Vector ev = lminus_eig.eigenvalues();
  const double ev_max = ev.cwiseAbs().maxCoeff();
  const double zero_tol = kZeroEigenvalueRelTol * ev_max;
  mats.sigma_min = 0.0;
  std::size_t zeros = 0;
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (std::abs(ev[k]) <= zero_tol) {
      ++zeros;
    } else if (mats.sigma_min == 0.0 || ev[k] < mats.sigma_min) {
      mats.sigma_min = ev[k];
    }
  }
  mats.nullity = zeros * topo.block_dim;

  Matrix scalar_lplus = -scalar_lminus;
  for (Eigen::Index i = 0; i < n; ++i) scalar_lplus(i, i) += 2.0 * static_cast<double>(deg[static_cast<std::size_t>(i)]);
  Eigen::SelfAdjointEigenSolver<Matrix> lplus_eig(scalar_lplus, Eigen::EigenvaluesOnly);
  mats.lplus_norm = lplus_eig.eigenvalues().cwiseAbs().maxCoeff();
  return mats;
}

GraphKind parse_graph_kind(const std::string& name) {
  if (name == "ring") return GraphKind::kRing;
  if (name == "random_connected") return GraphKind::kRandomConnected;
  throw GraphError("unknown graph kind '" + name + "' (expected ring or random_connected)");
}

namespace {

// Decode a Pruefer sequence into the edge list of a labelled tree.
std::vector<std::pair<std::size_t, std::size_t>> pruefer_tree(const std::vector<std::size_t>& seq,
                                                              std::size_t n) {
  std::vector<std::size_t> deg(n, 1);
  for (std::size_t v : seq) ++deg[v];
  std::set<std::size_t> leaves;
  for (std::size_t v = 0; v < n; ++v) {
    if (deg[v] == 1) leaves.insert(v);
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t v : seq) {
    const std::size_t leaf = *leaves.begin();
    leaves.erase(leaves.begin());
    edges.emplace_back(std::min(leaf, v), std::max(leaf, v));
    if (--deg[v] == 1) leaves.insert(v);
  }
  const std::size_t a = *leaves.begin();
  const std::size_t b = *std::next(leaves.begin());
  edges.emplace_back(a, b);
  return edges;
}

}  // namespace

Topology generate_graph(GraphKind kind, std::size_t num_nodes, double extra_edge_prob, std::uint64_t seed,
                        std::size_t block_dim) {
  if (num_nodes < 2) throw GraphError("graph generation needs at least 2 nodes");
  Topology topo;
  topo.num_nodes = num_nodes;
  topo.block_dim = block_dim;

  if (kind == GraphKind::kRing) {
    if (num_nodes == 2) {
      topo.edges = {{0, 1}};
    } else {
      for (std::size_t i = 0; i < num_nodes; ++i) topo.edges.emplace_back(i, (i + 1) % num_nodes);
    }
    return topo;
  }

  if (extra_edge_prob < 0.0 || extra_edge_prob > 1.0) {
    throw GraphError("extra_edge_prob must lie in [0, 1]");
  }
  Rng rng = make_rng(seed, {tag(Stream::kGraph)});
  std::vector<std::pair<std::size_t, std::size_t>> tree;
  if (num_nodes == 2) {
    tree = {{0, 1}};
  } else {
    std::vector<std::size_t> seq(num_nodes - 2);
    for (auto& v : seq) v = static_cast<std::size_t>(uniform_index(rng, num_nodes));
    tree = pruefer_tree(seq, num_nodes);
  }
  std::set<std::pair<std::size_t, std::size_t>> in_tree(tree.begin(), tree.end());

  // Lexicographic order over all pairs keeps the edge list canonical.
  for (std::size_t i = 0; i < num_nodes; ++i) {
    for (std::size_t j = i + 1; j < num_nodes; ++j) {
      if (in_tree.count({i, j})) {
        topo.edges.emplace_back(i, j);
      } else if (uniform01(rng) < extra_edge_prob) {
        topo.edges.emplace_back(i, j);
      }
    }
  }
  return topo;
}

void to_json(nlohmann::json& j, const Topology& topo) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : topo.edges) edges.push_back({a, b});
  j = nlohmann::json{{"nodes", topo.num_nodes}, {"block_dim", topo.block_dim}, {"edges", edges}};
}

void from_json(const nlohmann::json& j, Topology& topo) {
  topo.num_nodes = j.at("nodes").get<std::size_t>();
  topo.block_dim = j.value("block_dim", std::size_t{1});
  topo.edges.clear();
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw GraphError("each edge must be a pair [i, j]");
    topo.edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
  }
}

}  // namespace zoc
