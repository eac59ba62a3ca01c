#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "zoc/types.hpp"

namespace zoc {

/// Undirected graph with a fixed edge order and a per-node block dimension.
///
/// Nodes are 0-based. Edge k = (i, j) puts +1 at node i and -1 at node j in
/// row k of the incidence matrix; this orientation also fixes the sign of the
/// dual variable attached to the edge.
struct Topology {
  std::size_t num_nodes = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t block_dim = 1;

  [[nodiscard]] std::size_t num_edges() const { return edges.size(); }
  [[nodiscard]] std::size_t stacked_dim() const { return num_nodes * block_dim; }
  [[nodiscard]] std::vector<std::size_t> degrees() const;
  /// Sorted neighbour lists.
  [[nodiscard]] std::vector<std::vector<std::size_t>> neighbors() const;

  /// Throws GraphError on self-loops, duplicates (either orientation),
  /// out-of-range indices, zero sizes, or a disconnected graph.
  void validate() const;
};

/// All graph-derived operators, dense. Immutable after construction.
struct NetworkMatrices {
  std::size_t num_nodes = 0;
  std::size_t block_dim = 1;
  std::size_t num_edges = 0;
  Matrix incidence;           // A, (E*M) x Q
  Vector degree;              // diagonal of D, length Q
  Matrix signed_laplacian;    // L- = A^T A
  Matrix signless_laplacian;  // L+ = 2D - A^T A
  double sigma_min = 0.0;     // smallest nonzero eigenvalue of A^T A
  double lplus_norm = 0.0;    // spectral norm of L+
  std::size_t nullity = 0;    // eigenvalues of A^T A counted as zero

  [[nodiscard]] std::size_t stacked_dim() const { return num_nodes * block_dim; }
  [[nodiscard]] std::size_t dual_dim() const { return num_edges * block_dim; }
};

/// Relative threshold below which an eigenvalue of A^T A counts as zero.
inline constexpr double kZeroEigenvalueRelTol = 1e-9;

[[nodiscard]] bool check_connected(const Topology& topo);

[[nodiscard]] NetworkMatrices build_matrices(const Topology& topo);

enum class GraphKind { kRing, kRandomConnected };

[[nodiscard]] GraphKind parse_graph_kind(const std::string& name);

/// Ring 0-1-...-(N-1)-0, or a uniformly random labelled spanning tree
/// (random Pruefer sequence) plus every non-tree pair with probability
/// extra_edge_prob. Deterministic in the seed.
[[nodiscard]] Topology generate_graph(GraphKind kind, std::size_t num_nodes, double extra_edge_prob,
                                      std::uint64_t seed, std::size_t block_dim = 1);

void to_json(nlohmann::json& j, const Topology& topo);
void from_json(const nlohmann::json& j, Topology& topo);

}  // namespace zoc
