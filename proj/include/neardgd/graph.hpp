#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "neardgd/csv.hpp"
#include "neardgd/errors.hpp"
#include "neardgd/linalg.hpp"

namespace neardgd {

enum class TopologyKind { cyclic, complete, star, custom };

// Undirected connected graph over agents 0..n-1. Edges are stored normalized:
// first index smaller, lexicographically sorted, no duplicates or self loops.
struct Topology {
  int n = 0;
  TopologyKind kind = TopologyKind::custom;
  std::vector<std::pair<int, int>> edges;
  int cyclic_c = 0;  // connectivity parameter, cyclic graphs only
  int hub = -1;      // centre, star graphs only

  std::vector<int> degrees() const {
    std::vector<int> d(static_cast<std::size_t>(n), 0);
    for (const auto& [i, j] : edges) {
      ++d[static_cast<std::size_t>(i)];
      ++d[static_cast<std::size_t>(j)];
    }
    return d;
  }

  std::string describe() const {
    switch (kind) {
      case TopologyKind::cyclic:
        return "cyclic(n=" + std::to_string(n) +
               ",c=" + std::to_string(cyclic_c) + ")";
      case TopologyKind::complete:
        return "complete(n=" + std::to_string(n) + ")";
      case TopologyKind::star:
        return "star(n=" + std::to_string(n) + ",hub=" + std::to_string(hub) +
               ")";
      case TopologyKind::custom:
        return "custom(n=" + std::to_string(n) +
               ",edges=" + std::to_string(edges.size()) + ")";
    }
    return "unknown";
  }
};

namespace detail {

inline void normalize_edges(int n, std::vector<std::pair<int, int>>& edges) {
  for (auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n)
      throw InvalidParameterError("topology: edge index out of range");
    if (i == j) throw InvalidParameterError("topology: self loop not allowed");
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

inline bool is_connected(int n, const std::vector<std::pair<int, int>>& edges) {
  if (n <= 0) return false;
  if (n == 1) return true;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (const auto& [i, j] : edges) {
    adj[static_cast<std::size_t>(i)].push_back(j);
    adj[static_cast<std::size_t>(j)].push_back(i);
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<int> queue;
  queue.push(0);
  seen[0] = 1;
  int count = 1;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop();
    for (const int v : adj[static_cast<std::size_t>(u)]) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++count;
        queue.push(v);
      }
    }
  }
  return count == n;
}

}  // namespace detail

// c-cyclic graph: every agent linked to its c nearest neighbours on each side
// of the ring. Requires 1 <= c <= (n-1)/2 so that the edge set stays simple.
inline Topology cyclic_topology(int n, int c) {
  if (n < 3) throw InvalidParameterError("cyclic topology: need n >= 3");
  if (c < 1 || 2 * c >= n)
    throw InvalidParameterError("cyclic topology: need 1 <= c <= (n-1)/2");
  Topology t;
  t.n = n;
  t.kind = TopologyKind::cyclic;
  t.cyclic_c = c;
  for (int i = 0; i < n; ++i)
    for (int k = 1; k <= c; ++k) t.edges.emplace_back(i, (i + k) % n);
  detail::normalize_edges(n, t.edges);
  return t;
}

inline Topology complete_topology(int n) {
  if (n < 1) throw InvalidParameterError("complete topology: need n >= 1");
  Topology t;
  t.n = n;
  t.kind = TopologyKind::complete;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) t.edges.emplace_back(i, j);
  return t;
}

inline Topology star_topology(int n, int hub) {
  if (n < 2) throw InvalidParameterError("star topology: need n >= 2");
  if (hub < 0 || hub >= n)
    throw InvalidParameterError("star topology: hub out of range");
  Topology t;
  t.n = n;
  t.kind = TopologyKind::star;
  t.hub = hub;
  for (int i = 0; i < n; ++i)
    if (i != hub) t.edges.emplace_back(std::min(i, hub), std::max(i, hub));
  detail::normalize_edges(n, t.edges);
  return t;
}

inline Topology custom_topology(int n, std::vector<std::pair<int, int>> edges) {
  if (n < 1) throw InvalidParameterError("custom topology: need n >= 1");
  detail::normalize_edges(n, edges);
  if (!detail::is_connected(n, edges))
    throw InvalidParameterError("custom topology: graph is not connected");
  Topology t;
  t.n = n;
  t.kind = TopologyKind::custom;
  t.edges = std::move(edges);
  return t;
}

// Symmetric doubly stochastic mixing matrix together with its contraction
// factor beta = max(|lambda_2|, |lambda_n|), the second largest eigenvalue
// magnitude. beta < 1 exactly when the underlying graph is connected.
struct ConsensusMatrix {
  lin::Matrix w;
  double beta = 0.0;
  std::string topology;  // human-readable provenance

  int n() const { return static_cast<int>(w.rows()); }
};

// Second largest eigenvalue magnitude of a symmetric stochastic matrix.
// Validates that the leading eigenvalue is 1 (within 1e-8) and that the rest
// of the spectrum is strictly inside the unit circle, so a disconnected or
// otherwise malformed matrix is rejected rather than silently accepted.
inline double spectral_gap(const lin::Matrix& w) {
  if (w.rows() != w.cols())
    throw DimensionError("spectral_gap: matrix must be square");
  const auto ev = lin::symmetric_eigenvalues(w);
  const std::size_t n = ev.size();
  if (std::abs(ev[n - 1] - 1.0) > 1e-8)
    throw InvalidParameterError(
        "spectral_gap: leading eigenvalue is not 1; matrix is not a valid "
        "consensus matrix");
  if (n == 1) return 0.0;
  double beta = std::max(std::abs(ev[0]), std::abs(ev[n - 2]));
  if (beta >= 1.0 - 1e-12)
    throw InvalidParameterError(
        "spectral_gap: second eigenvalue magnitude reaches 1; graph is "
        "effectively disconnected");
  if (beta < 0.0) beta = 0.0;
  return beta;
}

// Metropolis-Hastings weights: w_ij = 1/(1 + max(deg_i, deg_j)) on edges,
// diagonal filled to make rows sum to 1. Symmetric and doubly stochastic by
// construction.
inline ConsensusMatrix metropolis_weights(const Topology& t) {
  if (t.n < 1) throw InvalidParameterError("metropolis_weights: empty graph");
  if (!detail::is_connected(t.n, t.edges))
    throw InvalidParameterError("metropolis_weights: graph is not connected");
  const auto deg = t.degrees();
  lin::Matrix w = lin::Matrix::Zero(t.n, t.n);
  for (const auto& [i, j] : t.edges) {
    const double v =
        1.0 / (1.0 + static_cast<double>(std::max(
                         deg[static_cast<std::size_t>(i)],
                         deg[static_cast<std::size_t>(j)])));
    w(i, j) = v;
    w(j, i) = v;
  }
  for (int i = 0; i < t.n; ++i) {
    double off = 0.0;
    for (int j = 0; j < t.n; ++j)
      if (j != i) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  ConsensusMatrix cm;
  cm.w = std::move(w);
  cm.beta = spectral_gap(cm.w);
  cm.topology = t.describe();
  return cm;
}

// Flat averaging matrix (1/n everywhere): one round reaches exact consensus,
// so beta is exactly 0. Corresponds to a complete graph with uniform weights.
inline ConsensusMatrix uniform_weights(int n) {
  if (n < 1) throw InvalidParameterError("uniform_weights: need n >= 1");
  ConsensusMatrix cm;
  cm.w = lin::Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  cm.beta = 0.0;
  cm.topology = "complete(n=" + std::to_string(n) + ",weights=uniform)";
  return cm;
}

// t_c successive mixing rounds applied to an n-by-p stacked state. Rounds are
// applied one by one (never as a precomputed matrix power) so that the cost
// accounting and the floating point path match a real message exchange.
inline lin::Matrix apply_consensus(const ConsensusMatrix& w,
                                   const lin::Matrix& state, long t_c) {
  if (w.w.rows() != state.rows())
    throw DimensionError("apply_consensus: state has wrong number of rows");
  if (t_c < 0) throw InvalidParameterError("apply_consensus: t_c must be >= 0");
  lin::Matrix cur = state;
  lin::Matrix next;
  for (long r = 0; r < t_c; ++r) {
    lin::matmul_into(next, w.w, cur);
    cur.swap(next);
  }
  return cur;
}

// Writes the mixing matrix as plain CSV (one row per line), mostly for
// external inspection of generated networks.
inline void write_matrix_csv(const lin::Matrix& m,
                             const std::filesystem::path& path) {
  std::string text;
  for (lin::Index i = 0; i < m.rows(); ++i) {
    for (lin::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) text.push_back(',');
      text += csv::format_double(m(i, j));
    }
    text.push_back('\n');
  }
  csv::write_text(path, text);
}

}  // namespace neardgd
