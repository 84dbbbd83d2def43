#pragma once

// Independent reference implementations used by the tests. Nothing here
// calls into the CSR, propagation or loss code it is used to check.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "sgl/graph.hpp"
#include "sgl/types.hpp"

namespace sgl::testing {

using Dense = Eigen::MatrixXd;

// Random bipartite graph where every (u, i) is an edge with probability p.
// Guarantees at least one edge.
inline InteractionGraph random_graph(Index users, Index items, double p, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (Index u = 0; u < users; ++u)
    for (Index i = 0; i < items; ++i)
      if (coin(gen)) edges.push_back({u, i});
  if (edges.empty()) edges.push_back({0, 0});
  return InteractionGraph(users, items, std::move(edges));
}

// D^-1/2 A D^-1/2 on the edges whose keep flag is set (all when empty).
inline Dense dense_normalized_adjacency(const InteractionGraph& g,
                                        const std::vector<std::uint8_t>& keep = {}) {
  const Index m = g.num_users();
  const Index n = g.num_nodes();
  Dense a = Dense::Zero(n, n);
  for (std::size_t k = 0; k < g.edges().size(); ++k) {
    if (!keep.empty() && !keep[k]) continue;
    const auto& e = g.edges()[k];
    a(e.user, m + e.item) = 1.0;
    a(m + e.item, e.user) = 1.0;
  }
  Eigen::VectorXd deg = a.rowwise().sum();
  Eigen::VectorXd inv_sqrt(n);
  for (Index r = 0; r < n; ++r) inv_sqrt(r) = deg(r) > 0 ? 1.0 / std::sqrt(deg(r)) : 0.0;
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

inline Dense to_dense(const NormalizedAdjacency& adj) {
  Dense d = Dense::Zero(adj.rows(), adj.rows());
  for (Index r = 0; r < adj.rows(); ++r)
    for (Index k = adj.row_ptr()[r]; k < adj.row_ptr()[r + 1]; ++k) d(r, adj.col_idx()[k]) = adj.values()[k];
  return d;
}

// (1/(L+1)) * sum_l (A_l ... A_1) Z0 with dense products.
inline Dense dense_readout(const std::vector<Dense>& layer_adjacency, const Dense& z0) {
  Dense acc = z0;
  Dense cur = z0;
  for (const auto& a : layer_adjacency) {
    cur = a * cur;
    acc += cur;
  }
  return acc / static_cast<double>(layer_adjacency.size() + 1);
}

// Central differences of a scalar function of a matrix argument.
template <typename M>
M central_difference(const std::function<double(const M&)>& f, const M& x, double h = 1e-6) {
  M grad = M::Zero(x.rows(), x.cols());
  M probe = x;
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < x.cols(); ++c) {
      const double keep = probe(r, c);
      probe(r, c) = keep + h;
      const double up = f(probe);
      probe(r, c) = keep - h;
      const double down = f(probe);
      probe(r, c) = keep;
      grad(r, c) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

// ||a - b|| / max(||a||, ||b||, floor)
template <typename A, typename B>
double relative_error(const A& a, const B& b, double floor = 1e-12) {
  const double denom = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / denom;
}

inline Matrix random_matrix(Index rows, Index cols, std::uint32_t seed, double scale = 1.0) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = normal(gen);
  return m;
}

// Direct evaluation of the InfoNCE mean over anchors from its definition.
inline double infonce_reference(const Matrix& z1, const Matrix& z2, const std::vector<Index>& anchors,
                                const std::vector<Index>& candidates, double tau) {
  std::set<Index> cand(candidates.begin(), candidates.end());
  for (Index a : anchors) cand.insert(a);
  double total = 0.0;
  for (Index a : anchors) {
    auto cosine = [&](Index v) {
      return z1.row(a).dot(z2.row(v)) / (z1.row(a).norm() * z2.row(v).norm());
    };
    long double denom = 0.0;
    for (Index v : cand) denom += std::exp(static_cast<long double>(cosine(v) / tau));
    total += -(cosine(a) / tau - static_cast<double>(std::log(denom)));
  }
  return total / static_cast<double>(anchors.size());
}

}  // namespace sgl::testing
