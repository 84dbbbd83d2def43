#pragma once

// Dense re-implementations used only by the acceptance suite. They take masks
// and batches as data and recompute everything else with Eigen dense algebra.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "sgl/graph.hpp"
#include "sgl/loss.hpp"
#include "support/oracles.hpp"

namespace sgl::acceptance {

using testing::Dense;

// Per-layer dense adjacencies of an augmented view, rebuilt from its masks.
inline std::vector<Dense> dense_view_layers(const InteractionGraph& g, const AugmentedView& view, int layers) {
  std::vector<Dense> out;
  const Index m = g.num_users();
  for (int l = 1; l <= layers; ++l) {
    std::vector<std::uint8_t> keep(g.edges().size(), 1);
    switch (view.op) {
      case AugmentOperator::kNone: break;
      case AugmentOperator::kNodeDropout:
        for (std::size_t k = 0; k < keep.size(); ++k) {
          const auto& e = g.edges()[k];
          keep[k] = view.node_mask[e.user] && view.node_mask[m + e.item];
        }
        break;
      case AugmentOperator::kEdgeDropout: keep = view.edge_masks.front(); break;
      case AugmentOperator::kRandomWalk: keep = view.edge_masks[l - 1]; break;
    }
    out.push_back(testing::dense_normalized_adjacency(g, keep));
  }
  return out;
}

inline std::vector<Dense> dense_full_layers(const InteractionGraph& g, int layers) {
  return std::vector<Dense>(layers, testing::dense_normalized_adjacency(g));
}

inline double dense_bpr(const Dense& z, Index m, const BprBatch& batch) {
  double total = 0.0;
  for (const auto& t : batch) {
    const double d = z.row(t.user).dot(z.row(m + t.pos_item)) - z.row(t.user).dot(z.row(m + t.neg_item));
    total += d > 0 ? std::log1p(std::exp(-d)) : -d + std::log1p(std::exp(d));
  }
  return total / static_cast<double>(batch.size());
}

struct DenseWeights {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double tau = 0.2;
  NegativeScope scope = NegativeScope::kBatchTyped;
};

// Joint objective recomputed from its definition.
inline double dense_joint_objective(const Dense& z0, Index m, Index n, const std::vector<Dense>& full,
                                    const std::vector<Dense>& view1, const std::vector<Dense>& view2,
                                    const BprBatch& batch, const DenseWeights& w) {
  const Dense z = testing::dense_readout(full, z0);
  double total = dense_bpr(z, m, batch);
  if (w.lambda2 > 0) {
    std::set<Index> rows;
    for (const auto& t : batch) {
      rows.insert(t.user);
      rows.insert(m + t.pos_item);
      rows.insert(m + t.neg_item);
    }
    double reg = 0.0;
    for (Index r : rows) reg += z0.row(r).squaredNorm();
    total += w.lambda2 * reg / static_cast<double>(batch.size());
  }
  if (w.lambda1 > 0) {
    const Matrix z1 = testing::dense_readout(view1, z0);
    const Matrix z2 = testing::dense_readout(view2, z0);
    std::set<Index> users;
    std::set<Index> items;
    for (const auto& t : batch) {
      users.insert(t.user);
      items.insert(m + t.pos_item);
    }
    std::vector<Index> ua(users.begin(), users.end());
    std::vector<Index> ia(items.begin(), items.end());
    std::vector<Index> uc = ua;
    std::vector<Index> ic = ia;
    if (w.scope == NegativeScope::kFull) {
      ua.clear();
      ia.clear();
      for (Index u = 0; u < m; ++u) ua.push_back(u);
      for (Index i = 0; i < n; ++i) ia.push_back(m + i);
      uc = ua;
      ic = ia;
    } else if (w.scope == NegativeScope::kBatchMerged) {
      uc = ua;
      uc.insert(uc.end(), ia.begin(), ia.end());
      ic = uc;
    }
    total += w.lambda1 * (testing::infonce_reference(z1, z2, ua, uc, w.tau) +
                          testing::infonce_reference(z1, z2, ia, ic, w.tau));
  }
  return total;
}

// Plain LightGCN + BPR + L2 with a hand-written Adam, all dense.
class DenseLightGcn {
 public:
  DenseLightGcn(const InteractionGraph& g, int layers, Dense z0, double lr, double lambda2)
      : a_(testing::dense_normalized_adjacency(g)), layers_(layers), m_users_(g.num_users()),
        z0_(std::move(z0)), lr_(lr), lambda2_(lambda2),
        m_(Dense::Zero(z0_.rows(), z0_.cols())), v_(Dense::Zero(z0_.rows(), z0_.cols())) {}

  void step(const BprBatch& batch) {
    // Forward: E = (1/(L+1)) sum_l A^l E0.
    std::vector<Dense> powers{z0_};
    for (int l = 0; l < layers_; ++l) powers.push_back(a_ * powers.back());
    Dense e = Dense::Zero(z0_.rows(), z0_.cols());
    for (const auto& p : powers) e += p;
    e /= static_cast<double>(layers_ + 1);

    const double b = static_cast<double>(batch.size());
    Dense ge = Dense::Zero(e.rows(), e.cols());
    for (const auto& t : batch) {
      const Index i = m_users_ + t.pos_item;
      const Index j = m_users_ + t.neg_item;
      const double x = e.row(t.user).dot(e.row(i)) - e.row(t.user).dot(e.row(j));
      const double coef = -1.0 / (1.0 + std::exp(x)) / b;
      ge.row(t.user) += coef * (e.row(i) - e.row(j));
      ge.row(i) += coef * e.row(t.user);
      ge.row(j) -= coef * e.row(t.user);
    }
    // Backward: dE0 = (1/(L+1)) sum_l (A^T)^l dE.
    Dense g0 = ge;
    Dense cur = ge;
    for (int l = 0; l < layers_; ++l) {
      cur = a_.transpose() * cur;
      g0 += cur;
    }
    g0 /= static_cast<double>(layers_ + 1);
    std::set<Index> rows;
    for (const auto& t : batch) {
      rows.insert(t.user);
      rows.insert(m_users_ + t.pos_item);
      rows.insert(m_users_ + t.neg_item);
    }
    for (Index r : rows) g0.row(r) += lambda2_ * 2.0 * z0_.row(r) / b;

    ++t_;
    m_ = 0.9 * m_ + 0.1 * g0;
    v_ = 0.999 * v_ + 0.001 * g0.cwiseProduct(g0);
    const double c1 = 1.0 - std::pow(0.9, t_);
    const double c2 = 1.0 - std::pow(0.999, t_);
    for (Index r = 0; r < z0_.rows(); ++r)
      for (Index c = 0; c < z0_.cols(); ++c)
        z0_(r, c) -= lr_ * (m_(r, c) / c1) / (std::sqrt(v_(r, c) / c2) + 1e-8);
  }

  const Dense& embeddings() const { return z0_; }

 private:
  Dense a_;
  int layers_;
  Index m_users_;
  Dense z0_;
  double lr_;
  double lambda2_;
  Dense m_;
  Dense v_;
  int t_ = 0;
};

}  // namespace sgl::acceptance
