#include "sgl/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sgl/error.hpp"

namespace sgl {

std::string to_string(NegativeScope scope) {
  switch (scope) {
    case NegativeScope::kFull: return "full";
    case NegativeScope::kBatchTyped: return "batch";
    case NegativeScope::kBatchMerged: return "merge";
  }
  return "batch";
}

NegativeScope parse_negative_scope(const std::string& name) {
  if (name == "full") return NegativeScope::kFull;
  if (name == "batch" || name == "batch-typed") return NegativeScope::kBatchTyped;
  if (name == "merge" || name == "batch-merged") return NegativeScope::kBatchMerged;
  throw DomainError("unknown negative scope '" + name + "'");
}

double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

LossAndGrad bpr_loss_and_grad(const BprBatch& batch, const FinalRepresentations& reps) {
  LossAndGrad out;
  out.grad = Matrix::Zero(reps.z.rows(), reps.z.cols());
  if (batch.empty()) return out;
  const double scale = 1.0 / static_cast<double>(batch.size());
  const Index m = reps.num_users;
  double total = 0.0;
  for (const auto& t : batch) {
    const auto zu = reps.user(t.user);
    const auto zi = reps.item(t.pos_item);
    const auto zj = reps.item(t.neg_item);
    const double delta = zu.dot(zi) - zu.dot(zj);
    total -= log_sigmoid(delta);
    // d/d delta of -log sigmoid(delta) is -sigmoid(-delta).
    const double w = -sigmoid(-delta) * scale;
    out.grad.row(t.user) += w * (zi - zj);
    out.grad.row(m + t.pos_item) += w * zu;
    out.grad.row(m + t.neg_item) -= w * zu;
  }
  out.loss = total * scale;
  return out;
}

InfoNceResult infonce_loss_and_grad(const Matrix& reps1, const Matrix& reps2,
                                    std::span<const Index> anchors,
                                    std::span<const Index> candidates, double tau) {
  if (!(tau > 0.0)) throw DomainError("temperature must be positive");
  if (reps1.rows() != reps2.rows() || reps1.cols() != reps2.cols()) {
    throw DimensionMismatchError("InfoNCE views have different shapes");
  }
  InfoNceResult out;
  out.grad_first = Matrix::Zero(reps1.rows(), reps1.cols());
  out.grad_second = Matrix::Zero(reps2.rows(), reps2.cols());
  if (anchors.empty()) return out;

  std::vector<Index> cand(candidates.begin(), candidates.end());
  for (Index a : anchors) cand.push_back(a);
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  const Index d = reps1.cols();
  const auto nc = static_cast<Index>(cand.size());
  // Unit-normalized contrast view for the candidates.
  Matrix unit2(nc, d);
  std::vector<double> norm2(nc);
  for (Index k = 0; k < nc; ++k) {
    norm2[k] = reps2.row(cand[k]).norm();
    if (norm2[k] == 0.0) {
      throw DegenerateRepresentationError("zero-norm representation for node " +
                                          std::to_string(cand[k]) + " in contrast view");
    }
    unit2.row(k) = reps2.row(cand[k]) / norm2[k];
  }
  // Accumulated gradient with respect to the unit vectors s''_v.
  Matrix grad_unit2 = Matrix::Zero(nc, d);

  const double scale = 1.0 / static_cast<double>(anchors.size());
  const double inv_tau = 1.0 / tau;
  // Anchors are processed in row blocks so the logit matrix stays small
  // even when every node is a candidate.
  constexpr Index kBlock = 256;
  const auto na = static_cast<Index>(anchors.size());
  double total = 0.0;
  for (Index b0 = 0; b0 < na; b0 += kBlock) {
    const Index nb = std::min(kBlock, na - b0);
    Matrix unit1(nb, d);
    Vector norm1(nb);
    std::vector<Index> pos(static_cast<std::size_t>(nb));
    for (Index r = 0; r < nb; ++r) {
      const Index a = anchors[static_cast<std::size_t>(b0 + r)];
      norm1(r) = reps1.row(a).norm();
      if (norm1(r) == 0.0) {
        throw DegenerateRepresentationError("zero-norm representation for node " + std::to_string(a) +
                                            " in anchor view");
      }
      unit1.row(r) = reps1.row(a) / norm1(r);
      pos[r] = std::lower_bound(cand.begin(), cand.end(), a) - cand.begin();
    }
    Matrix prob = (unit1 * unit2.transpose()) * inv_tau;
    for (Index r = 0; r < nb; ++r) {
      auto row = prob.row(r);
      const double positive = row(pos[r]);
      const double mx = row.maxCoeff();
      row = (row.array() - mx).exp();
      const double denom = row.sum();
      row /= denom;
      total += (mx + std::log(denom)) - positive;
      // Coefficients P_v - [v == u] of the softmax gradient.
      row(pos[r]) -= 1.0;
    }
    // dL/ds' = (1/tau) sum_v (P_v - [v == u]) s''_v, projected onto the
    // tangent space of the unit sphere at s'.
    Matrix grad_s1 = (prob * unit2) * inv_tau;
    for (Index r = 0; r < nb; ++r) {
      const auto s1 = unit1.row(r);
      const Index a = anchors[static_cast<std::size_t>(b0 + r)];
      out.grad_first.row(a) += (scale / norm1(r)) * (grad_s1.row(r) - s1.dot(grad_s1.row(r)) * s1);
    }
    // dL/ds''_v = (1/tau) (P_v - [v == u]) s'
    grad_unit2.noalias() += (scale * inv_tau) * prob.transpose() * unit1;
  }
  for (Index k = 0; k < nc; ++k) {
    const auto s2 = unit2.row(k);
    const auto g = grad_unit2.row(k);
    out.grad_second.row(cand[k]) += (g - s2 * s2.dot(g)) / norm2[k];
  }
  out.loss = total * scale;
  return out;
}

SslNodeSets ssl_node_sets(const BprBatch& batch, Index num_users, Index num_items,
                          NegativeScope scope) {
  SslNodeSets sets;
  if (scope == NegativeScope::kFull) {
    for (Index u = 0; u < num_users; ++u) sets.user_anchors.push_back(u);
    for (Index i = 0; i < num_items; ++i) sets.item_anchors.push_back(num_users + i);
    sets.user_candidates = sets.user_anchors;
    sets.item_candidates = sets.item_anchors;
    return sets;
  }
  for (const auto& t : batch) {
    sets.user_anchors.push_back(t.user);
    sets.item_anchors.push_back(num_users + t.pos_item);
  }
  auto unique_sorted = [](std::vector<Index>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  unique_sorted(sets.user_anchors);
  unique_sorted(sets.item_anchors);
  if (scope == NegativeScope::kBatchTyped) {
    sets.user_candidates = sets.user_anchors;
    sets.item_candidates = sets.item_anchors;
  } else {
    std::vector<Index> merged = sets.user_anchors;
    merged.insert(merged.end(), sets.item_anchors.begin(), sets.item_anchors.end());
    unique_sorted(merged);
    sets.user_candidates = merged;
    sets.item_candidates = merged;
  }
  return sets;
}

SslLoss ssl_loss_and_grad(const FinalRepresentations& view1, const FinalRepresentations& view2,
                          const SslNodeSets& sets, double tau) {
  auto users = infonce_loss_and_grad(view1.z, view2.z, sets.user_anchors, sets.user_candidates, tau);
  auto items = infonce_loss_and_grad(view1.z, view2.z, sets.item_anchors, sets.item_candidates, tau);
  SslLoss out;
  out.user = users.loss;
  out.item = items.loss;
  out.grad_first = std::move(users.grad_first);
  out.grad_first += items.grad_first;
  out.grad_second = std::move(users.grad_second);
  out.grad_second += items.grad_second;
  return out;
}

LossAndGrad l2_regularization(const Matrix& params, std::span<const Index> rows, double scale) {
  LossAndGrad out;
  out.grad = Matrix::Zero(params.rows(), params.cols());
  double total = 0.0;
  for (Index r : rows) {
    total += params.row(r).squaredNorm();
    out.grad.row(r) = 2.0 * scale * params.row(r);
  }
  out.loss = scale * total;
  return out;
}

std::vector<Index> batch_touched_rows(const BprBatch& batch, Index num_users) {
  std::vector<Index> rows;
  rows.reserve(batch.size() * 3);
  for (const auto& t : batch) {
    rows.push_back(t.user);
    rows.push_back(num_users + t.pos_item);
    rows.push_back(num_users + t.neg_item);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return rows;
}

LossReport joint_loss(double l_main, double l_ssl_user, double l_ssl_item, double l_reg,
                      double lambda1, double lambda2) {
  LossReport r;
  r.l_main = l_main;
  r.l_ssl_user = l_ssl_user;
  r.l_ssl_item = l_ssl_item;
  r.l_reg = l_reg;
  r.l_total = l_main + lambda1 * (l_ssl_user + l_ssl_item) + lambda2 * l_reg;
  return r;
}

}  // namespace sgl
