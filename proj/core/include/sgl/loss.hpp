#pragma once

#include <span>
#include <string>
#include <vector>

#include "sgl/model.hpp"
#include "sgl/types.hpp"

namespace sgl {

struct BprTriple {
  Index user = 0;
  Index pos_item = 0;
  Index neg_item = 0;
};

using BprBatch = std::vector<BprTriple>;

// Which nodes serve as negatives for an InfoNCE anchor.
enum class NegativeScope {
  kFull,         // every node of the anchor's type
  kBatchTyped,   // nodes of the anchor's type that occur in the batch
  kBatchMerged,  // every node in the batch, users and items alike
};

std::string to_string(NegativeScope scope);
NegativeScope parse_negative_scope(const std::string& name);

struct SslConfig {
  double tau = 0.2;
  double lambda1 = 0.1;
  NegativeScope scope = NegativeScope::kBatchTyped;
};

struct LossReport {
  double l_main = 0.0;
  double l_ssl_user = 0.0;
  double l_ssl_item = 0.0;
  double l_reg = 0.0;
  double l_total = 0.0;

  double l_ssl() const { return l_ssl_user + l_ssl_item; }
};

// Gradient rows are dense (M+N) x d with zeros outside the touched rows.
struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;
};

// Mean over the batch of -log sigmoid(y_ui - y_uj), with its gradient with
// respect to the final representations.
LossAndGrad bpr_loss_and_grad(const BprBatch& batch, const FinalRepresentations& reps);

// Numerically stable log(sigmoid(x)) and sigmoid(x).
double log_sigmoid(double x);
double sigmoid(double x);

struct InfoNceResult {
  double loss = 0.0;
  Matrix grad_first;   // with respect to reps1 (anchor view)
  Matrix grad_second;  // with respect to reps2 (contrast view)
};

// Mean over `anchors` of
//   -log exp(s(z'_u, z''_u)/tau) / sum_{v in candidates} exp(s(z'_u, z''_v)/tau)
// with cosine similarity s. Rows are global node ids. Every anchor must also
// appear in `candidates` (it is added implicitly otherwise).
InfoNceResult infonce_loss_and_grad(const Matrix& reps1, const Matrix& reps2,
                                    std::span<const Index> anchors,
                                    std::span<const Index> candidates, double tau);

// Anchor and negative sets for one node type under a scope. Rows are global
// node ids (items offset by num_users).
struct SslNodeSets {
  std::vector<Index> user_anchors;
  std::vector<Index> user_candidates;
  std::vector<Index> item_anchors;
  std::vector<Index> item_candidates;
};

// Under the batch scopes anchors are the distinct users and items touched by
// `batch`; under kFull every user and item is an anchor.
SslNodeSets ssl_node_sets(const BprBatch& batch, Index num_users, Index num_items,
                          NegativeScope scope);

// User-side and item-side InfoNCE between two views.
struct SslLoss {
  double user = 0.0;
  double item = 0.0;
  Matrix grad_first;
  Matrix grad_second;
};

SslLoss ssl_loss_and_grad(const FinalRepresentations& view1, const FinalRepresentations& view2,
                          const SslNodeSets& sets, double tau);

// scale * sum of squared norms of the touched rows; gradient 2 * scale * z.
LossAndGrad l2_regularization(const Matrix& params, std::span<const Index> rows, double scale);

// Distinct rows (global ids) of the users, positive and negative items of a batch.
std::vector<Index> batch_touched_rows(const BprBatch& batch, Index num_users);

LossReport joint_loss(double l_main, double l_ssl_user, double l_ssl_item, double l_reg,
                      double lambda1, double lambda2);

}  // namespace sgl
