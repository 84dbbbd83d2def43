#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sgl/types.hpp"

namespace sgl {

struct Edge {
  Index user = 0;
  Index item = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Bipartite user-item interaction graph over dense indices. Users occupy node
// ids [0, M) and items [M, M+N) whenever the graph is viewed as one node set.
class InteractionGraph {
 public:
  InteractionGraph() = default;
  // Validates index ranges and rejects duplicate edges.
  InteractionGraph(Index num_users, Index num_items, std::vector<Edge> edges);

  Index num_users() const { return num_users_; }
  Index num_items() const { return num_items_; }
  Index num_nodes() const { return num_users_ + num_items_; }
  Index num_edges() const { return static_cast<Index>(edges_.size()); }
  bool empty() const { return edges_.empty(); }

  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Index>& user_degree() const { return user_degree_; }
  const std::vector<Index>& item_degree() const { return item_degree_; }

  // Items of user u in ascending order.
  std::span<const Index> items_of(Index u) const;
  bool contains(Index u, Index i) const;

 private:
  Index num_users_ = 0;
  Index num_items_ = 0;
  std::vector<Edge> edges_;
  std::vector<Index> user_degree_;
  std::vector<Index> item_degree_;
  std::vector<Index> user_ptr_;
  std::vector<Index> user_items_;
};

// Symmetric-normalized adjacency D^-1/2 A D^-1/2 of the (M+N)-node bipartite
// graph in CSR layout. Nonzeros live only in the user-item and item-user
// blocks. Rows of isolated nodes are empty.
class NormalizedAdjacency {
 public:
  NormalizedAdjacency() = default;
  NormalizedAdjacency(Index num_users, Index num_items, std::vector<Index> row_ptr,
                      std::vector<Index> col_idx, std::vector<double> values);

  Index num_users() const { return num_users_; }
  Index num_items() const { return num_items_; }
  Index rows() const { return num_users_ + num_items_; }
  Index nnz() const { return static_cast<Index>(values_.size()); }

  const std::vector<Index>& row_ptr() const { return row_ptr_; }
  const std::vector<Index>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }

  // Entry lookup by binary search within the row; 0 when structurally absent.
  double at(Index row, Index col) const;

  // out = A * in. `out` is resized; rows are processed in order so the
  // result is bitwise reproducible.
  void multiply(const Matrix& in, Matrix& out) const;

  // Content hash over shape, structure and values.
  std::uint64_t fingerprint() const { return fingerprint_; }

 private:
  Index num_users_ = 0;
  Index num_items_ = 0;
  std::vector<Index> row_ptr_{0};
  std::vector<Index> col_idx_;
  std::vector<double> values_;
  std::uint64_t fingerprint_ = 0;
};

NormalizedAdjacency build_normalized_adjacency(const InteractionGraph& g);

// Builds the normalized adjacency of the subgraph formed by the edges whose
// keep flag is set. Normalization uses the subgraph degrees.
NormalizedAdjacency build_normalized_adjacency(const InteractionGraph& g,
                                               std::span<const std::uint8_t> edge_keep);

enum class AugmentOperator { kNone, kNodeDropout, kEdgeDropout, kRandomWalk };

std::string to_string(AugmentOperator op);
AugmentOperator parse_augment_operator(const std::string& name);

// The per-layer adjacencies used by one propagation pass. A chain either
// shares one adjacency across all layers or carries one adjacency per layer.
class AdjacencyChain {
 public:
  AdjacencyChain() = default;
  static AdjacencyChain shared(std::shared_ptr<const NormalizedAdjacency> adj, int num_layers);
  static AdjacencyChain per_layer(std::vector<std::shared_ptr<const NormalizedAdjacency>> layers);

  int num_layers() const { return num_layers_; }
  Index rows() const;
  // Adjacency applied at propagation layer l, 1 <= l <= num_layers().
  const NormalizedAdjacency& layer(int l) const;
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::shared_ptr<const NormalizedAdjacency>> adjacencies_;
  int num_layers_ = 0;
};

// One stochastic view of the graph. ND and ED views hold one adjacency and
// RW views hold one adjacency per layer.
struct AugmentedView {
  AugmentOperator op = AugmentOperator::kNone;
  double ratio = 0.0;
  std::vector<std::shared_ptr<const NormalizedAdjacency>> adjacencies;
  // ND: keep flag per node (users first, then items).
  std::vector<std::uint8_t> node_mask;
  // ED: one mask; RW: one mask per layer. Indexed like g.edges().
  std::vector<std::vector<std::uint8_t>> edge_masks;
  // True when at least one adjacency lost every edge.
  bool degenerate = false;

  // Chain for an L-layer propagation through this view.
  AdjacencyChain chain(int num_layers) const;
};

AugmentedView node_dropout(const InteractionGraph& g, double ratio, std::uint64_t seed);
AugmentedView edge_dropout(const InteractionGraph& g, double ratio, std::uint64_t seed);
AugmentedView random_walk_views(const InteractionGraph& g, double ratio, int num_layers,
                                std::uint64_t seed);

// Deterministic constructions from explicit masks.
AugmentedView node_dropout_from_mask(const InteractionGraph& g, std::vector<std::uint8_t> node_keep);
AugmentedView edge_dropout_from_mask(const InteractionGraph& g, std::vector<std::uint8_t> edge_keep);
AugmentedView random_walk_from_masks(const InteractionGraph& g,
                                     std::vector<std::vector<std::uint8_t>> layer_keep);

struct ViewPair {
  AugmentedView first;
  AugmentedView second;
};

// Two independent views for one epoch, seeded from (seed, epoch, branch).
ViewPair make_epoch_views(const InteractionGraph& g, AugmentOperator op, double ratio,
                          int num_layers, std::uint64_t seed, std::uint64_t epoch);

// Debug dump: one line per surviving nonzero, "layer row col value".
void write_view_dump(const AugmentedView& view, const std::string& path);

}  // namespace sgl
