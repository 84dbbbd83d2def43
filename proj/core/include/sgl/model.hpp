#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgl/graph.hpp"
#include "sgl/types.hpp"

namespace sgl {

// Trainable layer-0 embeddings, users in rows [0, M) and items in [M, M+N).
struct EmbeddingTable {
  Index num_users = 0;
  Index num_items = 0;
  Matrix values;

  Index dim() const { return values.cols(); }
  Index rows() const { return values.rows(); }
};

struct LayerStack {
  std::vector<Matrix> layers;  // Z(0) .. Z(L)
  std::uint64_t chain_fingerprint = 0;

  int num_layers() const { return static_cast<int>(layers.size()) - 1; }
};

struct FinalRepresentations {
  Matrix z;
  Index num_users = 0;

  auto user(Index u) const { return z.row(u); }
  auto item(Index i) const { return z.row(num_users + i); }
};

// layers[l] = A_l * layers[l-1], layers[0] = z0.
LayerStack propagate(const AdjacencyChain& chain, const Matrix& z0);

// Uniform layer mean (1/(L+1)) * sum_l Z(l).
FinalRepresentations readout(const LayerStack& stack, Index num_users);

// propagate followed by readout.
FinalRepresentations forward(const AdjacencyChain& chain, const EmbeddingTable& table);

double score(const FinalRepresentations& reps, Index u, Index i);

// Reverse mode of readout(propagate(chain, z0)). Every adjacency is
// symmetric, so the adjoint of a layer is the layer itself.
Matrix backprop_to_embeddings(const Matrix& grad_final, const AdjacencyChain& chain);

// Same, but first checks that `forward_stack` was produced by `chain`.
Matrix backprop_to_embeddings(const Matrix& grad_final, const AdjacencyChain& chain,
                              const LayerStack& forward_stack);

// Binary checkpoint layout (little-endian):
//   8 bytes  magic "SGLCKPT1"
//   int64    num_users, num_items, dim, epoch
//   double   values, row-major, (num_users + num_items) * dim entries
void save_checkpoint(const EmbeddingTable& table, std::int64_t epoch, const std::string& path);
EmbeddingTable load_checkpoint(const std::string& path, std::int64_t* epoch = nullptr);

}  // namespace sgl
