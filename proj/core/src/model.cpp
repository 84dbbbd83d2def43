#include "sgl/model.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "sgl/error.hpp"

namespace sgl {

LayerStack propagate(const AdjacencyChain& chain, const Matrix& z0) {
  if (chain.num_layers() > 0 && chain.rows() != z0.rows()) {
    throw DimensionMismatchError("adjacency dimension " + std::to_string(chain.rows()) +
                                 " does not match embedding rows " + std::to_string(z0.rows()));
  }
  LayerStack stack;
  stack.chain_fingerprint = chain.fingerprint();
  stack.layers.reserve(chain.num_layers() + 1);
  stack.layers.push_back(z0);
  for (int l = 1; l <= chain.num_layers(); ++l) {
    Matrix next;
    chain.layer(l).multiply(stack.layers.back(), next);
    stack.layers.push_back(std::move(next));
  }
  return stack;
}

FinalRepresentations readout(const LayerStack& stack, Index num_users) {
  if (stack.layers.empty()) throw DimensionMismatchError("empty layer stack");
  FinalRepresentations reps;
  reps.num_users = num_users;
  reps.z = stack.layers.front();
  for (std::size_t l = 1; l < stack.layers.size(); ++l) reps.z += stack.layers[l];
  reps.z /= static_cast<double>(stack.layers.size());
  return reps;
}

FinalRepresentations forward(const AdjacencyChain& chain, const EmbeddingTable& table) {
  return readout(propagate(chain, table.values), table.num_users);
}

double score(const FinalRepresentations& reps, Index u, Index i) {
  return reps.user(u).dot(reps.item(i));
}

Matrix backprop_to_embeddings(const Matrix& grad_final, const AdjacencyChain& chain) {
  const int num_layers = chain.num_layers();
  if (num_layers > 0 && chain.rows() != grad_final.rows()) {
    throw DimensionMismatchError("gradient rows do not match adjacency dimension");
  }
  // Z = c * sum_l A_l...A_1 Z0 with c = 1/(L+1). Horner form from the top:
  // G_L = c*G, G_{l-1} = c*G + A_l^T G_l, result G_0.
  const double c = 1.0 / static_cast<double>(num_layers + 1);
  Matrix acc = c * grad_final;
  Matrix tmp;
  for (int l = num_layers; l >= 1; --l) {
    chain.layer(l).multiply(acc, tmp);
    acc = tmp;
    acc.noalias() += c * grad_final;
  }
  return acc;
}

Matrix backprop_to_embeddings(const Matrix& grad_final, const AdjacencyChain& chain,
                              const LayerStack& forward_stack) {
  if (forward_stack.chain_fingerprint != chain.fingerprint() ||
      forward_stack.num_layers() != chain.num_layers()) {
    throw ChainMismatchError("backward pass uses a different adjacency chain than the forward pass");
  }
  return backprop_to_embeddings(grad_final, chain);
}

namespace {
constexpr std::array<char, 8> kMagic = {'S', 'G', 'L', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(const EmbeddingTable& table, std::int64_t epoch, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.write(kMagic.data(), kMagic.size());
  const std::int64_t header[4] = {table.num_users, table.num_items, table.dim(), epoch};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(table.values.data()),
            static_cast<std::streamsize>(table.values.size() * sizeof(double)));
  if (!out) throw Error("failed writing checkpoint " + path);
}

EmbeddingTable load_checkpoint(const std::string& path, std::int64_t* epoch) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error(path + " is not an embedding checkpoint");
  std::int64_t header[4];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || header[0] < 0 || header[1] < 0 || header[2] < 1) {
    throw Error("corrupt checkpoint header in " + path);
  }
  EmbeddingTable table;
  table.num_users = header[0];
  table.num_items = header[1];
  table.values.resize(header[0] + header[1], header[2]);
  in.read(reinterpret_cast<char*>(table.values.data()),
          static_cast<std::streamsize>(table.values.size() * sizeof(double)));
  if (!in) throw Error("truncated checkpoint " + path);
  if (epoch != nullptr) *epoch = header[3];
  return table;
}

}  // namespace sgl
