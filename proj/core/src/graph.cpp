#include "sgl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>

#include "sgl/error.hpp"
#include "sgl/random.hpp"

namespace sgl {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t k = 0; k < n; ++k) {
    h ^= p[k];
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
std::uint64_t fnv1a_vec(std::uint64_t h, const std::vector<T>& v) {
  return fnv1a(h, v.data(), v.size() * sizeof(T));
}

}  // namespace

InteractionGraph::InteractionGraph(Index num_users, Index num_items, std::vector<Edge> edges)
    : num_users_(num_users), num_items_(num_items), edges_(std::move(edges)) {
  if (num_users < 0 || num_items < 0) throw DimensionMismatchError("negative graph dimensions");
  user_degree_.assign(num_users_, 0);
  item_degree_.assign(num_items_, 0);
  for (const Edge& e : edges_) {
    if (e.user < 0 || e.user >= num_users_ || e.item < 0 || e.item >= num_items_) {
      throw DimensionMismatchError("edge (" + std::to_string(e.user) + ", " +
                                   std::to_string(e.item) + ") out of range");
    }
    ++user_degree_[e.user];
    ++item_degree_[e.item];
  }
  user_ptr_.assign(num_users_ + 1, 0);
  for (Index u = 0; u < num_users_; ++u) user_ptr_[u + 1] = user_ptr_[u] + user_degree_[u];
  user_items_.resize(edges_.size());
  std::vector<Index> fill(user_ptr_.begin(), user_ptr_.end() - 1);
  for (const Edge& e : edges_) user_items_[fill[e.user]++] = e.item;
  for (Index u = 0; u < num_users_; ++u) {
    auto first = user_items_.begin() + user_ptr_[u];
    auto last = user_items_.begin() + user_ptr_[u + 1];
    std::sort(first, last);
    if (std::adjacent_find(first, last) != last) {
      throw Error("duplicate edge for user " + std::to_string(u));
    }
  }
}

std::span<const Index> InteractionGraph::items_of(Index u) const {
  return {user_items_.data() + user_ptr_[u], user_items_.data() + user_ptr_[u + 1]};
}

bool InteractionGraph::contains(Index u, Index i) const {
  if (u < 0 || u >= num_users_) return false;
  auto items = items_of(u);
  return std::binary_search(items.begin(), items.end(), i);
}

NormalizedAdjacency::NormalizedAdjacency(Index num_users, Index num_items,
                                         std::vector<Index> row_ptr, std::vector<Index> col_idx,
                                         std::vector<double> values)
    : num_users_(num_users),
      num_items_(num_items),
      row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
  if (static_cast<Index>(row_ptr_.size()) != rows() + 1 || col_idx_.size() != values_.size() ||
      row_ptr_.back() != static_cast<Index>(values_.size())) {
    throw DimensionMismatchError("inconsistent CSR buffers");
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(h, &num_users_, sizeof(num_users_));
  h = fnv1a(h, &num_items_, sizeof(num_items_));
  h = fnv1a_vec(h, row_ptr_);
  h = fnv1a_vec(h, col_idx_);
  h = fnv1a_vec(h, values_);
  fingerprint_ = h;
}

double NormalizedAdjacency::at(Index row, Index col) const {
  auto first = col_idx_.begin() + row_ptr_[row];
  auto last = col_idx_.begin() + row_ptr_[row + 1];
  auto it = std::lower_bound(first, last, col);
  if (it == last || *it != col) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

void NormalizedAdjacency::multiply(const Matrix& in, Matrix& out) const {
  if (in.rows() != rows()) {
    throw DimensionMismatchError("adjacency has " + std::to_string(rows()) +
                                 " rows, input has " + std::to_string(in.rows()));
  }
  out.setZero(in.rows(), in.cols());
  for (Index r = 0; r < rows(); ++r) {
    auto dst = out.row(r);
    for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      dst.noalias() += values_[k] * in.row(col_idx_[k]);
    }
  }
}

namespace {

NormalizedAdjacency build_from_kept(const InteractionGraph& g,
                                    std::span<const std::uint8_t> edge_keep) {
  const Index m = g.num_users();
  const Index n = g.num_nodes();
  const auto& edges = g.edges();
  std::vector<Index> degree(n, 0);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (!edge_keep.empty() && !edge_keep[k]) continue;
    ++degree[edges[k].user];
    ++degree[m + edges[k].item];
  }
  std::vector<Index> row_ptr(n + 1, 0);
  for (Index r = 0; r < n; ++r) row_ptr[r + 1] = row_ptr[r] + degree[r];
  std::vector<Index> col_idx(row_ptr[n]);
  std::vector<double> values(row_ptr[n]);
  std::vector<Index> fill(row_ptr.begin(), row_ptr.end() - 1);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (!edge_keep.empty() && !edge_keep[k]) continue;
    const Index a = edges[k].user;
    const Index b = m + edges[k].item;
    const double w = 1.0 / std::sqrt(static_cast<double>(degree[a]) * static_cast<double>(degree[b]));
    col_idx[fill[a]] = b;
    values[fill[a]++] = w;
    col_idx[fill[b]] = a;
    values[fill[b]++] = w;
  }
  // Sort each row by column so lookups and traversal order are canonical.
  std::vector<std::pair<Index, double>> scratch;
  for (Index r = 0; r < n; ++r) {
    const Index lo = row_ptr[r];
    const Index hi = row_ptr[r + 1];
    scratch.clear();
    for (Index k = lo; k < hi; ++k) scratch.emplace_back(col_idx[k], values[k]);
    std::sort(scratch.begin(), scratch.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (Index k = lo; k < hi; ++k) {
      col_idx[k] = scratch[k - lo].first;
      values[k] = scratch[k - lo].second;
    }
  }
  return NormalizedAdjacency(g.num_users(), g.num_items(), std::move(row_ptr), std::move(col_idx),
                             std::move(values));
}

void check_ratio(double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw DomainError("dropout ratio must lie in [0, 1), got " + std::to_string(ratio));
  }
}

std::vector<std::uint8_t> sample_keep_mask(std::size_t count, double ratio, Rng& rng) {
  std::vector<std::uint8_t> keep(count);
  for (auto& k : keep) k = rng.bernoulli(1.0 - ratio) ? 1 : 0;
  return keep;
}

}  // namespace

NormalizedAdjacency build_normalized_adjacency(const InteractionGraph& g) {
  if (g.num_nodes() == 0) throw EmptyDatasetError("cannot normalize an empty graph");
  return build_from_kept(g, {});
}

NormalizedAdjacency build_normalized_adjacency(const InteractionGraph& g,
                                               std::span<const std::uint8_t> edge_keep) {
  if (edge_keep.size() != g.edges().size()) {
    throw DimensionMismatchError("edge mask length differs from edge count");
  }
  return build_from_kept(g, edge_keep);
}

std::string to_string(AugmentOperator op) {
  switch (op) {
    case AugmentOperator::kNone: return "none";
    case AugmentOperator::kNodeDropout: return "nd";
    case AugmentOperator::kEdgeDropout: return "ed";
    case AugmentOperator::kRandomWalk: return "rw";
  }
  return "none";
}

AugmentOperator parse_augment_operator(const std::string& name) {
  if (name == "none") return AugmentOperator::kNone;
  if (name == "nd") return AugmentOperator::kNodeDropout;
  if (name == "ed") return AugmentOperator::kEdgeDropout;
  if (name == "rw") return AugmentOperator::kRandomWalk;
  throw DomainError("unknown augmentation operator '" + name + "'");
}

AdjacencyChain AdjacencyChain::shared(std::shared_ptr<const NormalizedAdjacency> adj,
                                      int num_layers) {
  if (!adj) throw Error("null adjacency");
  if (num_layers < 0) throw DomainError("negative layer count");
  AdjacencyChain c;
  c.adjacencies_.push_back(std::move(adj));
  c.num_layers_ = num_layers;
  return c;
}

AdjacencyChain AdjacencyChain::per_layer(
    std::vector<std::shared_ptr<const NormalizedAdjacency>> layers) {
  if (layers.empty()) throw DomainError("per-layer chain needs at least one adjacency");
  for (const auto& a : layers) {
    if (!a) throw Error("null adjacency");
    if (a->rows() != layers.front()->rows()) throw DimensionMismatchError("chain row mismatch");
  }
  AdjacencyChain c;
  c.num_layers_ = static_cast<int>(layers.size());
  c.adjacencies_ = std::move(layers);
  return c;
}

Index AdjacencyChain::rows() const {
  return adjacencies_.empty() ? 0 : adjacencies_.front()->rows();
}

const NormalizedAdjacency& AdjacencyChain::layer(int l) const {
  if (l < 1 || l > num_layers_) throw DomainError("layer index out of range");
  return adjacencies_.size() == 1 ? *adjacencies_.front() : *adjacencies_[l - 1];
}

std::uint64_t AdjacencyChain::fingerprint() const {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(num_layers_));
  for (int l = 1; l <= num_layers_; ++l) h = splitmix64(h ^ layer(l).fingerprint());
  if (num_layers_ == 0 && !adjacencies_.empty()) h = splitmix64(h ^ adjacencies_[0]->fingerprint());
  return h;
}

AdjacencyChain AugmentedView::chain(int num_layers) const {
  if (adjacencies.size() == 1) return AdjacencyChain::shared(adjacencies.front(), num_layers);
  if (static_cast<int>(adjacencies.size()) != num_layers) {
    throw DimensionMismatchError("view has " + std::to_string(adjacencies.size()) +
                                 " layer adjacencies, propagation asks for " +
                                 std::to_string(num_layers));
  }
  return AdjacencyChain::per_layer(adjacencies);
}

AugmentedView node_dropout_from_mask(const InteractionGraph& g,
                                     std::vector<std::uint8_t> node_keep) {
  if (static_cast<Index>(node_keep.size()) != g.num_nodes()) {
    throw DimensionMismatchError("node mask length differs from node count");
  }
  const Index m = g.num_users();
  std::vector<std::uint8_t> edge_keep(g.edges().size());
  for (std::size_t k = 0; k < edge_keep.size(); ++k) {
    const Edge& e = g.edges()[k];
    edge_keep[k] = node_keep[e.user] && node_keep[m + e.item];
  }
  AugmentedView v;
  v.op = AugmentOperator::kNodeDropout;
  auto adj = std::make_shared<const NormalizedAdjacency>(build_from_kept(g, edge_keep));
  v.degenerate = adj->nnz() == 0;
  v.adjacencies.push_back(std::move(adj));
  v.node_mask = std::move(node_keep);
  return v;
}

AugmentedView edge_dropout_from_mask(const InteractionGraph& g,
                                     std::vector<std::uint8_t> edge_keep) {
  AugmentedView v;
  v.op = AugmentOperator::kEdgeDropout;
  auto adj = std::make_shared<const NormalizedAdjacency>(build_normalized_adjacency(g, edge_keep));
  v.degenerate = adj->nnz() == 0;
  v.adjacencies.push_back(std::move(adj));
  v.edge_masks.push_back(std::move(edge_keep));
  return v;
}

AugmentedView random_walk_from_masks(const InteractionGraph& g,
                                     std::vector<std::vector<std::uint8_t>> layer_keep) {
  if (layer_keep.empty()) throw DomainError("random walk needs at least one layer");
  AugmentedView v;
  v.op = AugmentOperator::kRandomWalk;
  for (const auto& keep : layer_keep) {
    auto adj = std::make_shared<const NormalizedAdjacency>(build_normalized_adjacency(g, keep));
    v.degenerate = v.degenerate || adj->nnz() == 0;
    v.adjacencies.push_back(std::move(adj));
  }
  v.edge_masks = std::move(layer_keep);
  return v;
}

AugmentedView node_dropout(const InteractionGraph& g, double ratio, std::uint64_t seed) {
  check_ratio(ratio);
  Rng rng(seed);
  auto v = node_dropout_from_mask(g, sample_keep_mask(static_cast<std::size_t>(g.num_nodes()), ratio, rng));
  v.ratio = ratio;
  return v;
}

AugmentedView edge_dropout(const InteractionGraph& g, double ratio, std::uint64_t seed) {
  check_ratio(ratio);
  Rng rng(seed);
  auto v = edge_dropout_from_mask(g, sample_keep_mask(g.edges().size(), ratio, rng));
  v.ratio = ratio;
  return v;
}

AugmentedView random_walk_views(const InteractionGraph& g, double ratio, int num_layers,
                                std::uint64_t seed) {
  check_ratio(ratio);
  if (num_layers < 1) throw DomainError("random walk needs L >= 1");
  // Layer masks come from one stream in layer order, so layer 1 reproduces
  // the edge-dropout mask drawn from the same seed.
  Rng rng(seed);
  std::vector<std::vector<std::uint8_t>> masks;
  for (int l = 0; l < num_layers; ++l) masks.push_back(sample_keep_mask(g.edges().size(), ratio, rng));
  auto v = random_walk_from_masks(g, std::move(masks));
  v.ratio = ratio;
  return v;
}

ViewPair make_epoch_views(const InteractionGraph& g, AugmentOperator op, double ratio,
                          int num_layers, std::uint64_t seed, std::uint64_t epoch) {
  auto make = [&](std::uint64_t branch) {
    const std::uint64_t s = derive_seed(seed, {stream::kViews, epoch, branch});
    switch (op) {
      case AugmentOperator::kNodeDropout: return node_dropout(g, ratio, s);
      case AugmentOperator::kEdgeDropout: return edge_dropout(g, ratio, s);
      case AugmentOperator::kRandomWalk: return random_walk_views(g, ratio, num_layers, s);
      case AugmentOperator::kNone: break;
    }
    AugmentedView full;
    full.adjacencies.push_back(std::make_shared<const NormalizedAdjacency>(build_normalized_adjacency(g)));
    return full;
  };
  return ViewPair{make(stream::kViewBranch1), make(stream::kViewBranch2)};
}

void write_view_dump(const AugmentedView& view, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "# operator=" << to_string(view.op) << " ratio=" << view.ratio << '\n';
  out << std::setprecision(17);
  for (std::size_t l = 0; l < view.adjacencies.size(); ++l) {
    const auto& a = *view.adjacencies[l];
    for (Index r = 0; r < a.rows(); ++r) {
      for (Index k = a.row_ptr()[r]; k < a.row_ptr()[r + 1]; ++k) {
        const Index c = a.col_idx()[k];
        if (r < c) out << l + 1 << ' ' << r << ' ' << c << ' ' << a.values()[k] << '\n';
      }
    }
  }
  if (!out) throw Error("failed writing " + path);
}

}  // namespace sgl
