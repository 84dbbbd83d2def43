#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sgl/graph.hpp"
#include "sgl/types.hpp"

namespace sgl {

enum class InteractionFormat {
  kPairPerLine,    // "user item"
  kUserAdjacency,  // "user item1 item2 ..."
};

InteractionFormat parse_interaction_format(const std::string& name);

struct RawInteraction {
  std::string user;
  std::string item;

  friend bool operator==(const RawInteraction&, const RawInteraction&) = default;
};

// Deduplicated interaction records keyed by external ids, in first-seen order.
struct RawInteractions {
  std::vector<RawInteraction> records;
  std::string source_path;

  std::size_t num_users() const;
  std::size_t num_items() const;
  std::size_t num_interactions() const { return records.size(); }
};

RawInteractions load_interactions(const std::string& path, InteractionFormat format);

// Drops duplicate (user, item) pairs, keeping the first occurrence.
void deduplicate(RawInteractions& raw);

// Maximal sub-dataset in which every user and item has at least k
// interactions.
RawInteractions apply_k_core(const RawInteractions& raw, int k);

struct IdMap {
  std::vector<std::string> external;
  std::unordered_map<std::string, Index> dense;

  Index intern(const std::string& id);
  Index size() const { return static_cast<Index>(external.size()); }
};

struct SplitRatios {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
};

struct DatasetSplit {
  InteractionGraph train;
  InteractionGraph validation;
  InteractionGraph test;
  IdMap users;
  IdMap items;
  // Aligned with train.edges(); set for edges added by inject_noise.
  std::vector<std::uint8_t> train_noise;

  Index num_noise_edges() const;
};

// Per-user random partition by the given ratios. Users with fewer than three
// interactions keep them all in train. Validation/test edges on items absent
// from train are dropped, then ids are densely re-indexed.
DatasetSplit split_dataset(const RawInteractions& raw, const SplitRatios& ratios,
                           std::uint64_t seed);

// Per-user partition sizes for n interactions: {train, validation, test}.
std::array<Index, 3> partition_sizes(Index n, const SplitRatios& ratios);

// Adds ceil(ratio * |train|) uniformly drawn user-item pairs that are not
// edges of train, validation or test. Validation and test are untouched.
DatasetSplit inject_noise(const DatasetSplit& split, double ratio, std::uint64_t seed);

// Line-delimited JSON: a header record followed by one record per edge.
void write_split_manifest(const DatasetSplit& split, const std::string& path);
DatasetSplit read_split_manifest(const std::string& path);

}  // namespace sgl
