#pragma once

#include <string>
#include <vector>

#include "sgl/graph.hpp"
#include "sgl/model.hpp"
#include "sgl/types.hpp"

namespace sgl {

// Top-K items for u over all items not in u's training set, by descending
// score with ties broken by ascending item index. Returns fewer than K items
// when fewer candidates exist.
std::vector<Index> rank_all_items(const FinalRepresentations& reps, Index u,
                                  const InteractionGraph& train, int k);

// Per-user recommendation lists indexed by user; users without a list are
// not evaluated.
using Recommendations = std::vector<std::vector<Index>>;

// Lists for every user that has at least one edge in `target`.
Recommendations recommend_for(const FinalRepresentations& reps, const InteractionGraph& train,
                              const InteractionGraph& target, int k);

struct RankingMetrics {
  double recall = 0.0;
  double ndcg = 0.0;
  Index num_users = 0;  // users with a nonempty test list
};

// Averages over users with a nonempty test list. NDCG uses binary gains and
// an ideal DCG over min(K, |test_u|) hits.
RankingMetrics recall_ndcg_at_k(const Recommendations& recs, const InteractionGraph& test, int k);

struct PopularityGroups {
  std::vector<int> group_of_item;        // 0-based group per item
  std::vector<Index> group_mass;         // training interactions per group
  std::vector<Index> boundary_degree;    // largest item degree in each group, -1 if empty
  int num_groups = 10;
  bool fewer_than_requested = false;     // some group ended up empty
};

// Items sorted by ascending training degree (ties by index), swept greedily
// into groups of equal cumulative interaction mass.
PopularityGroups build_popularity_groups(const InteractionGraph& train, int num_groups = 10);

// Recall@K split by the group of each hit; the entries sum to total recall.
std::vector<double> decomposed_recall(const Recommendations& recs, const InteractionGraph& test,
                                      const PopularityGroups& groups, int k);

struct MetricsReport {
  int k = 20;
  double recall = 0.0;
  double ndcg = 0.0;
  Index num_users = 0;
  std::vector<double> per_group_recall;
  std::vector<Index> group_mass;
};

MetricsReport evaluate(const FinalRepresentations& reps, const InteractionGraph& train,
                       const InteractionGraph& target, int k, const PopularityGroups* groups = nullptr);

void write_metrics_csv(const MetricsReport& report, const std::string& path);
void write_metrics_jsonl(const MetricsReport& report, const std::string& path);
// One row per group: group,mass,recall,share
void write_longtail_csv(const MetricsReport& report, const std::string& path);

}  // namespace sgl
