#include "sgl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "sgl/error.hpp"

namespace sgl {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<Index> rank_all_items(const FinalRepresentations& reps, Index u,
                                  const InteractionGraph& train, int k) {
  const Index n = reps.z.rows() - reps.num_users;
  const auto excluded = train.items_of(u);
  std::vector<std::pair<double, Index>> cand;
  cand.reserve(static_cast<std::size_t>(n));
  const Vector scores = reps.z.bottomRows(n) * reps.user(u).transpose();
  std::size_t e = 0;
  for (Index i = 0; i < n; ++i) {
    while (e < excluded.size() && excluded[e] < i) ++e;
    if (e < excluded.size() && excluded[e] == i) continue;
    cand.emplace_back(scores(i), i);
  }
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), cand.size());
  auto better = [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), better);
  std::vector<Index> top(take);
  for (std::size_t r = 0; r < take; ++r) top[r] = cand[r].second;
  return top;
}

Recommendations recommend_for(const FinalRepresentations& reps, const InteractionGraph& train,
                              const InteractionGraph& target, int k) {
  Recommendations recs(static_cast<std::size_t>(target.num_users()));
  for (Index u = 0; u < target.num_users(); ++u) {
    if (target.items_of(u).empty()) continue;
    recs[u] = rank_all_items(reps, u, train, k);
  }
  return recs;
}

RankingMetrics recall_ndcg_at_k(const Recommendations& recs, const InteractionGraph& test, int k) {
  RankingMetrics m;
  double recall_sum = 0.0;
  double ndcg_sum = 0.0;
  for (Index u = 0; u < test.num_users(); ++u) {
    const auto truth = test.items_of(u);
    if (truth.empty()) continue;
    ++m.num_users;
    if (u >= static_cast<Index>(recs.size())) continue;
    const auto& list = recs[u];
    const auto depth = std::min<std::size_t>(list.size(), static_cast<std::size_t>(k));
    double hits = 0.0;
    double dcg = 0.0;
    for (std::size_t r = 0; r < depth; ++r) {
      if (std::binary_search(truth.begin(), truth.end(), list[r])) {
        hits += 1.0;
        dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
      }
    }
    double idcg = 0.0;
    const auto ideal = std::min<std::size_t>(truth.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    recall_sum += hits / static_cast<double>(truth.size());
    ndcg_sum += idcg > 0.0 ? dcg / idcg : 0.0;
  }
  if (m.num_users > 0) {
    m.recall = recall_sum / static_cast<double>(m.num_users);
    m.ndcg = ndcg_sum / static_cast<double>(m.num_users);
  }
  return m;
}

PopularityGroups build_popularity_groups(const InteractionGraph& train, int num_groups) {
  if (train.empty()) throw EmptyDatasetError("popularity groups need a nonempty training graph");
  if (num_groups < 1) throw DomainError("need at least one popularity group");
  const Index n = train.num_items();
  const auto& deg = train.item_degree();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return deg[a] < deg[b]; });

  PopularityGroups groups;
  groups.num_groups = num_groups;
  groups.group_of_item.assign(static_cast<std::size_t>(n), 0);
  groups.group_mass.assign(num_groups, 0);
  groups.boundary_degree.assign(num_groups, -1);
  const Index total = train.num_edges();
  Index cumulative = 0;
  int g = 0;
  for (Index item : order) {
    groups.group_of_item[item] = g;
    groups.group_mass[g] += deg[item];
    groups.boundary_degree[g] = std::max(groups.boundary_degree[g], deg[item]);
    cumulative += deg[item];
    // Advance once the cumulative mass reaches (g+1)/G of the total.
    while (g < num_groups - 1 && cumulative * num_groups >= static_cast<Index>(g + 1) * total) ++g;
  }
  groups.fewer_than_requested =
      std::any_of(groups.boundary_degree.begin(), groups.boundary_degree.end(),
                  [](Index b) { return b < 0; });
  return groups;
}

std::vector<double> decomposed_recall(const Recommendations& recs, const InteractionGraph& test,
                                      const PopularityGroups& groups, int k) {
  std::vector<double> per_group(groups.num_groups, 0.0);
  Index users = 0;
  for (Index u = 0; u < test.num_users(); ++u) {
    const auto truth = test.items_of(u);
    if (truth.empty()) continue;
    ++users;
    if (u >= static_cast<Index>(recs.size())) continue;
    const auto& list = recs[u];
    const auto depth = std::min<std::size_t>(list.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < depth; ++r) {
      if (std::binary_search(truth.begin(), truth.end(), list[r])) {
        per_group[groups.group_of_item[list[r]]] += 1.0 / static_cast<double>(truth.size());
      }
    }
  }
  if (users > 0) {
    for (double& v : per_group) v /= static_cast<double>(users);
  }
  return per_group;
}

MetricsReport evaluate(const FinalRepresentations& reps, const InteractionGraph& train,
                       const InteractionGraph& target, int k, const PopularityGroups* groups) {
  const auto recs = recommend_for(reps, train, target, k);
  const auto m = recall_ndcg_at_k(recs, target, k);
  MetricsReport report;
  report.k = k;
  report.recall = m.recall;
  report.ndcg = m.ndcg;
  report.num_users = m.num_users;
  if (groups != nullptr) {
    report.per_group_recall = decomposed_recall(recs, target, *groups, k);
    report.group_mass = groups->group_mass;
  }
  return report;
}

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "k,users,recall,ndcg\n";
  out << report.k << ',' << report.num_users << ',' << fmt(report.recall) << ',' << fmt(report.ndcg)
      << '\n';
  if (!out) throw Error("failed writing " + path);
}

void write_metrics_jsonl(const MetricsReport& report, const std::string& path) {
  nlohmann::ordered_json rec;
  rec["k"] = report.k;
  rec["users"] = report.num_users;
  rec["recall"] = report.recall;
  rec["ndcg"] = report.ndcg;
  if (!report.per_group_recall.empty()) {
    rec["per_group_recall"] = report.per_group_recall;
    rec["group_mass"] = report.group_mass;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << rec.dump() << '\n';
  if (!out) throw Error("failed writing " + path);
}

void write_longtail_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "group,mass,recall,share\n";
  for (std::size_t g = 0; g < report.per_group_recall.size(); ++g) {
    const double share = report.recall > 0.0 ? report.per_group_recall[g] / report.recall : 0.0;
    out << g + 1 << ',' << (g < report.group_mass.size() ? report.group_mass[g] : 0) << ','
        << fmt(report.per_group_recall[g]) << ',' << fmt(share) << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

}  // namespace sgl
