#include "sgl/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "sgl/error.hpp"
#include "sgl/random.hpp"

namespace sgl {

namespace {

struct PairHash {
  std::size_t operator()(const std::pair<Index, Index>& p) const {
    return static_cast<std::size_t>(splitmix64(static_cast<std::uint64_t>(p.first) * 0x9e3779b97f4a7c15ULL ^
                                               static_cast<std::uint64_t>(p.second)));
  }
};

struct StringPairHash {
  std::size_t operator()(const std::pair<std::string, std::string>& p) const {
    const std::size_t a = std::hash<std::string>{}(p.first);
    const std::size_t b = std::hash<std::string>{}(p.second);
    return a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  }
};

}  // namespace

InteractionFormat parse_interaction_format(const std::string& name) {
  if (name == "pair" || name == "pair-per-line") return InteractionFormat::kPairPerLine;
  if (name == "adjacency" || name == "user-adjacency-line") return InteractionFormat::kUserAdjacency;
  throw DomainError("unknown interaction format '" + name + "'");
}

std::size_t RawInteractions::num_users() const {
  std::unordered_set<std::string> s;
  for (const auto& r : records) s.insert(r.user);
  return s.size();
}

std::size_t RawInteractions::num_items() const {
  std::unordered_set<std::string> s;
  for (const auto& r : records) s.insert(r.item);
  return s.size();
}

void deduplicate(RawInteractions& raw) {
  std::unordered_set<std::pair<std::string, std::string>, StringPairHash> seen;
  std::vector<RawInteraction> kept;
  kept.reserve(raw.records.size());
  for (auto& r : raw.records) {
    if (seen.emplace(r.user, r.item).second) kept.push_back(std::move(r));
  }
  raw.records = std::move(kept);
}

RawInteractions load_interactions(const std::string& path, InteractionFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open interaction file " + path);
  RawInteractions raw;
  raw.source_path = path;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> tokens;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    tokens.clear();
    for (std::string tok; ss >> tok;) tokens.push_back(std::move(tok));
    if (tokens.empty()) continue;
    if (format == InteractionFormat::kPairPerLine) {
      if (tokens.size() != 2) {
        throw ParseError(path, line_no,
                         "expected 'user item', found " + std::to_string(tokens.size()) + " fields");
      }
      raw.records.push_back({tokens[0], tokens[1]});
    } else {
      for (std::size_t k = 1; k < tokens.size(); ++k) raw.records.push_back({tokens[0], tokens[k]});
    }
  }
  if (in.bad()) throw Error("read error on " + path);
  if (raw.records.empty()) throw EmptyDatasetError("no interactions in " + path);
  deduplicate(raw);
  return raw;
}

RawInteractions apply_k_core(const RawInteractions& raw, int k) {
  if (k < 1) throw DomainError("k-core requires k >= 1");
  IdMap users;
  IdMap items;
  const std::size_t n = raw.records.size();
  std::vector<Index> ru(n);
  std::vector<Index> ri(n);
  for (std::size_t e = 0; e < n; ++e) {
    ru[e] = users.intern(raw.records[e].user);
    ri[e] = items.intern(raw.records[e].item);
  }
  const Index m = users.size();
  // Node ids: users [0, m), items [m, m + |items|).
  const Index total = m + items.size();
  std::vector<Index> degree(total, 0);
  std::vector<std::vector<std::size_t>> incident(total);
  for (std::size_t e = 0; e < n; ++e) {
    ++degree[ru[e]];
    ++degree[m + ri[e]];
    incident[ru[e]].push_back(e);
    incident[m + ri[e]].push_back(e);
  }
  std::vector<std::uint8_t> edge_alive(n, 1);
  std::vector<std::uint8_t> removed(total, 0);
  std::deque<Index> queue;
  for (Index v = 0; v < total; ++v) {
    if (degree[v] < k) {
      removed[v] = 1;
      queue.push_back(v);
    }
  }
  while (!queue.empty()) {
    const Index v = queue.front();
    queue.pop_front();
    for (std::size_t e : incident[v]) {
      if (!edge_alive[e]) continue;
      edge_alive[e] = 0;
      const Index other = v < m ? m + ri[e] : ru[e];
      --degree[v];
      if (--degree[other] < k && !removed[other]) {
        removed[other] = 1;
        queue.push_back(other);
      }
    }
  }
  RawInteractions out;
  out.source_path = raw.source_path;
  for (std::size_t e = 0; e < n; ++e) {
    if (edge_alive[e]) out.records.push_back(raw.records[e]);
  }
  if (out.records.empty()) {
    throw EmptyDatasetError(std::to_string(k) + "-core of " +
                            (raw.source_path.empty() ? std::string("dataset") : raw.source_path) +
                            " is empty");
  }
  return out;
}

Index IdMap::intern(const std::string& id) {
  auto [it, inserted] = dense.emplace(id, static_cast<Index>(external.size()));
  if (inserted) external.push_back(id);
  return it->second;
}

Index DatasetSplit::num_noise_edges() const {
  return static_cast<Index>(std::count(train_noise.begin(), train_noise.end(), std::uint8_t{1}));
}

std::array<Index, 3> partition_sizes(Index n, const SplitRatios& ratios) {
  if (n < 3) return {n, 0, 0};
  Index valid = std::llround(static_cast<double>(n) * ratios.validation);
  Index test = std::llround(static_cast<double>(n) * ratios.test);
  while (n - valid - test < 1) {
    if (test > 0) {
      --test;
    } else {
      --valid;
    }
  }
  return {n - valid - test, valid, test};
}

DatasetSplit split_dataset(const RawInteractions& raw, const SplitRatios& ratios,
                           std::uint64_t seed) {
  if (ratios.train <= 0.0 || ratios.validation < 0.0 || ratios.test < 0.0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw DomainError("split ratios must be non-negative with positive train share and sum to 1");
  }
  if (raw.records.empty()) throw EmptyDatasetError("cannot split an empty dataset");

  // Group interactions per user in first-seen order.
  IdMap raw_users;
  std::vector<std::vector<std::size_t>> per_user;
  for (std::size_t e = 0; e < raw.records.size(); ++e) {
    const Index u = raw_users.intern(raw.records[e].user);
    if (u == static_cast<Index>(per_user.size())) per_user.emplace_back();
    per_user[u].push_back(e);
  }

  enum Part : std::uint8_t { kTrain, kValid, kTest };
  std::vector<std::uint8_t> part(raw.records.size(), kTrain);
  Rng rng(derive_seed(seed, {stream::kSplit}));
  for (auto& recs : per_user) {
    for (std::size_t k = recs.size(); k > 1; --k) {
      std::swap(recs[k - 1], recs[rng.below(k)]);
    }
    const auto sizes = partition_sizes(static_cast<Index>(recs.size()), ratios);
    for (std::size_t k = 0; k < recs.size(); ++k) {
      const auto pos = static_cast<Index>(k);
      part[recs[k]] = pos < sizes[0] ? kTrain : (pos < sizes[0] + sizes[1] ? kValid : kTest);
    }
  }

  std::unordered_set<std::string> train_items;
  for (std::size_t e = 0; e < raw.records.size(); ++e) {
    if (part[e] == kTrain) train_items.insert(raw.records[e].item);
  }

  DatasetSplit split;
  for (std::size_t e = 0; e < raw.records.size(); ++e) {
    if (part[e] == kTrain) {
      split.users.intern(raw.records[e].user);
      split.items.intern(raw.records[e].item);
    }
  }
  std::vector<Edge> parts[3];
  for (std::size_t e = 0; e < raw.records.size(); ++e) {
    const auto& r = raw.records[e];
    if (part[e] != kTrain && !train_items.contains(r.item)) continue;
    parts[part[e]].push_back({split.users.dense.at(r.user), split.items.dense.at(r.item)});
  }
  for (auto& p : parts) std::sort(p.begin(), p.end());
  const Index m = split.users.size();
  const Index n = split.items.size();
  split.train = InteractionGraph(m, n, std::move(parts[kTrain]));
  split.validation = InteractionGraph(m, n, std::move(parts[kValid]));
  split.test = InteractionGraph(m, n, std::move(parts[kTest]));
  split.train_noise.assign(split.train.edges().size(), 0);
  return split;
}

DatasetSplit inject_noise(const DatasetSplit& split, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw DomainError("noise ratio must lie in [0, 1]");
  DatasetSplit out = split;
  const Index base = split.train.num_edges();
  const auto count = static_cast<Index>(std::ceil(ratio * static_cast<double>(base) - 1e-9));
  if (count == 0) return out;

  const Index m = split.train.num_users();
  const Index n = split.train.num_items();
  const Index occupied = base + split.validation.num_edges() + split.test.num_edges();
  if (m * n - occupied < count) {
    throw SamplingExhaustedError("graph too dense to inject " + std::to_string(count) +
                                 " noise edges");
  }
  std::unordered_set<std::pair<Index, Index>, PairHash> added;
  std::vector<Edge> edges = split.train.edges();
  std::vector<std::uint8_t> flags = split.train_noise;
  if (flags.size() != edges.size()) flags.assign(edges.size(), 0);
  Rng rng(derive_seed(seed, {stream::kNoise}));
  const Index max_attempts = 200 * count + 10000;
  Index attempts = 0;
  while (static_cast<Index>(added.size()) < count) {
    if (++attempts > max_attempts) {
      throw SamplingExhaustedError("noise sampling exhausted after " + std::to_string(max_attempts) +
                                   " attempts");
    }
    const auto u = static_cast<Index>(rng.below(static_cast<std::uint64_t>(m)));
    const auto i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    if (split.train.contains(u, i) || split.validation.contains(u, i) || split.test.contains(u, i)) {
      continue;
    }
    if (!added.emplace(u, i).second) continue;
    edges.push_back({u, i});
    flags.push_back(1);
  }
  out.train = InteractionGraph(m, n, std::move(edges));
  out.train_noise = std::move(flags);
  return out;
}

void write_split_manifest(const DatasetSplit& split, const std::string& path) {
  using nlohmann::ordered_json;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  ordered_json header;
  header["kind"] = "header";
  header["num_users"] = split.train.num_users();
  header["num_items"] = split.train.num_items();
  header["num_train"] = split.train.num_edges();
  header["num_validation"] = split.validation.num_edges();
  header["num_test"] = split.test.num_edges();
  header["num_noise"] = split.num_noise_edges();
  header["user_ids"] = split.users.external;
  header["item_ids"] = split.items.external;
  out << header.dump() << '\n';
  auto emit = [&](const InteractionGraph& g, const char* tag, const std::vector<std::uint8_t>* noise) {
    for (std::size_t k = 0; k < g.edges().size(); ++k) {
      ordered_json rec;
      rec["user"] = g.edges()[k].user;
      rec["item"] = g.edges()[k].item;
      rec["part"] = tag;
      rec["noise"] = noise != nullptr && k < noise->size() && (*noise)[k] != 0;
      out << rec.dump() << '\n';
    }
  };
  emit(split.train, "train", &split.train_noise);
  emit(split.validation, "valid", nullptr);
  emit(split.test, "test", nullptr);
  if (!out) throw Error("failed writing " + path);
}

DatasetSplit read_split_manifest(const std::string& path) {
  using nlohmann::json;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open split manifest " + path);
  std::string line;
  std::size_t line_no = 0;
  DatasetSplit split;
  Index m = -1;
  Index n = -1;
  std::vector<Edge> parts[3];
  std::vector<std::uint8_t> noise;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path, line_no, e.what());
    }
    try {
      if (rec.contains("kind") && rec["kind"] == "header") {
        m = rec.at("num_users").get<Index>();
        n = rec.at("num_items").get<Index>();
        for (const auto& id : rec.value("user_ids", json::array())) split.users.intern(id.get<std::string>());
        for (const auto& id : rec.value("item_ids", json::array())) split.items.intern(id.get<std::string>());
        continue;
      }
      const Edge e{rec.at("user").get<Index>(), rec.at("item").get<Index>()};
      const auto tag = rec.at("part").get<std::string>();
      if (tag == "train") {
        parts[0].push_back(e);
        noise.push_back(rec.value("noise", false) ? 1 : 0);
      } else if (tag == "valid") {
        parts[1].push_back(e);
      } else if (tag == "test") {
        parts[2].push_back(e);
      } else {
        throw ParseError(path, line_no, "unknown partition tag '" + tag + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError(path, line_no, e.what());
    }
  }
  if (m < 0) throw ParseError(path, 1, "missing header record");
  split.train = InteractionGraph(m, n, std::move(parts[0]));
  split.validation = InteractionGraph(m, n, std::move(parts[1]));
  split.test = InteractionGraph(m, n, std::move(parts[2]));
  split.train_noise = std::move(noise);
  return split;
}

}  // namespace sgl
