#include "sgl/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sgl/error.hpp"
#include "sgl/eval.hpp"

namespace sgl {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kJoint: return "joint";
    case TrainMode::kPretrainFinetune: return "pretrain";
    case TrainMode::kBaseline: return "baseline";
  }
  return "joint";
}

TrainMode parse_train_mode(const std::string& name) {
  if (name == "joint") return TrainMode::kJoint;
  if (name == "pretrain" || name == "pretrain-finetune") return TrainMode::kPretrainFinetune;
  if (name == "baseline") return TrainMode::kBaseline;
  throw DomainError("unknown training mode '" + name + "'");
}

TrainConfig parse_train_config(const std::string& json_text, TrainConfig c) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid config JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "layers") c.layers = value.get<int>();
      else if (key == "dim") c.dim = value.get<int>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "max_epochs") c.max_epochs = value.get<int>();
      else if (key == "lambda1") c.lambda1 = value.get<double>();
      else if (key == "lambda2") c.lambda2 = value.get<double>();
      else if (key == "tau") c.tau = value.get<double>();
      else if (key == "rho") c.rho = value.get<double>();
      else if (key == "operator") c.op = parse_augment_operator(value.get<std::string>());
      else if (key == "neg_scope") c.scope = parse_negative_scope(value.get<std::string>());
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "early_stop_patience") c.early_stop_patience = value.get<int>();
      else if (key == "eval_every") c.eval_every = value.get<int>();
      else if (key == "top_k") c.top_k = value.get<int>();
      else if (key == "mode") c.mode = parse_train_mode(value.get<std::string>());
      else if (key == "pretrain_epochs") c.pretrain_epochs = value.get<int>();
      else if (key == "record_timing") c.record_timing = value.get<bool>();
      else throw Error("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(std::string("bad config value: ") + e.what());
  }
  return c;
}

TrainConfig load_train_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str(), base);
}

std::string train_config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["layers"] = c.layers;
  j["dim"] = c.dim;
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["tau"] = c.tau;
  j["rho"] = c.rho;
  j["operator"] = to_string(c.op);
  j["neg_scope"] = to_string(c.scope);
  j["seed"] = c.seed;
  j["early_stop_patience"] = c.early_stop_patience;
  j["eval_every"] = c.eval_every;
  j["top_k"] = c.top_k;
  j["mode"] = to_string(c.mode);
  j["pretrain_epochs"] = c.pretrain_epochs;
  j["record_timing"] = c.record_timing;
  return j.dump(2);
}

EmbeddingTable init_embeddings(Index num_users, Index num_items, int dim, std::uint64_t seed) {
  if (dim < 1) throw DomainError("embedding size must be positive");
  EmbeddingTable t;
  t.num_users = num_users;
  t.num_items = num_items;
  t.values.resize(num_users + num_items, dim);
  const double bound = std::sqrt(6.0 / (2.0 * dim));
  Rng rng(derive_seed(seed, {stream::kInit}));
  for (Index r = 0; r < t.values.rows(); ++r) {
    for (Index c = 0; c < dim; ++c) t.values(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
  }
  return t;
}

BprBatch sample_bpr_batch(const InteractionGraph& train, int batch_size, Rng& rng) {
  if (train.empty()) throw EmptyDatasetError("cannot sample from an empty training graph");
  constexpr int kMaxRetries = 1000;
  const auto num_edges = static_cast<std::uint64_t>(train.num_edges());
  const auto num_items = static_cast<std::uint64_t>(train.num_items());
  BprBatch batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) {
    const Edge& e = train.edges()[rng.below(num_edges)];
    if (train.user_degree()[e.user] >= train.num_items()) {
      throw SamplingExhaustedError("user " + std::to_string(e.user) + " interacted with every item");
    }
    Index neg = -1;
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
      const auto j = static_cast<Index>(rng.below(num_items));
      if (!train.contains(e.user, j)) {
        neg = j;
        break;
      }
    }
    if (neg < 0) {
      throw SamplingExhaustedError("no negative item found for user " + std::to_string(e.user) +
                                   " after " + std::to_string(kMaxRetries) + " draws");
    }
    batch.push_back({e.user, e.item, neg});
  }
  return batch;
}

BatchObjective batch_objective(const EmbeddingTable& table, const AdjacencyChain& full,
                               const AdjacencyChain* view1, const AdjacencyChain* view2,
                               const BprBatch& batch, const ObjectiveWeights& w) {
  BatchObjective out;
  out.grad_z0 = Matrix::Zero(table.values.rows(), table.values.cols());
  double l_main = 0.0;
  double l_reg = 0.0;
  double l_user = 0.0;
  double l_item = 0.0;

  if (w.use_main) {
    const auto stack = propagate(full, table.values);
    const auto reps = readout(stack, table.num_users);
    const auto bpr = bpr_loss_and_grad(batch, reps);
    l_main = bpr.loss;
    out.grad_z0 += backprop_to_embeddings(bpr.grad, full, stack);
  }
  if (w.lambda2 > 0.0 && !batch.empty()) {
    const auto rows = batch_touched_rows(batch, table.num_users);
    const auto reg = l2_regularization(table.values, rows, 1.0 / static_cast<double>(batch.size()));
    l_reg = reg.loss;
    out.grad_z0 += w.lambda2 * reg.grad;
  }
  if (view1 != nullptr && view2 != nullptr && w.lambda1 > 0.0) {
    const auto stack1 = propagate(*view1, table.values);
    const auto stack2 = propagate(*view2, table.values);
    const auto reps1 = readout(stack1, table.num_users);
    const auto reps2 = readout(stack2, table.num_users);
    const auto sets = ssl_node_sets(batch, table.num_users, table.num_items, w.scope);
    const auto ssl = ssl_loss_and_grad(reps1, reps2, sets, w.tau);
    l_user = ssl.user;
    l_item = ssl.item;
    out.grad_z0 += w.lambda1 * backprop_to_embeddings(ssl.grad_first, *view1, stack1);
    out.grad_z0 += w.lambda1 * backprop_to_embeddings(ssl.grad_second, *view2, stack2);
  }
  out.report = joint_loss(l_main, l_user, l_item, l_reg, w.lambda1, w.lambda2);
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ObjectiveWeights joint_weights(const TrainConfig& c) {
  ObjectiveWeights w;
  w.use_main = true;
  w.lambda1 = c.uses_ssl() ? c.lambda1 : 0.0;
  w.lambda2 = c.lambda2;
  w.tau = c.tau;
  w.scope = c.scope;
  return w;
}

}  // namespace

void write_curve_csv(const TrainingCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "epoch,l_main,l_ssl,l_reg,l_total,seconds,recall,ndcg\n";
  for (const auto& r : curve.records) {
    out << r.epoch << ',' << fmt(r.l_main) << ',' << fmt(r.l_ssl) << ',' << fmt(r.l_reg) << ','
        << fmt(r.l_total) << ',' << fmt(r.seconds) << ',' << (r.recall ? fmt(*r.recall) : "") << ','
        << (r.ndcg ? fmt(*r.ndcg) : "") << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

void write_curve_jsonl(const TrainingCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  for (const auto& r : curve.records) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["l_main"] = r.l_main;
    j["l_ssl"] = r.l_ssl;
    j["l_reg"] = r.l_reg;
    j["l_total"] = r.l_total;
    j["seconds"] = r.seconds;
    j["recall"] = r.recall ? nlohmann::ordered_json(*r.recall) : nlohmann::ordered_json(nullptr);
    j["ndcg"] = r.ndcg ? nlohmann::ordered_json(*r.ndcg) : nlohmann::ordered_json(nullptr);
    out << j.dump() << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

TrainerState make_trainer_state(EmbeddingTable table, double lr) {
  TrainerState s;
  AdamOptions opts;
  opts.lr = lr;
  s.optimizer = Adam(table.values.rows(), table.values.cols(), opts);
  s.table = std::move(table);
  return s;
}

EpochRecord train_epoch(TrainerState& state, const InteractionGraph& train,
                        const AdjacencyChain& full, const ViewPair* views,
                        const ObjectiveWeights& weights, const TrainConfig& config, int epoch,
                        Rng& batch_rng) {
  if (config.batch_size < 1) throw DomainError("batch size must be positive");
  const auto start = std::chrono::steady_clock::now();
  std::optional<AdjacencyChain> chain1;
  std::optional<AdjacencyChain> chain2;
  if (views != nullptr) {
    chain1 = views->first.chain(config.layers);
    chain2 = views->second.chain(config.layers);
  }
  const Index num_batches = (train.num_edges() + config.batch_size - 1) / config.batch_size;
  EpochRecord rec;
  rec.epoch = epoch;
  for (Index b = 0; b < num_batches; ++b) {
    const auto batch = sample_bpr_batch(train, config.batch_size, batch_rng);
    const auto obj = batch_objective(state.table, full, chain1 ? &*chain1 : nullptr,
                                     chain2 ? &*chain2 : nullptr, batch, weights);
    if (!std::isfinite(obj.report.l_total) || !obj.grad_z0.allFinite()) {
      throw TrainingDivergedError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                  std::to_string(b) + " (l_main=" + fmt(obj.report.l_main) +
                                  ", l_ssl=" + fmt(obj.report.l_ssl()) + ")");
    }
    state.optimizer.step(state.table.values, obj.grad_z0);
    rec.l_main += obj.report.l_main;
    rec.l_ssl += obj.report.l_ssl();
    rec.l_reg += obj.report.l_reg;
    rec.l_total += obj.report.l_total;
  }
  if (num_batches > 0) {
    const auto nb = static_cast<double>(num_batches);
    rec.l_main /= nb;
    rec.l_ssl /= nb;
    rec.l_reg /= nb;
    rec.l_total /= nb;
  }
  if (config.record_timing) {
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return rec;
}

bool EarlyStopper::update(double metric, int step) {
  improved_last_ = metric > best_;
  if (improved_last_) {
    best_ = metric;
    best_step_ = step;
    stale_ = 0;
    return false;
  }
  return ++stale_ >= patience_;
}

FinalRepresentations represent(const EmbeddingTable& table, const InteractionGraph& train, int layers) {
  auto adj = std::make_shared<const NormalizedAdjacency>(build_normalized_adjacency(train));
  return forward(AdjacencyChain::shared(std::move(adj), layers), table);
}

namespace {

FitResult fit_with_weights(const TrainConfig& config, const DatasetSplit& split,
                           EmbeddingTable initial, const ObjectiveWeights& weights,
                           bool use_views, std::uint64_t batch_stream, bool early_stop) {
  const auto& train = split.train;
  auto full_adj = std::make_shared<const NormalizedAdjacency>(build_normalized_adjacency(train));
  const auto full = AdjacencyChain::shared(full_adj, config.layers);

  FitResult result;
  result.best_table = initial;
  TrainerState state = make_trainer_state(std::move(initial), config.lr);
  Rng batch_rng(derive_seed(config.seed, {batch_stream}));
  EarlyStopper stopper(std::max(config.early_stop_patience, 1));
  const bool can_validate = early_stop && split.validation.num_edges() > 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::optional<ViewPair> views;
    if (use_views) {
      views = make_epoch_views(train, config.op, config.rho, config.layers, config.seed,
                               static_cast<std::uint64_t>(epoch));
    }
    auto rec = train_epoch(state, train, full, views ? &*views : nullptr, weights, config, epoch,
                           batch_rng);
    result.epochs_run = epoch;
    bool stop = false;
    if (can_validate && (epoch % std::max(config.eval_every, 1) == 0 || epoch == config.max_epochs)) {
      const auto reps = forward(full, state.table);
      const auto m = evaluate(reps, train, split.validation, config.top_k);
      rec.recall = m.recall;
      rec.ndcg = m.ndcg;
      stop = stopper.update(m.recall, epoch);
      if (stopper.improved_last()) {
        result.best_table = state.table;
        result.best_epoch = epoch;
        result.best_recall = m.recall;
      }
    }
    result.curve.records.push_back(rec);
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  if (!can_validate) {
    result.best_table = state.table;
    result.best_epoch = result.epochs_run;
  }
  result.final_table = std::move(state.table);
  return result;
}

}  // namespace

FitResult fit(const TrainConfig& config, const DatasetSplit& split, const EmbeddingTable* initial) {
  if (config.layers < 0) throw DomainError("layer count must be non-negative");
  EmbeddingTable table = initial != nullptr
                             ? *initial
                             : init_embeddings(split.train.num_users(), split.train.num_items(),
                                               config.dim, config.seed);
  const auto weights = joint_weights(config);
  return fit_with_weights(config, split, std::move(table), weights, weights.lambda1 > 0.0,
                          stream::kBatches, true);
}

FitResult pretrain_finetune(const TrainConfig& config, const DatasetSplit& split) {
  EmbeddingTable table =
      init_embeddings(split.train.num_users(), split.train.num_items(), config.dim, config.seed);
  if (config.pretrain_epochs > 0) {
    if (config.op == AugmentOperator::kNone) {
      throw DomainError("pre-training needs an augmentation operator");
    }
    TrainConfig stage1 = config;
    stage1.max_epochs = config.pretrain_epochs;
    ObjectiveWeights w;
    w.use_main = false;
    w.lambda1 = 1.0;
    w.lambda2 = 0.0;
    w.tau = config.tau;
    w.scope = config.scope;
    auto pre = fit_with_weights(stage1, split, std::move(table), w, true, stream::kPretrainBatches,
                                false);
    table = std::move(pre.final_table);
  }
  TrainConfig stage2 = config;
  stage2.mode = TrainMode::kBaseline;
  auto result = fit(stage2, split, &table);
  result.pretrained = std::move(table);
  return result;
}

FitResult run_training(const TrainConfig& config, const DatasetSplit& split) {
  switch (config.mode) {
    case TrainMode::kPretrainFinetune: return pretrain_finetune(config, split);
    case TrainMode::kJoint:
    case TrainMode::kBaseline: break;
  }
  return fit(config, split);
}

}  // namespace sgl
