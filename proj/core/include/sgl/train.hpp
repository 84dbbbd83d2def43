#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgl/dataio.hpp"
#include "sgl/graph.hpp"
#include "sgl/loss.hpp"
#include "sgl/model.hpp"
#include "sgl/optim.hpp"
#include "sgl/random.hpp"

namespace sgl {

enum class TrainMode { kJoint, kPretrainFinetune, kBaseline };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& name);

struct TrainConfig {
  int layers = 3;
  int dim = 64;
  double lr = 1e-3;
  int batch_size = 2048;
  int max_epochs = 100;
  double lambda1 = 0.1;
  double lambda2 = 1e-4;
  double tau = 0.2;
  double rho = 0.1;
  AugmentOperator op = AugmentOperator::kEdgeDropout;
  NegativeScope scope = NegativeScope::kBatchTyped;
  std::uint64_t seed = 2021;
  int early_stop_patience = 50;  // in evaluations
  int eval_every = 1;            // epochs between validation evaluations
  int top_k = 20;
  TrainMode mode = TrainMode::kJoint;
  int pretrain_epochs = 10;      // stage-1 epochs in pretrain-finetune mode
  bool record_timing = true;     // false writes 0 seconds for byte-stable curves

  // Whether the SSL branches take part in the joint objective.
  bool uses_ssl() const {
    return mode != TrainMode::kBaseline && op != AugmentOperator::kNone && lambda1 > 0.0;
  }
};

// Reads a JSON object whose keys mirror TrainConfig fields; absent keys keep
// the values already in `base`. Unknown keys are rejected.
TrainConfig load_train_config(const std::string& path, TrainConfig base = {});
TrainConfig parse_train_config(const std::string& json_text, TrainConfig base = {});
std::string train_config_to_json(const TrainConfig& config);

// Xavier-uniform with fan-in = fan-out = dim, i.e. U(-sqrt(3/dim), sqrt(3/dim)).
EmbeddingTable init_embeddings(Index num_users, Index num_items, int dim, std::uint64_t seed);

// Uniform observed pairs with one uniform unobserved item each.
BprBatch sample_bpr_batch(const InteractionGraph& train, int batch_size, Rng& rng);

struct ObjectiveWeights {
  bool use_main = true;  // false: SSL-only pre-training objective
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double tau = 0.2;
  NegativeScope scope = NegativeScope::kBatchTyped;
};

struct BatchObjective {
  LossReport report;
  Matrix grad_z0;
};

// Joint loss of one mini-batch and its gradient with respect to Z0. The main
// branch runs on `full`; when both view chains are given and lambda1 > 0 the
// SSL term runs on them. Each branch is back-propagated through its own chain.
BatchObjective batch_objective(const EmbeddingTable& table, const AdjacencyChain& full,
                               const AdjacencyChain* view1, const AdjacencyChain* view2,
                               const BprBatch& batch, const ObjectiveWeights& weights);

struct EpochRecord {
  int epoch = 0;
  double l_main = 0.0;
  double l_ssl = 0.0;
  double l_reg = 0.0;
  double l_total = 0.0;
  double seconds = 0.0;
  std::optional<double> recall;
  std::optional<double> ndcg;
};

struct TrainingCurve {
  std::vector<EpochRecord> records;
};

void write_curve_csv(const TrainingCurve& curve, const std::string& path);
void write_curve_jsonl(const TrainingCurve& curve, const std::string& path);

struct TrainerState {
  EmbeddingTable table;
  Adam optimizer;
};

TrainerState make_trainer_state(EmbeddingTable table, double lr);

// One pass of ceil(|train| / batch_size) mini-batches with one Adam step
// each. `views` may be null, which disables the SSL term. Batch-averaged
// losses go into the returned record.
EpochRecord train_epoch(TrainerState& state, const InteractionGraph& train,
                        const AdjacencyChain& full, const ViewPair* views,
                        const ObjectiveWeights& weights, const TrainConfig& config, int epoch,
                        Rng& batch_rng);

// Stops after `patience` consecutive evaluations without improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  // Returns true when training should stop.
  bool update(double metric, int step);
  bool improved_last() const { return improved_last_; }
  double best() const { return best_; }
  int best_step() const { return best_step_; }

 private:
  int patience_;
  double best_ = -1.0;
  int best_step_ = 0;
  int stale_ = 0;
  bool improved_last_ = false;
};

struct FitResult {
  EmbeddingTable final_table;
  EmbeddingTable best_table;
  int best_epoch = 0;
  double best_recall = 0.0;
  int epochs_run = 0;
  bool stopped_early = false;
  TrainingCurve curve;
  // Stage-1 result in pretrain-finetune mode.
  std::optional<EmbeddingTable> pretrained;
};

// Trains on split.train, early-stopping on split.validation Recall@K.
// `initial` overrides the seeded Xavier initialization.
FitResult fit(const TrainConfig& config, const DatasetSplit& split,
              const EmbeddingTable* initial = nullptr);

// Stage 1 optimizes the SSL loss alone for config.pretrain_epochs, stage 2
// fine-tunes on BPR (+ L2) from the stage-1 embeddings.
FitResult pretrain_finetune(const TrainConfig& config, const DatasetSplit& split);

// Dispatches on config.mode.
FitResult run_training(const TrainConfig& config, const DatasetSplit& split);

// Full-graph representations of a table.
FinalRepresentations represent(const EmbeddingTable& table, const InteractionGraph& train, int layers);

}  // namespace sgl
