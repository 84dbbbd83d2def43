#pragma once

#include <string>
#include <vector>

#include "sgl/dataio.hpp"
#include "sgl/train.hpp"

namespace sgl {

struct NoiseRow {
  double ratio = 0.0;
  std::string variant;  // "sgl" or "baseline"
  Index noise_edges = 0;
  double recall = 0.0;
  double ndcg = 0.0;
  double degradation = 0.0;  // (R0 - R_ratio) / R0
};

// Baseline variant of a config: no SSL term, no augmentation.
TrainConfig baseline_of(const TrainConfig& config);

// For each ratio, injects noise into the training split, trains `config` and
// its baseline, and reports test Recall@K with degradation relative to the
// ratio-0 run of the same variant. `ratios` must include 0.
std::vector<NoiseRow> noise_experiment(const TrainConfig& config, const DatasetSplit& split,
                                       const std::vector<double>& ratios);

// Columns: ratio,variant,noise_edges,recall,ndcg,degradation,degradation_pct
void write_noise_csv(const std::vector<NoiseRow>& rows, const std::string& path);

}  // namespace sgl
