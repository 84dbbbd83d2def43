#include "sgl/robustness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "sgl/error.hpp"
#include "sgl/eval.hpp"

namespace sgl {

TrainConfig baseline_of(const TrainConfig& config) {
  TrainConfig c = config;
  c.mode = TrainMode::kBaseline;
  c.op = AugmentOperator::kNone;
  c.lambda1 = 0.0;
  return c;
}

std::vector<NoiseRow> noise_experiment(const TrainConfig& config, const DatasetSplit& split,
                                       const std::vector<double>& ratios) {
  if (std::find(ratios.begin(), ratios.end(), 0.0) == ratios.end()) {
    throw DomainError("noise ratios must include 0");
  }
  const std::pair<const char*, TrainConfig> variants[] = {{"sgl", config},
                                                          {"baseline", baseline_of(config)}};
  std::vector<NoiseRow> rows;
  for (const auto& [name, cfg] : variants) {
    const std::size_t first = rows.size();
    double reference = 0.0;
    for (double ratio : ratios) {
      const auto noisy = inject_noise(split, ratio, cfg.seed);
      const auto result = run_training(cfg, noisy);
      const auto reps = represent(result.best_table, noisy.train, cfg.layers);
      const auto m = evaluate(reps, noisy.train, noisy.test, cfg.top_k);
      NoiseRow row;
      row.ratio = ratio;
      row.variant = name;
      row.noise_edges = noisy.num_noise_edges();
      row.recall = m.recall;
      row.ndcg = m.ndcg;
      rows.push_back(row);
      if (ratio == 0.0) reference = m.recall;
    }
    for (std::size_t k = first; k < rows.size(); ++k) {
      rows[k].degradation = reference > 0.0 ? (reference - rows[k].recall) / reference : 0.0;
    }
  }
  return rows;
}

void write_noise_csv(const std::vector<NoiseRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "ratio,variant,noise_edges,recall,ndcg,degradation,degradation_pct\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%s,%lld,%.17g,%.17g,%.17g,%.6f\n", r.ratio,
                  r.variant.c_str(), static_cast<long long>(r.noise_edges), r.recall, r.ndcg,
                  r.degradation, 100.0 * r.degradation);
    out << buf;
  }
  if (!out) throw Error("failed writing " + path);
}

}  // namespace sgl
