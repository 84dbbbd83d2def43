#include "sgl_cli/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sgl/analysis.hpp"
#include "sgl/dataio.hpp"
#include "sgl/error.hpp"
#include "sgl/eval.hpp"
#include "sgl/model.hpp"
#include "sgl/random.hpp"
#include "sgl/robustness.hpp"
#include "sgl/train.hpp"

namespace sgl::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string resolve_output_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("SGL_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return "sgl_output";
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path + " for checksumming");
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize k = 0; k < in.gcount(); ++k) {
      h ^= static_cast<unsigned char>(buf[k]);
      h *= 1099511628211ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Collects what a command did and writes manifest.json next to its outputs.
class Manifest {
 public:
  Manifest(std::string command, std::string out_dir, bool deterministic)
      : command_(std::move(command)), out_dir_(std::move(out_dir)), deterministic_(deterministic) {
    if (!deterministic_) started_ = utc_now();
  }

  void set_config(const TrainConfig& c) { config_ = ojson::parse(train_config_to_json(c)); }
  void set_dataset(const std::string& path, Index edges) {
    dataset_ = ojson{{"path", path}, {"edges", edges}, {"checksum", file_checksum(path)}};
  }
  void set_seed(std::uint64_t seed) {
    seeds_ = ojson{{"seed", seed},
                   {"init", hex64(derive_seed(seed, {stream::kInit}))},
                   {"batches", hex64(derive_seed(seed, {stream::kBatches}))},
                   {"pretrain_batches", hex64(derive_seed(seed, {stream::kPretrainBatches}))},
                   {"views_epoch1", hex64(derive_seed(seed, {stream::kViews, 1, stream::kViewBranch1}))},
                   {"split", hex64(derive_seed(seed, {stream::kSplit}))},
                   {"noise", hex64(derive_seed(seed, {stream::kNoise}))}};
  }
  void extra(const std::string& key, ojson value) { extra_[key] = std::move(value); }
  std::string artifact(const std::string& name) {
    artifacts_.push_back(name);
    return (fs::path(out_dir_) / name).string();
  }

  void write() {
    ojson j;
    j["command"] = command_;
    j["output_dir"] = out_dir_;
    j["deterministic"] = deterministic_;
    j["config"] = config_;
    j["dataset"] = dataset_;
    j["seeds"] = seeds_;
    for (auto& [k, v] : extra_.items()) j[k] = v;
    j["artifacts"] = artifacts_;
    if (!deterministic_) {
      j["started_at"] = started_;
      j["finished_at"] = utc_now();
    }
    const auto path = (fs::path(out_dir_) / "manifest.json").string();
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw Error("failed writing " + path);
  }

 private:
  std::string command_;
  std::string out_dir_;
  bool deterministic_;
  std::string started_;
  ojson config_ = nullptr;
  ojson dataset_ = nullptr;
  ojson seeds_ = nullptr;
  ojson extra_ = ojson::object();
  std::vector<std::string> artifacts_;
};

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw CLI::ValidationError(what, "not a number: '" + token + "'");
    }
  }
  if (values.empty()) throw CLI::ValidationError(what, "empty list");
  return values;
}

std::string prepare_dir(const std::string& flag) {
  const auto dir = resolve_output_dir(flag);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

// Flags shared by commands that train.
struct TrainFlags {
  std::string config_path;
  std::string op;
  std::optional<int> layers;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::optional<double> tau;
  std::optional<double> rho;
  std::string scope;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON training config")->required()->check(CLI::ExistingFile);
    cmd->add_option("--operator", op, "Augmentation operator")
        ->check(CLI::IsMember({"nd", "ed", "rw", "none"}));
    cmd->add_option("--layers", layers, "Propagation layers")->check(CLI::NonNegativeNumber);
    cmd->add_option("--lambda1", lambda1, "SSL weight");
    cmd->add_option("--lambda2", lambda2, "L2 weight");
    cmd->add_option("--tau", tau, "InfoNCE temperature")->check(CLI::PositiveNumber);
    cmd->add_option("--rho", rho, "Dropout ratio")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--neg-scope", scope, "InfoNCE negatives")
        ->check(CLI::IsMember({"full", "batch", "merge"}));
    cmd->add_option("--mode", mode, "Training mode")
        ->check(CLI::IsMember({"joint", "pretrain", "baseline"}));
    cmd->add_option("--seed", seed, "Top-level seed");
    cmd->add_option("--epochs", epochs, "Override max_epochs")->check(CLI::NonNegativeNumber);
  }

  TrainConfig resolve(bool deterministic) const {
    TrainConfig c = load_train_config(config_path);
    if (!op.empty()) c.op = parse_augment_operator(op);
    if (layers) c.layers = *layers;
    if (lambda1) c.lambda1 = *lambda1;
    if (lambda2) c.lambda2 = *lambda2;
    if (tau) c.tau = *tau;
    if (rho) c.rho = *rho;
    if (!scope.empty()) c.scope = parse_negative_scope(scope);
    if (!mode.empty()) c.mode = parse_train_mode(mode);
    if (seed) c.seed = *seed;
    if (epochs) c.max_epochs = *epochs;
    if (deterministic) c.record_timing = false;
    return c;
  }
};

// Embeddings from a checkpoint, checked against the split they are used with.
EmbeddingTable load_for(const std::string& path, const DatasetSplit& split) {
  auto table = load_checkpoint(path);
  if (table.num_users != split.train.num_users() || table.num_items != split.train.num_items()) {
    throw DimensionMismatchError("checkpoint " + path + " has " + std::to_string(table.num_users) +
                                 " users and " + std::to_string(table.num_items) +
                                 " items, split has " + std::to_string(split.train.num_users()) +
                                 " and " + std::to_string(split.train.num_items()));
  }
  return table;
}

const InteractionGraph& pick_part(const DatasetSplit& split, const std::string& part) {
  return part == "valid" ? split.validation : split.test;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph recommendation with self-supervised contrastive views", "sgl"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string out_flag;
  bool deterministic = false;
  app.add_option("--out", out_flag, "Output directory (default: $SGL_OUTPUT_DIR or sgl_output)");
  app.add_flag("--deterministic", deterministic,
               "Byte-stable outputs: no timestamps or wall-clock columns");

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Filter and split an interaction file");
  std::string input;
  std::string format = "pair";
  int k_core = 10;
  std::string ratios_text = "0.7,0.1,0.2";
  std::uint64_t split_seed = 2021;
  prepare->add_option("--input", input, "Interaction file")->required();
  prepare->add_option("--format", format, "pair | adjacency")->check(CLI::IsMember({"pair", "adjacency"}));
  prepare->add_option("--k-core", k_core, "Minimum interactions per user and item")->check(CLI::PositiveNumber);
  prepare->add_option("--ratios", ratios_text, "train,valid,test");
  prepare->add_option("--seed", split_seed, "Split seed");

  // train
  auto* train = app.add_subcommand("train", "Train embeddings on a split");
  TrainFlags train_flags;
  std::string split_path;
  train_flags.attach(train);
  train->add_option("--split", split_path, "Split manifest from prepare")->required();

  // evaluate / longtail
  std::string checkpoint;
  std::string eval_split;
  std::string eval_config;
  std::optional<int> eval_layers;
  int k = 20;
  std::string part = "test";
  auto add_eval_options = [&](CLI::App* cmd) {
    cmd->add_option("--checkpoint", checkpoint, "Embedding checkpoint")->required();
    cmd->add_option("--split", eval_split, "Split manifest")->required();
    cmd->add_option("--config", eval_config, "Training config (for the layer count)");
    cmd->add_option("--layers", eval_layers, "Propagation layers (overrides --config)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("-k,--k", k, "Cut-off K")->check(CLI::PositiveNumber);
    cmd->add_option("--part", part, "test | valid")->check(CLI::IsMember({"test", "valid"}));
  };
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Recall@K and NDCG@K of a checkpoint");
  add_eval_options(evaluate_cmd);
  auto* longtail = app.add_subcommand("longtail", "Recall@K split over 10 popularity groups");
  add_eval_options(longtail);

  // noise
  auto* noise = app.add_subcommand("noise", "Robustness to injected interactions");
  TrainFlags noise_flags;
  std::string noise_split;
  std::string noise_ratios = "0,0.05,0.10,0.15,0.20";
  noise_flags.attach(noise);
  noise->add_option("--split", noise_split, "Split manifest")->required();
  noise->add_option("--ratios", noise_ratios, "Comma-separated noise ratios (must include 0)");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Hard-negative gradient curves");
  std::string taus_text = "1.0,0.1";
  int resolution = 2001;
  analyze->add_option("--tau", taus_text, "Comma-separated temperatures");
  analyze->add_option("--resolution", resolution, "Grid points on [-1, 1]")->check(CLI::Range(2, 10000000));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "sgl: " << e.what() << "\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kUsageError;
  }

  try {
    const std::string dir = prepare_dir(out_flag);

    if (prepare->parsed()) {
      const auto r = parse_list(ratios_text, "--ratios");
      if (r.size() != 3) throw CLI::ValidationError("--ratios", "expected three values");
      Manifest manifest("prepare", dir, deterministic);
      auto raw = load_interactions(input, parse_interaction_format(format));
      raw = apply_k_core(raw, k_core);
      const auto users = static_cast<double>(raw.num_users());
      const auto items = static_cast<double>(raw.num_items());
      const auto n = static_cast<double>(raw.num_interactions());
      const double density = n / (users * items);
      const auto split = split_dataset(raw, SplitRatios{r[0], r[1], r[2]}, split_seed);
      const auto split_file = manifest.artifact("split.jsonl");
      write_split_manifest(split, split_file);
      {
        std::ofstream stats(manifest.artifact("stats.csv"));
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%zu,%.5f,%lld,%lld,%lld\n", raw.num_users(),
                      raw.num_items(), raw.num_interactions(), density,
                      static_cast<long long>(split.train.num_edges()),
                      static_cast<long long>(split.validation.num_edges()),
                      static_cast<long long>(split.test.num_edges()));
        stats << "users,items,interactions,density,train,valid,test\n" << buf;
        if (!stats) throw Error("failed writing stats.csv in " + dir);
      }
      manifest.set_dataset(input, static_cast<Index>(raw.num_interactions()));
      manifest.set_seed(split_seed);
      manifest.extra("k_core", k_core);
      manifest.extra("ratios", r);
      manifest.write();
      char line[160];
      std::snprintf(line, sizeof(line), "users %zu  items %zu  interactions %zu  density %.5f\n",
                    raw.num_users(), raw.num_items(), raw.num_interactions(), density);
      out << line;
      out << "split " << split.train.num_edges() << " / " << split.validation.num_edges() << " / "
          << split.test.num_edges() << " -> " << split_file << "\n";
      return kOk;
    }

    if (train->parsed()) {
      const auto config = train_flags.resolve(deterministic);
      const auto split = read_split_manifest(split_path);
      Manifest manifest("train", dir, deterministic);
      manifest.set_config(config);
      manifest.set_dataset(split_path, split.train.num_edges());
      manifest.set_seed(config.seed);
      const auto result = run_training(config, split);
      save_checkpoint(result.best_table, result.best_epoch, manifest.artifact("best.ckpt"));
      save_checkpoint(result.final_table, result.epochs_run, manifest.artifact("final.ckpt"));
      if (result.pretrained) save_checkpoint(*result.pretrained, 0, manifest.artifact("pretrained.ckpt"));
      write_curve_csv(result.curve, manifest.artifact("curve.csv"));
      write_curve_jsonl(result.curve, manifest.artifact("curve.jsonl"));
      manifest.extra("best_epoch", result.best_epoch);
      manifest.extra("best_valid_recall", result.best_recall);
      manifest.extra("epochs_run", result.epochs_run);
      manifest.extra("stopped_early", result.stopped_early);
      manifest.write();
      out << "trained " << result.epochs_run << " epochs (" << to_string(config.mode) << ", "
          << to_string(config.op) << "); best epoch " << result.best_epoch << " valid recall@"
          << config.top_k << " " << result.best_recall << "\n";
      return kOk;
    }

    if (evaluate_cmd->parsed() || longtail->parsed()) {
      const bool lt = longtail->parsed();
      const auto split = read_split_manifest(eval_split);
      const auto table = load_for(checkpoint, split);
      int layers = eval_config.empty() ? TrainConfig{}.layers : load_train_config(eval_config).layers;
      if (eval_layers) layers = *eval_layers;
      Manifest manifest(lt ? "longtail" : "evaluate", dir, deterministic);
      manifest.set_dataset(eval_split, split.train.num_edges());
      manifest.extra("checkpoint", ojson{{"path", checkpoint}, {"checksum", file_checksum(checkpoint)}});
      manifest.extra("layers", layers);
      manifest.extra("k", k);
      manifest.extra("part", part);
      const auto reps = represent(table, split.train, layers);
      std::optional<PopularityGroups> groups;
      if (lt) groups = build_popularity_groups(split.train, 10);
      const auto report = evaluate(reps, split.train, pick_part(split, part), k, groups ? &*groups : nullptr);
      write_metrics_csv(report, manifest.artifact("metrics.csv"));
      write_metrics_jsonl(report, manifest.artifact("metrics.jsonl"));
      if (lt) {
        write_longtail_csv(report, manifest.artifact("longtail.csv"));
        if (groups->fewer_than_requested) err << "sgl: warning: fewer than 10 nonempty popularity groups\n";
      }
      manifest.write();
      out << "recall@" << k << " " << report.recall << "  ndcg@" << k << " " << report.ndcg << "  users "
          << report.num_users << "\n";
      return kOk;
    }

    if (noise->parsed()) {
      const auto config = noise_flags.resolve(deterministic);
      const auto ratios = parse_list(noise_ratios, "--ratios");
      const auto split = read_split_manifest(noise_split);
      Manifest manifest("noise", dir, deterministic);
      manifest.set_config(config);
      manifest.set_dataset(noise_split, split.train.num_edges());
      manifest.set_seed(config.seed);
      manifest.extra("ratios", ratios);
      const auto rows = noise_experiment(config, split, ratios);
      write_noise_csv(rows, manifest.artifact("noise.csv"));
      manifest.write();
      for (const auto& r : rows) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-8s noise %.2f  recall %.5f  degradation %.2f%%\n",
                      r.variant.c_str(), r.ratio, r.recall, 100.0 * r.degradation);
        out << line;
      }
      return kOk;
    }

    if (analyze->parsed()) {
      const auto taus = parse_list(taus_text, "--tau");
      Manifest manifest("analyze", dir, deterministic);
      manifest.extra("taus", taus);
      manifest.extra("resolution", resolution);
      const auto files = analysis::emit_curves(taus, resolution, dir);
      for (const auto& f : files) manifest.artifact(fs::path(f).filename().string());
      manifest.write();
      for (double t : taus) {
        char line[128];
        std::snprintf(line, sizeof(line), "tau %g  x* %.6f  g* %.6g  ln g* %.6f\n", t, analysis::x_star(t),
                      std::exp(analysis::ln_g_star(t)), analysis::ln_g_star(t));
        out << line;
      }
      return kOk;
    }
  } catch (const CLI::ValidationError& e) {
    err << "sgl: " << e.what() << "\n";
    return kUsageError;
  } catch (const TrainingDivergedError& e) {
    err << "sgl: training aborted: " << e.what() << "\n";
    return kTrainingAborted;
  } catch (const Error& e) {
    err << "sgl: " << e.what() << "\n";
    return kModuleError;
  } catch (const std::exception& e) {
    err << "sgl: unexpected error: " << e.what() << "\n";
    return kModuleError;
  }
  return kUsageError;
}

}  // namespace sgl::cli
