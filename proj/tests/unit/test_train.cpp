#include <doctest.h>

#include <cmath>
#include <map>

#include "sgl/error.hpp"
#include "sgl/train.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"
#include "support/toy_data.hpp"

using namespace sgl;
using namespace sgl::testing;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.layers = 2;
  c.dim = 8;
  c.lr = 0.01;
  c.batch_size = 64;
  c.max_epochs = 3;
  c.record_timing = false;
  return c;
}

bool same_table(const EmbeddingTable& a, const EmbeddingTable& b) {
  return a.values.rows() == b.values.rows() && a.values.cols() == b.values.cols() &&
         (a.values - b.values).cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("first Adam step moves each coordinate by about lr against its gradient sign") {
    Adam adam(2, 3, {0.01});
    Matrix p = Matrix::Zero(2, 3);
    Matrix g(2, 3);
    g << 1e-3, -5.0, 200.0, -0.25, 3.0, -1e-2;
    adam.step(p, g);
    for (Index r = 0; r < 2; ++r)
      for (Index c = 0; c < 3; ++c) CHECK(p(r, c) == doctest::Approx(g(r, c) > 0 ? -0.01 : 0.01).epsilon(1e-4));
    CHECK(adam.steps() == 1);
  }

  TEST_CASE("Adam matches a hand-rolled update over several steps") {
    Adam adam(1, 1, {0.1});
    Matrix p = Matrix::Constant(1, 1, 2.0);
    double x = 2.0;
    double m = 0.0;
    double v = 0.0;
    for (int t = 1; t <= 5; ++t) {
      const double grad = 2.0 * x;
      Matrix g = Matrix::Constant(1, 1, grad);
      adam.step(p, g);
      m = 0.9 * m + 0.1 * grad;
      v = 0.999 * v + 0.001 * grad * grad;
      const double mh = m / (1 - std::pow(0.9, t));
      const double vh = v / (1 - std::pow(0.999, t));
      x -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(p(0, 0) == doctest::Approx(x).epsilon(1e-14));
    }
  }

  TEST_CASE("initialization is bounded, centered and seeded") {
    const auto t = init_embeddings(100, 150, 16, 5);
    const double bound = std::sqrt(6.0 / 32.0);
    CHECK(t.values.rows() == 250);
    CHECK(t.values.cwiseAbs().maxCoeff() <= bound);
    CHECK(std::abs(t.values.mean()) < 0.01);
    // Variance of U(-b, b) is b^2 / 3.
    const double var = (t.values.array() - t.values.mean()).square().mean();
    CHECK(var == doctest::Approx(bound * bound / 3.0).epsilon(0.05));
    CHECK(same_table(t, init_embeddings(100, 150, 16, 5)));
    CHECK_FALSE(same_table(t, init_embeddings(100, 150, 16, 6)));
  }

  TEST_CASE("BPR sampling draws observed positives uniformly and unobserved negatives") {
    const auto g = random_graph(10, 12, 0.3, 8);
    Rng rng(1);
    const int draws = 60000;
    const auto batch = sample_bpr_batch(g, draws, rng);
    std::map<std::pair<Index, Index>, int> counts;
    for (const auto& t : batch) {
      CHECK(g.contains(t.user, t.pos_item));
      CHECK_FALSE(g.contains(t.user, t.neg_item));
      ++counts[{t.user, t.pos_item}];
    }
    const double expected = static_cast<double>(draws) / static_cast<double>(g.num_edges());
    double chi2 = 0.0;
    for (const auto& e : g.edges()) {
      const double c = counts[{e.user, e.item}];
      chi2 += (c - expected) * (c - expected) / expected;
    }
    // Generous bound: mean is |E|-1, sd about sqrt(2|E|).
    const double dof = static_cast<double>(g.num_edges() - 1);
    CHECK(chi2 < dof + 6.0 * std::sqrt(2.0 * dof));
  }

  TEST_CASE("a user who saw every item cannot be sampled") {
    const InteractionGraph g(1, 2, {{0, 0}, {0, 1}});
    Rng rng(3);
    CHECK_THROWS_AS(sample_bpr_batch(g, 1, rng), SamplingExhaustedError);
  }

  TEST_CASE("early stopping counts stale evaluations") {
    EarlyStopper one(1);
    CHECK_FALSE(one.update(0.1, 1));
    CHECK(one.update(0.1, 2));
    EarlyStopper three(3);
    CHECK_FALSE(three.update(0.2, 1));
    CHECK_FALSE(three.update(0.1, 2));
    CHECK_FALSE(three.update(0.3, 3));
    CHECK_FALSE(three.update(0.3, 4));
    CHECK_FALSE(three.update(0.29, 5));
    CHECK(three.update(0.0, 6));
    CHECK(three.best_step() == 3);
  }

  TEST_CASE("batch objective gradient matches finite differences") {
    const auto g = random_graph(5, 6, 0.4, 2);
    const auto table = init_embeddings(5, 6, 3, 9);
    auto adj = std::make_shared<const NormalizedAdjacency>(build_normalized_adjacency(g));
    const auto full = AdjacencyChain::shared(adj, 2);
    const auto views = make_epoch_views(g, AugmentOperator::kEdgeDropout, 0.3, 2, 4, 1);
    const auto c1 = views.first.chain(2);
    const auto c2 = views.second.chain(2);
    Rng rng(10);
    const auto batch = sample_bpr_batch(g, 7, rng);
    for (auto scope : {NegativeScope::kFull, NegativeScope::kBatchTyped, NegativeScope::kBatchMerged}) {
      for (double lambda1 : {0.0, 0.5}) {
        const ObjectiveWeights w{true, lambda1, 0.01, 0.3, scope};
        const auto obj = batch_objective(table, full, &c1, &c2, batch, w);
        auto f = [&](const Matrix& x) {
          EmbeddingTable probe = table;
          probe.values = x;
          return batch_objective(probe, full, &c1, &c2, batch, w).report.l_total;
        };
        CHECK(relative_error(obj.grad_z0, central_difference<Matrix>(f, table.values)) < 1e-6);
      }
    }
  }

  TEST_CASE("with lambda1 = 0 the objective is BPR plus L2 regardless of views") {
    const auto g = random_graph(6, 7, 0.4, 12);
    const auto table = init_embeddings(6, 7, 4, 1);
    auto adj = std::make_shared<const NormalizedAdjacency>(build_normalized_adjacency(g));
    const auto full = AdjacencyChain::shared(adj, 3);
    const auto views = make_epoch_views(g, AugmentOperator::kNodeDropout, 0.2, 3, 4, 1);
    const auto c1 = views.first.chain(3);
    const auto c2 = views.second.chain(3);
    Rng rng(2);
    const auto batch = sample_bpr_batch(g, 9, rng);
    const ObjectiveWeights w{true, 0.0, 1e-4, 0.2, NegativeScope::kBatchTyped};
    const auto with_views = batch_objective(table, full, &c1, &c2, batch, w);
    const auto without = batch_objective(table, full, nullptr, nullptr, batch, w);
    CHECK(with_views.report.l_total == without.report.l_total);
    CHECK(with_views.report.l_ssl() == 0.0);
    CHECK((with_views.grad_z0 - without.grad_z0).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("config JSON round trip and rejection of unknown keys") {
    TrainConfig c = small_config();
    c.op = AugmentOperator::kRandomWalk;
    c.scope = NegativeScope::kBatchMerged;
    c.mode = TrainMode::kPretrainFinetune;
    c.seed = 123456789012345ULL;
    const auto back = parse_train_config(train_config_to_json(c));
    CHECK(train_config_to_json(back) == train_config_to_json(c));
    CHECK(parse_train_config(R"({"tau": 0.5})").tau == 0.5);
    CHECK_THROWS_AS(parse_train_config(R"({"temperature": 0.5})"), Error);
    CHECK_THROWS_AS(parse_train_config(R"({"operator": "xx"})"), Error);
    CHECK_THROWS_AS(parse_train_config("[1]"), Error);
    CHECK_THROWS_AS(load_train_config("/nonexistent/config.json"), Error);
  }

  TEST_CASE("zero epochs returns the initial table") {
    const auto split = toy_split();
    auto c = small_config();
    c.max_epochs = 0;
    const auto r = fit(c, split);
    CHECK(r.epochs_run == 0);
    CHECK(r.curve.records.empty());
    CHECK(same_table(r.final_table, init_embeddings(split.train.num_users(), split.train.num_items(), c.dim, c.seed)));
  }

  TEST_CASE("training is deterministic under a fixed seed") {
    const auto split = toy_split();
    const auto c = small_config();
    const auto a = fit(c, split);
    const auto b = fit(c, split);
    CHECK(same_table(a.final_table, b.final_table));
    TempDir dir;
    write_curve_csv(a.curve, dir.file("a.csv"));
    write_curve_csv(b.curve, dir.file("b.csv"));
    CHECK(slurp(dir.file("a.csv")) == slurp(dir.file("b.csv")));
    auto c2 = c;
    c2.seed = c.seed + 1;
    CHECK_FALSE(same_table(a.final_table, fit(c2, split).final_table));
  }

  TEST_CASE("training lowers the loss and records validation metrics") {
    const auto split = toy_split();
    auto c = small_config();
    c.max_epochs = 20;
    const auto r = fit(c, split);
    REQUIRE(r.curve.records.size() == 20);
    CHECK(r.curve.records.back().l_main < r.curve.records.front().l_main);
    CHECK(r.curve.records.front().l_ssl > 0.0);
    CHECK(r.curve.records.front().recall.has_value());
    CHECK(r.best_epoch >= 1);
  }

  TEST_CASE("early stopping halts a run with patience one") {
    const auto split = toy_split();
    auto c = small_config();
    c.max_epochs = 200;
    c.early_stop_patience = 1;
    c.lr = 0.05;
    const auto r = fit(c, split);
    CHECK(r.stopped_early);
    CHECK(r.epochs_run < 200);
    CHECK(r.epochs_run == r.best_epoch + 1);
  }

  TEST_CASE("pretrain-finetune hands stage-1 embeddings to stage 2") {
    const auto split = toy_split();
    auto c = small_config();
    c.mode = TrainMode::kPretrainFinetune;
    c.pretrain_epochs = 0;
    auto base = c;
    base.mode = TrainMode::kBaseline;
    const auto zero = run_training(c, split);
    const auto plain = run_training(base, split);
    CHECK(same_table(zero.final_table, plain.final_table));

    c.pretrain_epochs = 2;
    const auto staged = run_training(c, split);
    REQUIRE(staged.pretrained.has_value());
    CHECK_FALSE(same_table(*staged.pretrained,
                           init_embeddings(split.train.num_users(), split.train.num_items(), c.dim, c.seed)));
    CHECK(same_table(staged.final_table, fit(base, split, &*staged.pretrained).final_table));
    for (const auto& rec : staged.curve.records) CHECK(rec.l_ssl == 0.0);
  }

  TEST_CASE("curve writers") {
    TrainingCurve curve;
    EpochRecord a;
    a.epoch = 1;
    a.l_main = 0.5;
    a.l_total = 0.5;
    curve.records.push_back(a);
    a.epoch = 2;
    a.recall = 0.25;
    a.ndcg = 0.125;
    curve.records.push_back(a);
    TempDir dir;
    write_curve_csv(curve, dir.file("c.csv"));
    CHECK(slurp(dir.file("c.csv")) ==
          "epoch,l_main,l_ssl,l_reg,l_total,seconds,recall,ndcg\n1,0.5,0,0,0.5,0,,\n2,0.5,0,0,0.5,0,0.25,0.125\n");
    write_curve_jsonl(curve, dir.file("c.jsonl"));
    CHECK(slurp(dir.file("c.jsonl")).find("\"recall\":null") != std::string::npos);
  }
}
