#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "routerbench/embeddings.hpp"
#include "routerbench/predictors.hpp"
#include "routerbench/records.hpp"
#include "routerbench/synth.hpp"

using namespace routerbench;

namespace {

// Small complete table with one record per (sample, model); qualities are
// provided model-major.
RecordTable make_table(const std::vector<std::string>& prompts,
                       const std::vector<std::string>& models,
                       const std::vector<std::vector<double>>& qualities,
                       double cost_step = 0.1) {
  std::vector<InferenceRecord> recs;
  for (std::size_t si = 0; si < prompts.size(); ++si) {
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      InferenceRecord r;
      r.sample_id = "s" + std::to_string(si);
      r.eval_name = "unit";
      r.model_name = models[mi];
      r.prompt = prompts[si];
      r.model_response = "r";
      r.true_label = "x";
      r.quality = qualities[mi][si];
      r.cost = cost_step * static_cast<double>(mi + 1);
      recs.push_back(std::move(r));
    }
  }
  return RecordTable::from_records(std::move(recs));
}

// Separable synthetic set: unit vectors scaled by 3, labeled by a fixed
// half-space with margin 0.4.
void make_separable(int dim, int n, std::vector<std::vector<double>>& X, std::vector<double>& y) {
  Rng rng(123);
  std::vector<double> w(static_cast<std::size_t>(dim));
  for (auto& x : w) x = rng.normal();
  while (static_cast<int>(X.size()) < n) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double dot = 0.0, norm = 0.0;
    for (auto& x : v) x = rng.normal();
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    for (int d = 0; d < dim; ++d) dot += w[static_cast<std::size_t>(d)] * v[static_cast<std::size_t>(d)];
    if (std::abs(dot) < 0.4) continue;
    for (auto& x : v) x *= 3.0;
    X.push_back(std::move(v));
    y.push_back(dot > 0.0 ? 1.0 : 0.0);
  }
}

}  // namespace

TEST_CASE("knn k=1 recalls an exactly matching training prompt") {
  const auto table = make_table({"alpha one", "beta two", "gamma three"}, {"m"},
                                {{0.7, 0.2, 0.9}});
  const EmbeddingProvider emb(table, 32);
  const auto p = QualityPredictor::train_knn(table, emb, {1}, 0);
  CHECK(p.predict("m", embed("beta two", 32)) == 0.2);
  CHECK(p.predict("m", embed("alpha one", 32)) == 0.7);
}

TEST_CASE("knn with k equal to the training size returns the global mean") {
  const auto table = make_table({"a b", "c d", "e f", "g h"}, {"m"}, {{1.0, 0.0, 1.0, 0.5}});
  const EmbeddingProvider emb(table, 32);
  const auto p = QualityPredictor::train_knn(table, emb, {4}, 0);
  CHECK(p.predict("m", embed("anything else", 32)) == (1.0 + 0.0 + 1.0 + 0.5) / 4.0);
}

TEST_CASE("knn k=3 equals the exhaustive neighbor scan") {
  const std::vector<std::string> prompts = {"red apple pie", "green apple tart",
                                            "blue sky report", "red sky morning",
                                            "apple sky mixture"};
  const auto table = make_table(prompts, {"m"}, {{0.1, 0.3, 0.5, 0.7, 0.9}});
  const EmbeddingProvider emb(table, 64);
  const auto p = QualityPredictor::train_knn(table, emb, {3}, 0);

  for (const char* query : {"red apple", "sky report today", "apple apple apple"}) {
    const auto x = embed(query, 64);
    // exhaustive: rank training samples by cosine similarity, index-stable
    std::vector<std::size_t> idx(prompts.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<double> sims;
    for (const auto& pr : prompts) sims.push_back(cosine_similarity(embed(pr, 64), x));
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
    const std::vector<double> q = {0.1, 0.3, 0.5, 0.7, 0.9};
    const double expected = (q[idx[0]] + q[idx[1]] + q[idx[2]]) / 3.0;
    CHECK(p.predict("m", x) == expected);
  }
}

TEST_CASE("knn similarity ties break toward the earlier training sample") {
  const auto table = make_table({"same words", "same words!", "unrelated thing"}, {"m"},
                                {{0.2, 0.9, 0.5}});
  const EmbeddingProvider emb(table, 32);
  const auto p = QualityPredictor::train_knn(table, emb, {1}, 0);
  // s0 and s1 hash to identical vectors; index order selects s0.
  CHECK(p.predict("m", embed("same words", 32)) == 0.2);
}

TEST_CASE("knn validates k and embedding dimensions") {
  const auto table = make_table({"a", "b"}, {"m"}, {{1.0, 0.0}});
  const EmbeddingProvider emb(table, 32);
  CHECK_THROWS_AS(QualityPredictor::train_knn(table, emb, {3}, 0), ConfigError);
  CHECK_THROWS_AS(QualityPredictor::train_knn(table, emb, {0}, 0), ConfigError);

  const auto p = QualityPredictor::train_knn(table, emb, {1}, 0);
  CHECK_THROWS_AS(p.predict("m", embed("a", 64)), ConfigError);
}

TEST_CASE("mlp with zero parameters outputs one half") {
  MlpNet net;
  net.sizes = {4, 3, 1};
  net.weights = {std::vector<double>(12, 0.0), std::vector<double>(3, 0.0)};
  net.biases = {std::vector<double>(3, 0.0), std::vector<double>(1, 0.0)};
  CHECK(mlp_forward(net, {1.0, -2.0, 0.5, 3.0}) == 0.5);
}

TEST_CASE("mlp outputs stay in (0,1)") {
  Rng rng(2);
  MlpNet net = mlp_init({8, 16, 1}, rng);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(8);
    for (auto& v : x) v = rng.uniform(-50, 50);
    const double y = mlp_forward(net, x);
    CHECK(y > 0.0);
    CHECK(y < 1.0);
  }
}

TEST_CASE("backprop gradient matches central finite differences") {
  for (const std::vector<int>& sizes : {std::vector<int>{1, 1, 1}, std::vector<int>{2, 3, 1},
                                        std::vector<int>{3, 4, 4, 1}}) {
    Rng rng(42);
    MlpNet net = mlp_init(sizes, rng);
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 12; ++i) {
      std::vector<double> x(static_cast<std::size_t>(sizes.front()));
      for (auto& v : x) v = rng.uniform(-2, 2);
      X.push_back(std::move(x));
      y.push_back(rng.uniform01());
    }

    const auto analytic = mlp_grad_flat(net, X, y);
    const auto numeric = oracles::finite_difference_grad(
        mlp_param_count(net), [&](std::size_t i) { return mlp_param(net, i); },
        [&](std::size_t i, double v) { mlp_param(net, i) = v; },
        [&] { return mlp_loss(net, X, y); }, 1e-6);

    REQUIRE(analytic.size() == numeric.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
      CHECK(std::abs(analytic[i] - numeric[i]) / denom < 1e-4);
    }
  }
}

TEST_CASE("mlp learns a constant quality target") {
  Rng rng(5);
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  for (int i = 0; i < 128; ++i) {
    std::vector<double> x(16);
    for (auto& v : x) v = rng.normal();
    X.push_back(std::move(x));
    y.push_back(1.0);
  }
  MlpConfig cfg;
  cfg.hidden_layers = 1;
  cfg.batch_size = 2;
  cfg.epochs = 200;
  Rng trng(7);
  MlpNet net = mlp_init({16, 100, 1}, trng);
  mlp_train_net(net, X, y, cfg, trng);
  CHECK(mlp_loss(net, X, y) < 0.01);
}

TEST_CASE("mlp learns a separable half-space within 200 epochs") {
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  make_separable(16, 512, X, y);

  MlpConfig cfg;
  cfg.hidden_layers = 1;
  cfg.batch_size = 2;
  cfg.epochs = 200;
  Rng trng(7);
  MlpNet net = mlp_init({16, 100, 1}, trng);
  mlp_train_net(net, X, y, cfg, trng);
  CHECK(mlp_loss(net, X, y) < 0.05);
}

TEST_CASE("mlp training reports non-finite loss with the epoch") {
  std::vector<std::vector<double>> X = {{1.0, 2.0}, {0.5, -1.0}};
  std::vector<double> y = {1.0, 0.0};
  Rng rng(1);
  MlpNet net = mlp_init({2, 3, 1}, rng);
  net.weights[1][0] = std::numeric_limits<double>::quiet_NaN();
  MlpConfig cfg;
  cfg.epochs = 5;
  Rng trng(2);
  try {
    mlp_train_net(net, X, y, cfg, trng);
    FAIL("expected a non-finite loss error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("mlp training is deterministic per seed and varies across seeds") {
  const auto table = synth_generate(heterogeneous_synth_config(2, 40), 11);
  const EmbeddingProvider emb(table, 16);
  MlpConfig cfg;
  cfg.hidden_layers = 1;
  cfg.hidden_units = 8;
  cfg.epochs = 5;

  const auto a = QualityPredictor::train_mlp(table, emb, cfg, 100);
  const auto b = QualityPredictor::train_mlp(table, emb, cfg, 100);
  CHECK(a.to_json() == b.to_json());

  const auto c = QualityPredictor::train_mlp(table, emb, cfg, 101);
  CHECK(a.to_json() != c.to_json());
}

TEST_CASE("predictors serialize and reload bit-exactly") {
  const auto table = synth_generate(heterogeneous_synth_config(3, 30), 21);
  const EmbeddingProvider emb(table, 16);
  const auto dir = std::filesystem::temp_directory_path() / "routerbench_test_predictors";
  std::filesystem::create_directories(dir);

  MlpConfig mlp_cfg;
  mlp_cfg.hidden_layers = 1;
  mlp_cfg.hidden_units = 8;
  mlp_cfg.epochs = 5;

  const auto knn = QualityPredictor::train_knn(table, emb, {3}, 9);
  const auto mlp = QualityPredictor::train_mlp(table, emb, mlp_cfg, 9);

  for (const auto* p : {&knn, &mlp}) {
    const auto path = dir / (p->kind() + ".json");
    p->save(path);
    const auto loaded = QualityPredictor::load(path);
    CHECK(loaded.to_json() == p->to_json());
    for (const char* text : {"task t0 topic t0", "task t2 topic t2 detail f3"}) {
      const auto x = embed(text, 16);
      const auto a = p->predict_all(x);
      const auto b = loaded.predict_all(x);
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("predictor files are validated on load") {
  const auto dir = std::filesystem::temp_directory_path() / "routerbench_test_predictors_bad";
  std::filesystem::create_directories(dir);
  const auto path = dir / "bad.json";
  {
    std::ofstream out(path);
    out << R"({"format":"something-else"})" << "\n";
  }
  CHECK_THROWS_AS(QualityPredictor::load(path), ConfigError);
  CHECK_THROWS_AS(QualityPredictor::load(dir / "absent.json"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("predictions are clamped to the quality range") {
  const auto table = make_table({"a b c", "d e f"}, {"m"}, {{1.0, 0.0}});
  const EmbeddingProvider emb(table, 32);
  const auto p = QualityPredictor::train_knn(table, emb, {2}, 0);
  const auto out = p.predict_all(embed("a b c", 32));
  for (double v : out) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}
