#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "routerbench/embeddings.hpp"
#include "routerbench/predictors.hpp"
#include "routerbench/records.hpp"
#include "routerbench/routers.hpp"
#include "routerbench/synth.hpp"

using namespace routerbench;

namespace {

constexpr double kUnlimited = std::numeric_limits<double>::infinity();

InferenceRecord rec(const std::string& sample, const std::string& model, double quality,
                    double cost) {
  InferenceRecord r;
  r.sample_id = sample;
  r.eval_name = "unit";
  r.model_name = model;
  r.prompt = "p " + sample;
  r.model_response = "r";
  r.true_label = "x";
  r.quality = quality;
  r.cost = cost;
  return r;
}

}  // namespace

TEST_CASE("oracle routes to the best quality, then cheapest, then alphabetical") {
  const std::vector<InferenceRecord> unique_max = {rec("s", "A", 1, 2), rec("s", "B", 0, 1)};
  CHECK(oracle_route(unique_max).model_name == "A");

  const std::vector<InferenceRecord> quality_tie = {rec("s", "A", 1, 2), rec("s", "B", 1, 1)};
  CHECK(oracle_route(quality_tie).model_name == "B");

  const std::vector<InferenceRecord> full_tie = {rec("s", "B", 1, 1), rec("s", "A", 1, 1)};
  CHECK(oracle_route(full_tie).model_name == "A");

  CHECK_THROWS_AS(oracle_route(std::span<const InferenceRecord>{}), ConfigError);
}

TEST_CASE("willingness-to-pay score is exactly lambda*P - cost") {
  CHECK(score(0.9, 0.4, WillingnessToPay(0.0)) == -0.4);
  CHECK(std::abs(score(0.5, 0.3, WillingnessToPay(2.0)) - 0.7) < 1e-15);
  CHECK_THROWS_AS(WillingnessToPay(-1.0), ConfigError);
}

TEST_CASE("scaling all costs by alpha shifts the argmax to lambda*alpha") {
  Rng rng(3);
  for (int iter = 0; iter < 100; ++iter) {
    const int n = 4;
    std::vector<double> predictions, costs;
    for (int i = 0; i < n; ++i) {
      predictions.push_back(rng.uniform01());
      costs.push_back(rng.uniform(0.01, 2.0));
    }
    const double lambda = rng.uniform(0.0, 5.0);
    const double alpha = rng.uniform(0.1, 10.0);

    auto argmax = [&](double lam, double cost_scale) {
      int best = 0;
      double best_score = -1e300;
      for (int i = 0; i < n; ++i) {
        const double s = score(predictions[static_cast<std::size_t>(i)],
                               cost_scale * costs[static_cast<std::size_t>(i)],
                               WillingnessToPay(lam));
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      return best;
    };
    CHECK(argmax(lambda, 1.0) == argmax(alpha * lambda, alpha));
  }
}

TEST_CASE("predictive routing: lambda extremes and monotone selected quality") {
  const auto table = synth_generate(heterogeneous_synth_config(4, 200), 17);
  SplitSpec spec;
  spec.seed = 5;
  const auto [train, test] = split(table, spec);
  const EmbeddingProvider train_emb(train, 32);
  const auto predictor = QualityPredictor::train_knn(train, train_emb, {5}, 0);

  // cheapest model by training mean cost, ties alphabetical
  std::size_t cheapest = 0;
  for (std::size_t mi = 1; mi < predictor.models().size(); ++mi)
    if (predictor.model_costs()[mi] < predictor.model_costs()[cheapest]) cheapest = mi;
  const std::string cheapest_name = predictor.models()[cheapest];

  const EmbeddingProvider test_emb(test, 32);
  std::vector<double> lambda_grid;
  for (int i = 0; i < 12; ++i) lambda_grid.push_back(std::pow(10.0, -3.0 + 0.5 * i));

  for (std::size_t si = 0; si < test.n_samples(); ++si) {
    const auto& x = test_emb.sample_embedding(si);
    CHECK(predictive_route(predictor, x, WillingnessToPay(0.0)) == cheapest_name);

    const auto predictions = predictor.predict_all(x);
    double previous = -1.0;
    for (const double lambda : lambda_grid) {
      const auto choice = predictive_route(predictor, x, WillingnessToPay(lambda));
      const auto mi = static_cast<std::size_t>(
          std::find(predictor.models().begin(), predictor.models().end(), choice) -
          predictor.models().begin());
      CHECK(predictions[mi] >= previous - 1e-12);
      previous = predictions[mi];
    }

    // enormous lambda selects the max prediction (alphabetical on ties)
    const auto choice = predictive_route(predictor, x, WillingnessToPay(1e9));
    double best = *std::max_element(predictions.begin(), predictions.end());
    const auto mi = static_cast<std::size_t>(
        std::find(predictor.models().begin(), predictor.models().end(), choice) -
        predictor.models().begin());
    CHECK(predictions[mi] == best);
  }
}

TEST_CASE("judge with zero error is the identity, with full error the complement") {
  JudgeConfig j;
  j.error_rate = 0.0;
  CHECK(judge_eval(j, 0.8, 0.99) == 0.8);
  j.error_rate = 1.0;
  CHECK(judge_eval(j, 0.8, 0.0) == std::abs(1.0 - 0.8));
  CHECK_THROWS_AS([] { JudgeConfig bad; bad.threshold = 1.5; bad.check(); }(), ConfigError);
  CHECK_THROWS_AS([] { JudgeConfig bad; bad.error_rate = -0.1; bad.check(); }(), ConfigError);
}

TEST_CASE("judge flip frequency matches epsilon over many keyed draws") {
  JudgeConfig j;
  j.error_rate = 0.3;
  j.seed = 99;
  std::size_t flips = 0;
  const std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) {
    const double draw = keyed_uniform(j.seed, "sample-" + std::to_string(i), 0);
    if (judge_eval(j, 1.0, draw) == 0.0) ++flips;
  }
  const double freq = static_cast<double>(flips) / static_cast<double>(n);
  CHECK(std::abs(freq - 0.3) < 0.01);
}

TEST_CASE("cascade accepts the first passing model and pays as it goes") {
  CascadeConfig cfg;
  cfg.sequence = {"cheap", "mid", "dear"};
  cfg.judge.error_rate = 0.0;

  const std::vector<InferenceRecord> first_hit = {
      rec("s", "cheap", 1, 0.1), rec("s", "mid", 1, 0.4), rec("s", "dear", 1, 1.0)};
  const auto a = cascade_route(cfg, first_hit);
  CHECK(a.model == "cheap");
  CHECK(a.cumulative_cost == 0.1);
  CHECK(a.flags.empty());

  const std::vector<InferenceRecord> second_hit = {
      rec("s", "cheap", 0, 0.1), rec("s", "mid", 1, 0.4), rec("s", "dear", 1, 1.0)};
  const auto b = cascade_route(cfg, second_hit);
  CHECK(b.model == "mid");
  CHECK(b.cumulative_cost == 0.5);
  CHECK(b.flags.empty());
}

TEST_CASE("cascade stops when the next query would burst the budget") {
  CascadeConfig cfg;
  cfg.sequence = {"cheap", "dear"};
  cfg.budget = 0.5;

  const std::vector<InferenceRecord> records = {rec("s", "cheap", 0, 0.2),
                                                rec("s", "dear", 1, 0.4)};
  const auto out = cascade_route(cfg, records);
  CHECK(out.model == "cheap");
  CHECK(out.cumulative_cost == 0.2);
  CHECK(out.flags == "budget");

  cfg.budget = 0.1;  // cannot even afford the first query
  CHECK_THROWS_AS(cascade_route(cfg, records), ConfigError);
}

TEST_CASE("cascade flags an exhausted sequence") {
  CascadeConfig cfg;
  cfg.sequence = {"cheap", "dear"};
  const std::vector<InferenceRecord> records = {rec("s", "cheap", 0, 0.2),
                                                rec("s", "dear", 0, 0.4)};
  const auto out = cascade_route(cfg, records);
  CHECK(out.model == "dear");
  CHECK(out.cumulative_cost == 0.2 + 0.4);
  CHECK(out.flags == "exhausted");
}

TEST_CASE("cascade spend never exceeds budget plus the first query") {
  const auto table = synth_generate(heterogeneous_synth_config(4, 300), 23);
  const auto cfg = make_cascade_config(aggregate_model_stats(table), 1.0, {});
  for (std::size_t si = 0; si < table.n_samples(); ++si) {
    const auto records = table.sample_records(si);
    double first_cost = 0.0;
    for (const auto& r : records)
      if (r.model_name == cfg.sequence.front()) first_cost = r.cost;
    const auto out = cascade_route(cfg, records);
    CHECK(out.cumulative_cost <= cfg.budget + first_cost + 1e-12);
  }
}

TEST_CASE("perfect-judge cascade with unlimited budget matches oracle quality per sample") {
  const auto table = synth_generate(heterogeneous_synth_config(5, 1000), 31);
  const auto cfg = make_cascade_config(aggregate_model_stats(table), kUnlimited, {});

  for (std::size_t si = 0; si < table.n_samples(); ++si) {
    const auto records = table.sample_records(si);
    const auto out = cascade_route(cfg, records);
    double chosen_quality = 0.0;
    for (const auto& r : records)
      if (r.model_name == out.model) chosen_quality = r.quality;
    CHECK(chosen_quality == oracle_route(records).quality);
  }
}

TEST_CASE("cascade sequences order by ascending training mean cost") {
  const std::vector<ModelStats> stats = {
      {"zeta", 0.5, 0.5}, {"alpha", 0.5, 0.9}, {"pricey", 2.0, 0.9}, {"tiny", 0.1, 0.2}};
  const auto cfg = make_cascade_config(stats, kUnlimited, {});
  const std::vector<std::string> expected = {"tiny", "alpha", "zeta", "pricey"};
  CHECK(cfg.sequence == expected);

  CHECK_THROWS_AS(make_cascade_config({}, kUnlimited, {}), ConfigError);
  CHECK_THROWS_AS(make_cascade_config(stats, 0.0, {}), ConfigError);
}

TEST_CASE("rerank pays for every model and returns the oracle choice") {
  const std::vector<InferenceRecord> records = {rec("s", "A", 0, 1.0), rec("s", "B", 1, 2.0)};
  const auto out = rerank_route(records);
  CHECK(out.model == "B");
  CHECK(out.cumulative_cost == 3.0);

  const auto table = synth_generate(heterogeneous_synth_config(4, 200), 37);
  const auto cfg = make_cascade_config(aggregate_model_stats(table), kUnlimited, {});
  for (std::size_t si = 0; si < table.n_samples(); ++si) {
    const auto records_si = table.sample_records(si);
    const auto reranked = rerank_route(records_si);
    CHECK(reranked.model == oracle_route(records_si).model_name);
    CHECK(reranked.cumulative_cost >= cascade_route(cfg, records_si).cumulative_cost - 1e-12);
  }
}

TEST_CASE("per-sample oracle quality dominates any fixed-model policy") {
  const auto table = synth_generate(heterogeneous_synth_config(5, 400), 41);
  for (std::size_t si = 0; si < table.n_samples(); ++si) {
    const auto records = table.sample_records(si);
    const double oracle_q = oracle_route(records).quality;
    for (const auto& r : records) CHECK(oracle_q >= r.quality);
  }
}
