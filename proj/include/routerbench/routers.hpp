#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "routerbench/embeddings.hpp"
#include "routerbench/errors.hpp"
#include "routerbench/predictors.hpp"
#include "routerbench/records.hpp"
#include "routerbench/rng.hpp"

namespace routerbench {

// The per-sample upper bound: route to the best-quality record, breaking
// quality ties toward the cheaper model and remaining ties alphabetically.
inline const InferenceRecord& oracle_route(std::span<const InferenceRecord> sample_records) {
  if (sample_records.empty()) throw ConfigError("oracle_route: empty record set");
  const InferenceRecord* best = &sample_records.front();
  for (const auto& r : sample_records.subspan(1)) {
    if (r.quality > best->quality ||
        (r.quality == best->quality &&
         (r.cost < best->cost || (r.cost == best->cost && r.model_name < best->model_name))))
      best = &r;
  }
  return *best;
}

// Willingness to pay: how many dollars one unit of predicted quality is
// worth when scoring a candidate model.
class WillingnessToPay {
 public:
  explicit WillingnessToPay(double lambda) : lambda_(lambda) {
    if (!std::isfinite(lambda) || lambda < 0.0)
      throw ConfigError("willingness to pay must be finite and >= 0");
  }
  double lambda() const { return lambda_; }

 private:
  double lambda_;
};

inline double score(double predicted_quality, double model_cost, WillingnessToPay wtp) {
  return wtp.lambda() * predicted_quality - model_cost;
}

// Argmax of score(P_j, cost_j, lambda) over the predictor's models; ties go
// to the lexicographically smallest model name (models() is sorted).
inline std::string predictive_route(const QualityPredictor& predictor, const EmbeddingVector& x,
                                    WillingnessToPay wtp) {
  const auto predictions = predictor.predict_all(x);
  const auto& costs = predictor.model_costs();
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t mi = 0; mi < predictions.size(); ++mi) {
    const double s = score(predictions[mi], costs[mi], wtp);
    if (s > best_score) {
      best_score = s;
      best = mi;
    }
  }
  return predictor.models()[best];
}

// The simulated judge: reads the recorded quality g(o) and reports it,
// except that with probability error_rate it reports 1 - g(o). An output
// is accepted when the reported score exceeds the threshold.
struct JudgeConfig {
  double threshold = 0.5;   // in (0,1)
  double error_rate = 0.0;  // epsilon in [0,1]
  std::uint64_t seed = 0;

  void check() const {
    if (!(threshold > 0.0 && threshold < 1.0))
      throw ConfigError("judge: threshold must be in (0,1)");
    if (!(error_rate >= 0.0 && error_rate <= 1.0))
      throw ConfigError("judge: error rate must be in [0,1]");
  }
};

// draw is a uniform [0,1) variate; the caller derives it from
// (seed, sample_id, position) so replays are order-independent.
inline double judge_eval(const JudgeConfig& judge, double true_quality, double draw) {
  return draw < judge.error_rate ? 1.0 - true_quality : true_quality;
}

// Cascade over a cheapest-first model sequence with a cumulative budget.
struct CascadeConfig {
  std::vector<std::string> sequence;  // ascending training-split mean cost
  double budget = std::numeric_limits<double>::infinity();  // T, > 0
  JudgeConfig judge;

  void check() const {
    if (sequence.empty()) throw ConfigError("cascade: empty model sequence");
    if (!(budget > 0.0)) throw ConfigError("cascade: budget must be positive");
    judge.check();
  }
};

// Sequence ordered by ascending mean cost on the reference (training)
// split; cost ties break alphabetically.
inline CascadeConfig make_cascade_config(const std::vector<ModelStats>& training_stats,
                                         double budget, JudgeConfig judge) {
  if (training_stats.empty()) throw ConfigError("cascade: no model stats");
  std::vector<ModelStats> order = training_stats;
  std::sort(order.begin(), order.end(), [](const ModelStats& a, const ModelStats& b) {
    if (a.mean_cost != b.mean_cost) return a.mean_cost < b.mean_cost;
    return a.model_name < b.model_name;
  });
  CascadeConfig cfg;
  for (const auto& s : order) cfg.sequence.push_back(s.model_name);
  cfg.budget = budget;
  cfg.judge = judge;
  cfg.check();
  return cfg;
}

struct RouteOutcome {
  std::string model;
  double cumulative_cost = 0.0;
  std::string flags;  // "", "budget", or "exhausted"
};

// Walks the sequence cheapest-first, paying each queried model's recorded
// cost. Stops at the first output the judge accepts, or when querying the
// next model would push the cumulative spend over the budget, or when the
// sequence runs out; the last two outcomes are flagged. The reported cost
// is the full cumulative spend.
inline RouteOutcome cascade_route(const CascadeConfig& cfg,
                                  std::span<const InferenceRecord> sample_records) {
  cfg.check();
  if (sample_records.empty()) throw ConfigError("cascade_route: empty record set");
  const std::string_view sample_id = sample_records.front().sample_id;

  auto record_of = [&](const std::string& model) -> const InferenceRecord& {
    for (const auto& r : sample_records)
      if (r.model_name == model) return r;
    throw ConfigError("cascade_route: model '" + model + "' missing from sample " +
                      std::string(sample_id));
  };

  const InferenceRecord* first = &record_of(cfg.sequence.front());
  if (first->cost > cfg.budget)
    throw ConfigError("cascade_route: budget " + std::to_string(cfg.budget) +
                      " cannot afford the first model on sample " + std::string(sample_id));

  double spent = 0.0;
  const InferenceRecord* current = nullptr;
  for (std::size_t pos = 0; pos < cfg.sequence.size(); ++pos) {
    current = pos == 0 ? first : &record_of(cfg.sequence[pos]);
    spent += current->cost;
    const double draw = keyed_uniform(cfg.judge.seed, sample_id, pos);
    if (judge_eval(cfg.judge, current->quality, draw) > cfg.judge.threshold)
      return {current->model_name, spent, ""};
    if (pos + 1 < cfg.sequence.size()) {
      const double next_cost = record_of(cfg.sequence[pos + 1]).cost;
      if (spent + next_cost > cfg.budget)
        return {current->model_name, spent, "budget"};
    }
  }
  return {current->model_name, spent, "exhausted"};
}

// Overgenerate-and-rerank: every model is invoked and paid for, and the
// oracle rule picks the output to return.
inline RouteOutcome rerank_route(std::span<const InferenceRecord> sample_records) {
  if (sample_records.empty()) throw ConfigError("rerank_route: empty record set");
  double total = 0.0;
  for (const auto& r : sample_records) total += r.cost;
  return {oracle_route(sample_records).model_name, total, ""};
}

}  // namespace routerbench
