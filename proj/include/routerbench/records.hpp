#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "routerbench/errors.hpp"
#include "routerbench/rng.hpp"

namespace routerbench {

// One recorded (sample, model) inference outcome.
struct InferenceRecord {
  std::string sample_id;
  std::string eval_name;
  std::string model_name;
  std::string prompt;
  std::string model_response;
  std::string true_label;
  double quality = 0.0;  // in [0,1]; the file schema calls this "performance"
  double cost = 0.0;     // dollars, >= 0
  std::optional<std::vector<double>> embedding;

  friend bool operator==(const InferenceRecord&, const InferenceRecord&) = default;
};

namespace detail {

inline void check_record_fields(const InferenceRecord& r, std::vector<std::string>& violations,
                                const std::string& where) {
  if (r.sample_id.empty())
    violations.push_back(where + "field 'sample_id' must be non-empty");
  if (r.model_name.empty())
    violations.push_back(where + "field 'model_name' must be non-empty");
  if (!std::isfinite(r.quality) || r.quality < 0.0 || r.quality > 1.0)
    violations.push_back(where + "field 'performance' out of range [0,1] (got " +
                         std::to_string(r.quality) + ")");
  if (!std::isfinite(r.cost) || r.cost < 0.0)
    violations.push_back(where + "field 'cost' must be finite and >= 0 (got " +
                         std::to_string(r.cost) + ")");
}

}  // namespace detail

// A complete matrix of inference records: every (sample, model) pair in
// sample_set x model_set appears exactly once. Immutable after
// construction; records are stored sample-major in (sample_id, model_name)
// order, so record(si, mi) is records()[si * n_models() + mi].
class RecordTable {
 public:
  // Validates and canonicalizes. With allow_missing, samples that do not
  // cover the full model set are dropped (count reported via dropped);
  // otherwise an incomplete matrix is an error listing the missing pairs.
  static RecordTable from_records(std::vector<InferenceRecord> recs, bool allow_missing = false,
                                  std::size_t* dropped = nullptr) {
    std::vector<std::string> violations;
    for (const auto& r : recs) detail::check_record_fields(r, violations, "");

    std::sort(recs.begin(), recs.end(), [](const InferenceRecord& a, const InferenceRecord& b) {
      if (a.sample_id != b.sample_id) return a.sample_id < b.sample_id;
      return a.model_name < b.model_name;
    });
    for (std::size_t i = 1; i < recs.size(); ++i) {
      if (recs[i].sample_id == recs[i - 1].sample_id &&
          recs[i].model_name == recs[i - 1].model_name)
        violations.push_back("duplicate record for (" + recs[i].sample_id + ", " +
                             recs[i].model_name + ")");
    }
    if (recs.empty()) violations.push_back("no records");
    if (!violations.empty())
      throw ValidationError("invalid record table", std::move(violations));

    RecordTable t;
    for (const auto& r : recs) t.models_.push_back(r.model_name);
    std::sort(t.models_.begin(), t.models_.end());
    t.models_.erase(std::unique(t.models_.begin(), t.models_.end()), t.models_.end());

    // Group by sample and check coverage of the full model set.
    std::size_t dropped_count = 0;
    std::size_t i = 0;
    while (i < recs.size()) {
      std::size_t j = i;
      while (j < recs.size() && recs[j].sample_id == recs[i].sample_id) ++j;
      bool complete = (j - i) == t.models_.size();
      if (complete) {
        for (std::size_t k = 0; k < t.models_.size(); ++k)
          if (recs[i + k].model_name != t.models_[k]) complete = false;
      }
      if (!complete) {
        if (allow_missing) {
          ++dropped_count;
          i = j;
          continue;
        }
        std::size_t k = 0;
        for (const auto& m : t.models_) {
          if (i + k < j && recs[i + k].model_name == m) {
            ++k;
            continue;
          }
          violations.push_back("incomplete matrix: missing record for (" + recs[i].sample_id +
                               ", " + m + ")");
        }
        i = j;
        continue;
      }
      for (std::size_t k = 1; k < j - i; ++k) {
        if (recs[i + k].eval_name != recs[i].eval_name)
          violations.push_back("inconsistent eval_name for sample " + recs[i].sample_id);
      }
      t.samples_.push_back(recs[i].sample_id);
      t.evals_.push_back(recs[i].eval_name);
      for (std::size_t k = 0; k < j - i; ++k) t.records_.push_back(std::move(recs[i + k]));
      i = j;
    }

    // Embedding dimensions must agree wherever embeddings are present.
    std::optional<std::size_t> dim;
    for (const auto& r : t.records_) {
      if (!r.embedding) continue;
      if (!dim) dim = r.embedding->size();
      if (r.embedding->size() != *dim) {
        violations.push_back("embedding dimension mismatch for (" + r.sample_id + ", " +
                             r.model_name + "): got " + std::to_string(r.embedding->size()) +
                             ", expected " + std::to_string(*dim));
        break;
      }
    }
    if (t.samples_.empty() && allow_missing)
      violations.push_back("no complete samples remain after dropping incomplete ones");
    if (!violations.empty())
      throw ValidationError("invalid record table", std::move(violations));
    t.embedding_dim_ = dim;
    if (dropped) *dropped = dropped_count;
    return t;
  }

  std::size_t n_samples() const { return samples_.size(); }
  std::size_t n_models() const { return models_.size(); }
  const std::vector<std::string>& samples() const { return samples_; }
  const std::vector<std::string>& models() const { return models_; }
  const std::vector<InferenceRecord>& records() const { return records_; }

  const InferenceRecord& record(std::size_t sample_idx, std::size_t model_idx) const {
    return records_[sample_idx * models_.size() + model_idx];
  }

  std::span<const InferenceRecord> sample_records(std::size_t sample_idx) const {
    return {records_.data() + sample_idx * models_.size(), models_.size()};
  }

  const std::string& sample_eval(std::size_t sample_idx) const { return evals_[sample_idx]; }

  std::optional<std::size_t> model_index(std::string_view name) const {
    const auto it = std::lower_bound(models_.begin(), models_.end(), name);
    if (it == models_.end() || *it != name) return std::nullopt;
    return static_cast<std::size_t>(it - models_.begin());
  }

  // Distinct eval_name values in first-seen (sample-sorted) order.
  std::vector<std::string> eval_names() const {
    std::vector<std::string> out;
    for (const auto& e : evals_)
      if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
    return out;
  }

  std::optional<std::size_t> embedding_dim() const { return embedding_dim_; }

  friend bool operator==(const RecordTable& a, const RecordTable& b) {
    return a.records_ == b.records_;
  }

 private:
  std::vector<std::string> samples_;  // sorted
  std::vector<std::string> evals_;    // aligned to samples_
  std::vector<std::string> models_;   // sorted
  std::vector<InferenceRecord> records_;
  std::optional<std::size_t> embedding_dim_;
};

struct LoadOptions {
  bool allow_missing = false;
  std::size_t max_violations = 200;  // stop collecting past this
};

struct LoadResult {
  RecordTable table;
  std::vector<std::string> warnings;
  std::size_t dropped_samples = 0;
};

// Reads a line-delimited record file: one JSON object per line with keys
// sample_id, eval_name, model_name, prompt, model_response, performance,
// cost, true_label and optional embedding (array of reals). Unknown keys
// are ignored with a warning (once per key). Throws ValidationError
// carrying every collected violation.
inline LoadResult load_table(std::istream& in, const LoadOptions& opts = {}) {
  using nlohmann::json;
  static const char* kKnown[] = {"sample_id",      "eval_name", "model_name",
                                 "prompt",         "model_response", "performance",
                                 "cost",           "true_label",     "embedding"};

  std::vector<InferenceRecord> recs;
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
  std::map<std::string, std::size_t> unknown_keys;  // key -> first line

  auto violate = [&](std::size_t line, const std::string& msg) {
    if (violations.size() < opts.max_violations)
      violations.push_back("line " + std::to_string(line) + ": " + msg);
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
      violate(lineno, "malformed record (not a JSON object)");
      continue;
    }

    for (const auto& [key, _] : j.items()) {
      if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown))
        unknown_keys.emplace(key, lineno);
    }

    InferenceRecord r;
    bool ok = true;
    auto text_field = [&](const char* key, std::string& out, bool required) {
      if (!j.contains(key)) {
        if (required) {
          violate(lineno, std::string("missing field '") + key + "'");
          ok = false;
        }
        return;
      }
      const auto& v = j.at(key);
      if (v.is_string())
        out = v.get<std::string>();
      else if (v.is_boolean())
        out = v.get<bool>() ? "True" : "False";
      else if (v.is_number())
        out = v.dump();
      else {
        violate(lineno, std::string("field '") + key + "' must be text");
        ok = false;
      }
    };
    auto id_field = [&](const char* key, std::string& out) {
      if (!j.contains(key) || !j.at(key).is_string() || j.at(key).get<std::string>().empty()) {
        violate(lineno, std::string("field '") + key + "' must be a non-empty string");
        ok = false;
        return;
      }
      out = j.at(key).get<std::string>();
    };

    id_field("sample_id", r.sample_id);
    id_field("model_name", r.model_name);
    text_field("eval_name", r.eval_name, true);
    text_field("prompt", r.prompt, true);
    text_field("model_response", r.model_response, true);
    text_field("true_label", r.true_label, true);

    if (!j.contains("performance")) {
      violate(lineno, "missing field 'performance'");
      ok = false;
    } else if (j.at("performance").is_boolean()) {
      r.quality = j.at("performance").get<bool>() ? 1.0 : 0.0;
    } else if (j.at("performance").is_number()) {
      r.quality = j.at("performance").get<double>();
      if (!(r.quality >= 0.0 && r.quality <= 1.0)) {
        violate(lineno, "field 'performance' out of range [0,1] (got " +
                            j.at("performance").dump() + ")");
        ok = false;
      }
    } else {
      violate(lineno, "field 'performance' must be a number in [0,1]");
      ok = false;
    }

    if (!j.contains("cost") || !j.at("cost").is_number()) {
      violate(lineno, "field 'cost' must be a number");
      ok = false;
    } else {
      r.cost = j.at("cost").get<double>();
      if (!(std::isfinite(r.cost) && r.cost >= 0.0)) {
        violate(lineno, "field 'cost' must be finite and >= 0 (got " + j.at("cost").dump() + ")");
        ok = false;
      }
    }

    if (j.contains("embedding")) {
      const auto& e = j.at("embedding");
      if (!e.is_array()) {
        violate(lineno, "field 'embedding' must be an array of reals");
        ok = false;
      } else {
        std::vector<double> vals;
        vals.reserve(e.size());
        for (const auto& x : e) {
          if (!x.is_number()) {
            violate(lineno, "field 'embedding' must be an array of reals");
            ok = false;
            break;
          }
          vals.push_back(x.get<double>());
        }
        if (ok) r.embedding = std::move(vals);
      }
    }

    if (ok) recs.push_back(std::move(r));
  }

  for (const auto& [key, first_line] : unknown_keys)
    warnings.push_back("unknown key '" + key + "' ignored (first seen on line " +
                       std::to_string(first_line) + ")");

  LoadResult result{RecordTable{}, std::move(warnings), 0};
  try {
    result.table = RecordTable::from_records(std::move(recs), opts.allow_missing,
                                             &result.dropped_samples);
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations())
      if (violations.size() < opts.max_violations) violations.push_back(v);
    throw ValidationError("invalid record file", std::move(violations));
  }
  if (!violations.empty())
    throw ValidationError("invalid record file", std::move(violations));
  return result;
}

// Writes the table in the same line-delimited format; load_table(emit_table(t))
// reproduces t exactly (doubles round-trip).
inline void emit_table(const RecordTable& table, std::ostream& out) {
  using ordered = nlohmann::ordered_json;
  for (const auto& r : table.records()) {
    ordered j;
    j["sample_id"] = r.sample_id;
    j["eval_name"] = r.eval_name;
    j["model_name"] = r.model_name;
    j["prompt"] = r.prompt;
    j["model_response"] = r.model_response;
    j["performance"] = r.quality;
    j["cost"] = r.cost;
    j["true_label"] = r.true_label;
    if (r.embedding) j["embedding"] = *r.embedding;
    out << j.dump() << '\n';
  }
}

// Per-model expected cost and quality over all samples of a table.
struct ModelStats {
  std::string model_name;
  double mean_cost = 0.0;
  double mean_quality = 0.0;
};

inline std::vector<ModelStats> aggregate_model_stats(const RecordTable& table) {
  std::vector<ModelStats> stats;
  stats.reserve(table.n_models());
  for (std::size_t mi = 0; mi < table.n_models(); ++mi) {
    double cost_sum = 0.0, quality_sum = 0.0;
    for (std::size_t si = 0; si < table.n_samples(); ++si) {
      const auto& r = table.record(si, mi);
      cost_sum += r.cost;
      quality_sum += r.quality;
    }
    const double n = static_cast<double>(table.n_samples());
    stats.push_back({table.models()[mi], cost_sum / n, quality_sum / n});
  }
  return stats;
}

// How to partition a table into train/test sides.
struct SplitSpec {
  enum class Mode { RandomBySample, ByEvalName };
  Mode mode = Mode::RandomBySample;
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
  std::vector<std::string> held_out_evals;  // test side, ByEvalName mode
};

// Partitions by sample: every record of a sample lands on the same side,
// sides are disjoint, and their union is the input. Same seed, same split.
inline std::pair<RecordTable, RecordTable> split(const RecordTable& table, const SplitSpec& spec) {
  const std::size_t n = table.n_samples();
  std::vector<bool> in_train(n, false);

  if (spec.mode == SplitSpec::Mode::RandomBySample) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
      throw ConfigError("split: train_fraction must be in (0,1)");
    const auto train_count =
        static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
    if (train_count == 0 || train_count >= n)
      throw ConfigError("split: train_fraction " + std::to_string(spec.train_fraction) +
                        " yields an empty side for " + std::to_string(n) + " samples");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(spec.seed);
    rng.shuffle(order);
    for (std::size_t i = 0; i < train_count; ++i) in_train[order[i]] = true;
  } else {
    const auto observed = table.eval_names();
    for (const auto& name : spec.held_out_evals)
      if (std::find(observed.begin(), observed.end(), name) == observed.end())
        throw ConfigError("split: unknown held-out eval name '" + name + "'");
    for (std::size_t i = 0; i < n; ++i) {
      in_train[i] = std::find(spec.held_out_evals.begin(), spec.held_out_evals.end(),
                              table.sample_eval(i)) == spec.held_out_evals.end();
    }
    const auto train_count = static_cast<std::size_t>(
        std::count(in_train.begin(), in_train.end(), true));
    if (train_count == 0 || train_count == n)
      throw ConfigError("split: held-out eval list yields an empty side");
  }

  std::vector<InferenceRecord> train_recs, test_recs;
  for (std::size_t si = 0; si < n; ++si) {
    auto recs = table.sample_records(si);
    auto& dst = in_train[si] ? train_recs : test_recs;
    dst.insert(dst.end(), recs.begin(), recs.end());
  }
  return {RecordTable::from_records(std::move(train_recs)),
          RecordTable::from_records(std::move(test_recs))};
}

}  // namespace routerbench
