#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "routerbench/embeddings.hpp"
#include "routerbench/errors.hpp"
#include "routerbench/records.hpp"
#include "routerbench/rng.hpp"

namespace routerbench {

// Quality profile of one synthetic model.
//
//   bernoulli: quality is 1 with probability p, else 0 (iid per sample).
//   beta:      quality ~ Beta(alpha, beta), a graded score in (0,1).
//   topic:     samples carry a topic; the model answers its own specialty
//              topic correctly with probability p_match and any other
//              topic with probability p_other. With staggered specialties
//              and p_match >> p_other no single model dominates, which is
//              the heterogeneous regime used by the evaluation tests.
struct SynthModelConfig {
  enum class Profile { Bernoulli, Beta, Topic };

  std::string name;
  double cost_scale = 1.0;  // per-record cost is cost_scale * U[0.75, 1.25)
  Profile profile = Profile::Bernoulli;
  double p = 0.5;                      // bernoulli
  double alpha = 2.0, beta = 2.0;      // beta
  double p_match = 0.9, p_other = 0.2; // topic
  int specialty = -1;                  // topic; -1 = model index % topics
};

struct SynthConfig {
  std::size_t n_samples = 100;
  std::vector<SynthModelConfig> models;
  int topics = 0;  // 0 = one topic per model
  int evals = 1;   // samples are assigned round-robin to eval0..eval{n-1}
  int embedding_dim = 0;  // > 0 attaches hashed prompt embeddings
  std::string eval_prefix = "eval";
};

namespace detail {

inline void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ConfigError("synth: " + what + " must be in [0,1]");
}

inline std::string zero_pad(std::size_t value, std::size_t width) {
  std::string s = std::to_string(value);
  return s.size() >= width ? s : std::string(width - s.size(), '0') + s;
}

}  // namespace detail

// Builds a complete, deterministic table of synthetic inference records.
// Per-record draws are keyed on (seed, sample, model), so the output is
// independent of generation order. Prompts embed the sample's topic words,
// which is what makes the topic profile learnable from prompt features.
inline RecordTable synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
  if (cfg.n_samples == 0) throw ConfigError("synth: sample count must be positive");
  if (cfg.models.empty()) throw ConfigError("synth: at least one model is required");
  if (cfg.evals <= 0) throw ConfigError("synth: eval count must be positive");
  if (cfg.embedding_dim < 0) throw ConfigError("synth: embedding dimension must be >= 0");
  if (cfg.embedding_dim > 0 && cfg.embedding_dim < 8)
    throw ConfigError("synth: embedding dimension must be >= 8");
  const int topics = cfg.topics > 0 ? cfg.topics : static_cast<int>(cfg.models.size());

  for (std::size_t j = 0; j < cfg.models.size(); ++j) {
    const auto& m = cfg.models[j];
    if (m.name.empty()) throw ConfigError("synth: model names must be non-empty");
    if (!(m.cost_scale >= 0.0)) throw ConfigError("synth: cost scale must be >= 0");
    switch (m.profile) {
      case SynthModelConfig::Profile::Bernoulli:
        detail::check_probability(m.p, "bernoulli p");
        break;
      case SynthModelConfig::Profile::Beta:
        if (!(m.alpha > 0.0 && m.beta > 0.0))
          throw ConfigError("synth: beta parameters must be positive");
        break;
      case SynthModelConfig::Profile::Topic:
        detail::check_probability(m.p_match, "topic p_match");
        detail::check_probability(m.p_other, "topic p_other");
        break;
    }
    for (std::size_t k = j + 1; k < cfg.models.size(); ++k)
      if (cfg.models[k].name == m.name)
        throw ConfigError("synth: duplicate model name '" + m.name + "'");
  }

  const std::size_t width = std::to_string(cfg.n_samples - 1).size();
  std::vector<InferenceRecord> recs;
  recs.reserve(cfg.n_samples * cfg.models.size());

  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    const int topic = static_cast<int>(i % static_cast<std::size_t>(topics));
    const std::string eval_name =
        cfg.eval_prefix + std::to_string(i % static_cast<std::size_t>(cfg.evals));
    const std::string sample_id = eval_name + ".s" + detail::zero_pad(i, width);
    const std::string prompt = "task t" + std::to_string(topic) + " topic t" +
                               std::to_string(topic) + " detail f" + std::to_string(i % 11) +
                               " g" + std::to_string((i * 5 + static_cast<std::size_t>(topic)) % 13);
    const std::string true_label = "t" + std::to_string(topic);

    for (std::size_t j = 0; j < cfg.models.size(); ++j) {
      const auto& m = cfg.models[j];
      Rng rng(mix64(mix64(seed ^ 0xA11CEull) + i * cfg.models.size() + j));

      double quality = 0.0;
      switch (m.profile) {
        case SynthModelConfig::Profile::Bernoulli:
          quality = rng.uniform01() < m.p ? 1.0 : 0.0;
          break;
        case SynthModelConfig::Profile::Beta:
          quality = std::clamp(rng.beta(m.alpha, m.beta), 0.0, 1.0);
          break;
        case SynthModelConfig::Profile::Topic: {
          const int specialty =
              m.specialty >= 0 ? m.specialty : static_cast<int>(j % static_cast<std::size_t>(topics));
          const double p = topic == specialty ? m.p_match : m.p_other;
          quality = rng.uniform01() < p ? 1.0 : 0.0;
          break;
        }
      }

      InferenceRecord r;
      r.sample_id = sample_id;
      r.eval_name = eval_name;
      r.model_name = m.name;
      r.prompt = prompt;
      r.true_label = true_label;
      r.quality = quality;
      r.model_response = quality >= 0.5 ? true_label : "wrong-" + std::to_string(topic);
      r.cost = m.cost_scale * (0.75 + 0.5 * rng.uniform01());
      if (cfg.embedding_dim > 0)
        r.embedding = embed(prompt, cfg.embedding_dim).values;
      recs.push_back(std::move(r));
    }
  }
  return RecordTable::from_records(std::move(recs));
}

// The heterogeneous table used throughout the evaluation tests: staggered
// topic specialists over geometric cost tiers, so the best model differs
// per sample and no single model dominates the cost-quality plane.
inline SynthConfig heterogeneous_synth_config(std::size_t n_models = 5,
                                              std::size_t n_samples = 1000) {
  SynthConfig cfg;
  cfg.n_samples = n_samples;
  cfg.topics = static_cast<int>(n_models);
  double cost = 0.1;
  for (std::size_t j = 0; j < n_models; ++j) {
    SynthModelConfig m;
    m.name = "m" + detail::zero_pad(j, 2);
    m.profile = SynthModelConfig::Profile::Topic;
    m.cost_scale = cost;
    cost *= 2.0;
    m.p_match = 0.85 + 0.02 * static_cast<double>(j);
    m.p_other = 0.15 + 0.05 * static_cast<double>(j);
    cfg.models.push_back(m);
  }
  return cfg;
}

}  // namespace routerbench
