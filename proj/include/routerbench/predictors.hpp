#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "routerbench/embeddings.hpp"
#include "routerbench/errors.hpp"
#include "routerbench/records.hpp"
#include "routerbench/rng.hpp"

namespace routerbench {

struct KnnConfig {
  int k = 40;
};

struct MlpConfig {
  int hidden_layers = 2;
  int hidden_units = 100;
  double learning_rate = 0.001;
  int epochs = 100;
  int batch_size = 32;
};

// Dense feed-forward net: rectifier hidden layers, logistic scalar output.
// Plain loops keep the arithmetic order fixed, so training is bit-for-bit
// reproducible for a given seed.
struct MlpNet {
  std::vector<int> sizes;                        // {input, hidden..., 1}
  std::vector<std::vector<double>> weights;      // per layer, row-major [out][in]
  std::vector<std::vector<double>> biases;       // per layer

  std::size_t n_layers() const { return weights.size(); }
};

inline MlpNet mlp_init(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.size() < 2 || sizes.back() != 1)
    throw ConfigError("mlp: layer sizes must end in a scalar output");
  for (int s : sizes)
    if (s <= 0) throw ConfigError("mlp: layer sizes must be positive");
  MlpNet net;
  net.sizes = sizes;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
    std::vector<double> b(static_cast<std::size_t>(fan_out));
    for (auto& x : w) x = rng.uniform(-bound, bound);
    for (auto& x : b) x = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Forward pass keeping every layer's activation (index 0 is the input).
inline void mlp_forward_trace(const MlpNet& net, const std::vector<double>& x,
                              std::vector<std::vector<double>>& acts) {
  acts.assign(net.sizes.size(), {});
  acts[0] = x;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const int in = net.sizes[l];
    const int out = net.sizes[l + 1];
    auto& a = acts[l + 1];
    a.assign(static_cast<std::size_t>(out), 0.0);
    for (int o = 0; o < out; ++o) {
      double z = net.biases[l][static_cast<std::size_t>(o)];
      const double* row = net.weights[l].data() + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) z += row[i] * acts[l][static_cast<std::size_t>(i)];
      const bool last = l + 1 == net.n_layers();
      a[static_cast<std::size_t>(o)] = last ? sigmoid(z) : (z > 0.0 ? z : 0.0);
    }
  }
}

}  // namespace detail

inline double mlp_forward(const MlpNet& net, const std::vector<double>& x) {
  if (x.size() != static_cast<std::size_t>(net.sizes.front()))
    throw ConfigError("mlp: input dimension mismatch");
  std::vector<std::vector<double>> acts;
  detail::mlp_forward_trace(net, x, acts);
  return acts.back().front();
}

// Mean squared error of the logistic output against the targets.
inline double mlp_loss(const MlpNet& net, const std::vector<std::vector<double>>& inputs,
                       const std::vector<double>& targets) {
  double sum = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const double y = mlp_forward(net, inputs[i]);
    sum += (y - targets[i]) * (y - targets[i]);
  }
  return sum / static_cast<double>(inputs.size());
}

// Gradient of the mean squared error over the given batch, accumulated into
// per-layer buffers shaped like the net. Returns the batch loss.
inline double mlp_backprop(const MlpNet& net, const std::vector<std::vector<double>>& inputs,
                           const std::vector<double>& targets,
                           const std::vector<std::size_t>& batch,
                           std::vector<std::vector<double>>& grad_w,
                           std::vector<std::vector<double>>& grad_b) {
  grad_w.assign(net.weights.size(), {});
  grad_b.assign(net.biases.size(), {});
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    grad_w[l].assign(net.weights[l].size(), 0.0);
    grad_b[l].assign(net.biases[l].size(), 0.0);
  }

  std::vector<std::vector<double>> acts;
  std::vector<double> delta, delta_prev;
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  for (const std::size_t idx : batch) {
    detail::mlp_forward_trace(net, inputs[idx], acts);
    const double y = acts.back().front();
    const double err = y - targets[idx];
    loss += err * err;

    delta.assign(1, 2.0 * err * y * (1.0 - y) * inv_n);
    for (std::size_t l = net.n_layers(); l-- > 0;) {
      const int in = net.sizes[l];
      const int out = net.sizes[l + 1];
      for (int o = 0; o < out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        grad_b[l][static_cast<std::size_t>(o)] += d;
        double* grow = grad_w[l].data() + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) grow[i] += d * acts[l][static_cast<std::size_t>(i)];
      }
      if (l == 0) break;
      delta_prev.assign(static_cast<std::size_t>(in), 0.0);
      for (int o = 0; o < out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        const double* row = net.weights[l].data() + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) delta_prev[static_cast<std::size_t>(i)] += row[i] * d;
      }
      for (int i = 0; i < in; ++i)
        if (acts[l][static_cast<std::size_t>(i)] <= 0.0) delta_prev[static_cast<std::size_t>(i)] = 0.0;
      delta = delta_prev;
    }
  }
  return loss * inv_n;
}

// Flattened parameter order: per layer, weights row-major then biases.
inline std::size_t mlp_param_count(const MlpNet& net) {
  std::size_t n = 0;
  for (std::size_t l = 0; l < net.n_layers(); ++l)
    n += net.weights[l].size() + net.biases[l].size();
  return n;
}

inline double& mlp_param(MlpNet& net, std::size_t index) {
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    if (index < net.weights[l].size()) return net.weights[l][index];
    index -= net.weights[l].size();
    if (index < net.biases[l].size()) return net.biases[l][index];
    index -= net.biases[l].size();
  }
  throw std::logic_error("mlp: parameter index out of range");
}

// Full-batch gradient in the flattened parameter order.
inline std::vector<double> mlp_grad_flat(const MlpNet& net,
                                         const std::vector<std::vector<double>>& inputs,
                                         const std::vector<double>& targets) {
  std::vector<std::size_t> all(inputs.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::vector<double>> gw, gb;
  mlp_backprop(net, inputs, targets, all, gw, gb);
  std::vector<double> flat;
  flat.reserve(mlp_param_count(net));
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    flat.insert(flat.end(), gw[l].begin(), gw[l].end());
    flat.insert(flat.end(), gb[l].begin(), gb[l].end());
  }
  return flat;
}

// Seeded mini-batch SGD on the squared error. Mutates the given net;
// throws if the loss stops being finite, naming the epoch.
inline void mlp_train_net(MlpNet& net, const std::vector<std::vector<double>>& inputs,
                          const std::vector<double>& targets, const MlpConfig& cfg, Rng& rng) {
  if (inputs.empty()) throw ConfigError("mlp: empty training set");
  if (cfg.epochs <= 0 || cfg.batch_size <= 0 || !(cfg.learning_rate > 0.0))
    throw ConfigError("mlp: epochs, batch size and learning rate must be positive");

  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<double>> gw, gb;
  std::vector<std::size_t> batch;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t end = std::min(pos + static_cast<std::size_t>(cfg.batch_size), order.size());
      batch.assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                   order.begin() + static_cast<std::ptrdiff_t>(end));
      const double batch_loss = mlp_backprop(net, inputs, targets, batch, gw, gb);
      epoch_loss += batch_loss * static_cast<double>(batch.size());
      for (std::size_t l = 0; l < net.n_layers(); ++l) {
        for (std::size_t i = 0; i < net.weights[l].size(); ++i)
          net.weights[l][i] -= cfg.learning_rate * gw[l][i];
        for (std::size_t i = 0; i < net.biases[l].size(); ++i)
          net.biases[l][i] -= cfg.learning_rate * gb[l][i];
      }
      pos = end;
    }
    if (!std::isfinite(epoch_loss))
      throw ConfigError("mlp training: non-finite loss at epoch " + std::to_string(epoch));
  }
}

// A per-model quality regressor over prompt embeddings: either k-nearest
// neighbors or a small MLP. Immutable once trained; predictions are
// clamped to [0,1]. Carries the training-split mean model costs used by
// the willingness-to-pay score.
class QualityPredictor {
 public:
  static QualityPredictor train_knn(const RecordTable& train, const EmbeddingProvider& emb,
                                    const KnnConfig& cfg, std::uint64_t seed) {
    if (cfg.k <= 0) throw ConfigError("knn: k must be positive");
    if (static_cast<std::size_t>(cfg.k) > train.n_samples())
      throw ConfigError("knn: k (" + std::to_string(cfg.k) + ") exceeds the training set size (" +
                        std::to_string(train.n_samples()) + ")");
    QualityPredictor p;
    p.kind_ = "knn";
    p.seed_ = seed;
    p.init_common(train, emb);
    p.knn_k_ = cfg.k;
    p.knn_embeddings_.reserve(train.n_samples());
    for (std::size_t si = 0; si < train.n_samples(); ++si)
      p.knn_embeddings_.push_back(emb.sample_embedding(si).values);
    p.knn_quality_.assign(p.models_.size(), {});
    for (std::size_t mi = 0; mi < p.models_.size(); ++mi) {
      p.knn_quality_[mi].reserve(train.n_samples());
      for (std::size_t si = 0; si < train.n_samples(); ++si)
        p.knn_quality_[mi].push_back(train.record(si, mi).quality);
    }
    return p;
  }

  static QualityPredictor train_mlp(const RecordTable& train, const EmbeddingProvider& emb,
                                    const MlpConfig& cfg, std::uint64_t seed) {
    if (cfg.hidden_layers <= 0 || cfg.hidden_units <= 0)
      throw ConfigError("mlp: hidden layers and units must be positive");
    QualityPredictor p;
    p.kind_ = "mlp";
    p.seed_ = seed;
    p.init_common(train, emb);
    p.mlp_config_ = cfg;

    std::vector<std::vector<double>> inputs;
    inputs.reserve(train.n_samples());
    for (std::size_t si = 0; si < train.n_samples(); ++si)
      inputs.push_back(emb.sample_embedding(si).values);

    std::vector<int> sizes{emb.dimension()};
    for (int l = 0; l < cfg.hidden_layers; ++l) sizes.push_back(cfg.hidden_units);
    sizes.push_back(1);

    for (std::size_t mi = 0; mi < p.models_.size(); ++mi) {
      std::vector<double> targets;
      targets.reserve(train.n_samples());
      for (std::size_t si = 0; si < train.n_samples(); ++si)
        targets.push_back(train.record(si, mi).quality);
      Rng rng(mix64(seed ^ fnv1a64(p.models_[mi])));
      MlpNet net = mlp_init(sizes, rng);
      mlp_train_net(net, inputs, targets, cfg, rng);
      p.mlp_nets_.push_back(std::move(net));
    }
    return p;
  }

  const std::string& kind() const { return kind_; }
  int dimension() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<std::string>& models() const { return models_; }
  const std::vector<double>& model_costs() const { return model_costs_; }

  double predict(std::string_view model, const EmbeddingVector& x) const {
    const auto it = std::find(models_.begin(), models_.end(), model);
    if (it == models_.end())
      throw ConfigError("predictor: unknown model '" + std::string(model) + "'");
    return predict_all(x)[static_cast<std::size_t>(it - models_.begin())];
  }

  // Predicted quality per model, aligned to models().
  std::vector<double> predict_all(const EmbeddingVector& x) const {
    if (x.dimension() != static_cast<std::size_t>(dim_))
      throw ConfigError("predictor: embedding dimension mismatch (" +
                        std::to_string(x.dimension()) + " vs " + std::to_string(dim_) + ")");
    std::vector<double> out(models_.size(), 0.0);
    if (kind_ == "knn") {
      const auto neighbors = nearest_neighbors(x);
      for (std::size_t mi = 0; mi < models_.size(); ++mi) {
        double sum = 0.0;
        for (const std::size_t idx : neighbors) sum += knn_quality_[mi][idx];
        out[mi] = sum / static_cast<double>(neighbors.size());
      }
    } else {
      for (std::size_t mi = 0; mi < models_.size(); ++mi)
        out[mi] = mlp_forward(mlp_nets_[mi], x.values);
    }
    for (double& v : out) v = std::clamp(v, 0.0, 1.0);
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "routerbench-predictor";
    j["version"] = 1;
    j["kind"] = kind_;
    j["embedding_dim"] = dim_;
    j["seed"] = seed_;
    j["models"] = models_;
    j["model_costs"] = model_costs_;
    if (kind_ == "knn") {
      j["knn"] = {{"k", knn_k_}, {"embeddings", knn_embeddings_}, {"qualities", knn_quality_}};
    } else {
      nlohmann::json nets = nlohmann::json::array();
      for (const auto& net : mlp_nets_)
        nets.push_back({{"sizes", net.sizes}, {"weights", net.weights}, {"biases", net.biases}});
      j["mlp"] = {{"hidden_layers", mlp_config_.hidden_layers},
                  {"hidden_units", mlp_config_.hidden_units},
                  {"learning_rate", mlp_config_.learning_rate},
                  {"epochs", mlp_config_.epochs},
                  {"batch_size", mlp_config_.batch_size},
                  {"nets", nets}};
    }
    return j;
  }

  static QualityPredictor from_json(const nlohmann::json& j) {
    auto fail = [](const std::string& why) -> QualityPredictor {
      throw ConfigError("predictor file: " + why);
    };
    if (!j.is_object() || j.value("format", "") != "routerbench-predictor")
      return fail("not a predictor file");
    if (j.value("version", 0) != 1) return fail("unsupported version");

    QualityPredictor p;
    p.kind_ = j.value("kind", "");
    if (p.kind_ != "knn" && p.kind_ != "mlp") return fail("unknown kind");
    p.dim_ = j.at("embedding_dim").get<int>();
    p.seed_ = j.at("seed").get<std::uint64_t>();
    p.models_ = j.at("models").get<std::vector<std::string>>();
    p.model_costs_ = j.at("model_costs").get<std::vector<double>>();
    if (p.models_.empty() || p.model_costs_.size() != p.models_.size())
      return fail("model list and cost list must align");

    if (p.kind_ == "knn") {
      const auto& k = j.at("knn");
      p.knn_k_ = k.at("k").get<int>();
      p.knn_embeddings_ = k.at("embeddings").get<std::vector<std::vector<double>>>();
      p.knn_quality_ = k.at("qualities").get<std::vector<std::vector<double>>>();
      if (p.knn_k_ <= 0 || p.knn_embeddings_.empty() ||
          static_cast<std::size_t>(p.knn_k_) > p.knn_embeddings_.size())
        return fail("knn k out of range");
      if (p.knn_quality_.size() != p.models_.size()) return fail("knn quality arrays misaligned");
      for (const auto& e : p.knn_embeddings_)
        if (e.size() != static_cast<std::size_t>(p.dim_)) return fail("knn embedding dimension mismatch");
      for (const auto& q : p.knn_quality_)
        if (q.size() != p.knn_embeddings_.size()) return fail("knn quality arrays misaligned");
    } else {
      const auto& m = j.at("mlp");
      p.mlp_config_.hidden_layers = m.at("hidden_layers").get<int>();
      p.mlp_config_.hidden_units = m.at("hidden_units").get<int>();
      p.mlp_config_.learning_rate = m.at("learning_rate").get<double>();
      p.mlp_config_.epochs = m.at("epochs").get<int>();
      p.mlp_config_.batch_size = m.at("batch_size").get<int>();
      for (const auto& net_json : m.at("nets")) {
        MlpNet net;
        net.sizes = net_json.at("sizes").get<std::vector<int>>();
        net.weights = net_json.at("weights").get<std::vector<std::vector<double>>>();
        net.biases = net_json.at("biases").get<std::vector<std::vector<double>>>();
        if (net.sizes.size() < 2 || net.sizes.front() != p.dim_ || net.sizes.back() != 1)
          return fail("mlp net shape mismatch");
        if (net.weights.size() + 1 != net.sizes.size() || net.biases.size() != net.weights.size())
          return fail("mlp net shape mismatch");
        for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
          if (net.weights[l].size() !=
                  static_cast<std::size_t>(net.sizes[l]) * static_cast<std::size_t>(net.sizes[l + 1]) ||
              net.biases[l].size() != static_cast<std::size_t>(net.sizes[l + 1]))
            return fail("mlp net shape mismatch");
        }
        p.mlp_nets_.push_back(std::move(net));
      }
      if (p.mlp_nets_.size() != p.models_.size()) return fail("mlp nets misaligned with models");
    }
    return p;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write predictor file: " + path.string());
    out << to_json().dump() << '\n';
  }

  static QualityPredictor load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read predictor file: " + path.string());
    const auto j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ConfigError("predictor file: malformed JSON: " + path.string());
    return from_json(j);
  }

  // Exposed for white-box tests.
  const std::vector<MlpNet>& mlp_nets() const { return mlp_nets_; }
  int knn_k() const { return knn_k_; }

 private:
  QualityPredictor() = default;

  void init_common(const RecordTable& train, const EmbeddingProvider& emb) {
    dim_ = emb.dimension();
    models_ = train.models();
    for (const auto& s : aggregate_model_stats(train)) model_costs_.push_back(s.mean_cost);
  }

  // Indices of the k most cosine-similar training samples; ties broken by
  // training-sample index order.
  std::vector<std::size_t> nearest_neighbors(const EmbeddingVector& x) const {
    std::vector<double> sims(knn_embeddings_.size());
    for (std::size_t i = 0; i < knn_embeddings_.size(); ++i) {
      const auto& e = knn_embeddings_[i];
      double dot = 0.0, ne = 0.0, nx = 0.0;
      for (std::size_t d = 0; d < e.size(); ++d) {
        dot += e[d] * x.values[d];
        ne += e[d] * e[d];
        nx += x.values[d] * x.values[d];
      }
      sims[i] = (ne == 0.0 || nx == 0.0) ? 0.0 : dot / (std::sqrt(ne) * std::sqrt(nx));
    }
    std::vector<std::size_t> idx(sims.size());
    std::iota(idx.begin(), idx.end(), 0);
    const auto k = static_cast<std::size_t>(knn_k_);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (sims[a] != sims[b]) return sims[a] > sims[b];
                        return a < b;
                      });
    idx.resize(k);
    return idx;
  }

  std::string kind_;
  int dim_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::string> models_;
  std::vector<double> model_costs_;

  int knn_k_ = 0;
  std::vector<std::vector<double>> knn_embeddings_;  // sample-major
  std::vector<std::vector<double>> knn_quality_;     // model-major, sample-aligned

  MlpConfig mlp_config_;
  std::vector<MlpNet> mlp_nets_;  // aligned to models_
};

}  // namespace routerbench
