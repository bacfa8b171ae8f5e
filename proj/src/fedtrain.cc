/*
 * Copyright 2026 The TrustFed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "trustfed/fedtrain.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

namespace trustfed {
namespace {

constexpr uint64_t kTagInit = 0x494e;
constexpr uint64_t kTagEpoch = 0x4550;

void CheckInput(const ModelParameters& params, std::span<const double> x) {
  if (x.size() != params.layout.input) {
    throw DimensionError(fmt::format("model expects {} features, got {}",
                                     params.layout.input, x.size()));
  }
}

// Hidden pre-activations W1 x + b1.
std::vector<double> HiddenPre(const ModelParameters& params,
                              std::span<const double> x) {
  const MlpLayout& L = params.layout;
  const double* w1 = params.values.data() + L.w1_offset();
  const double* b1 = params.values.data() + L.b1_offset();
  std::vector<double> a(L.hidden);
  for (std::size_t i = 0; i < L.hidden; ++i) {
    double acc = b1[i];
    const double* row = w1 + i * L.input;
    for (std::size_t j = 0; j < L.input; ++j) acc += row[j] * x[j];
    a[i] = acc;
  }
  return a;
}

std::vector<double> Logits(const ModelParameters& params,
                           std::span<const double> hidden) {
  const MlpLayout& L = params.layout;
  const double* w2 = params.values.data() + L.w2_offset();
  const double* b2 = params.values.data() + L.b2_offset();
  std::vector<double> z(L.classes);
  for (std::size_t c = 0; c < L.classes; ++c) {
    double acc = b2[c];
    const double* row = w2 + c * L.hidden;
    for (std::size_t i = 0; i < L.hidden; ++i) acc += row[i] * hidden[i];
    z[c] = acc;
  }
  return z;
}

double LogSumExp(std::span<const double> z) {
  const double top = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - top);
  return top + std::log(total);
}

}  // namespace

void TrainConfig::Validate() const {
  if (rounds < 1) throw InvalidInputError("train.rounds must be >= 1");
  if (local_epochs < 1) throw InvalidInputError("train.local_epochs must be >= 1");
  if (batch_size < 1) throw InvalidInputError("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidInputError("train.learning_rate must be positive");
  }
  if (hidden_dim < 1) throw InvalidInputError("train.hidden_dim must be >= 1");
}

ModelParameters InitParams(std::size_t input, std::size_t hidden,
                           std::size_t classes, uint64_t seed) {
  if (input == 0 || hidden == 0 || classes == 0) {
    throw InvalidInputError("model dimensions must be positive");
  }
  ModelParameters p;
  p.layout = {input, hidden, classes};
  p.values.assign(p.layout.size(), 0.0);
  std::mt19937_64 rng(MixSeed(seed, {kTagInit}));
  auto fill = [&](std::size_t offset, std::size_t fan_in, std::size_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) {
      p.values[offset + i] = dist(rng);
    }
  };
  fill(p.layout.w1_offset(), input, hidden);
  fill(p.layout.w2_offset(), hidden, classes);
  return p;
}

ProbabilityVector PredictProba(const ModelParameters& params,
                               std::span<const double> x) {
  CheckInput(params, x);
  auto hidden = HiddenPre(params, x);
  for (double& v : hidden) v = std::max(v, 0.0);
  return Softmax(Logits(params, hidden));
}

Embedding Embed(const ModelParameters& params, std::span<const double> x) {
  CheckInput(params, x);
  auto hidden = HiddenPre(params, x);
  for (double& v : hidden) v = std::max(v, 0.0);
  return hidden;
}

LossAndGradient ComputeLossAndGradient(const ModelParameters& params,
                                       std::span<const LabeledExample> batch) {
  const MlpLayout& L = params.layout;
  LossAndGradient out;
  out.gradient.assign(L.size(), 0.0);
  if (batch.empty()) return out;
  const double* w2 = params.values.data() + L.w2_offset();
  double* g = out.gradient.data();

  std::vector<double> dz(L.classes);
  std::vector<double> da(L.hidden);
  for (const LabeledExample& ex : batch) {
    CheckInput(params, ex.features);
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= L.classes) {
      throw InvalidInputError(fmt::format("label {} out of range", ex.label));
    }
    const auto pre = HiddenPre(params, ex.features);
    std::vector<double> hidden(pre);
    for (double& v : hidden) v = std::max(v, 0.0);
    const auto z = Logits(params, hidden);
    const double lse = LogSumExp(z);
    out.loss += lse - z[ex.label];

    for (std::size_t c = 0; c < L.classes; ++c) dz[c] = std::exp(z[c] - lse);
    dz[ex.label] -= 1.0;

    std::fill(da.begin(), da.end(), 0.0);
    for (std::size_t c = 0; c < L.classes; ++c) {
      double* gw2 = g + L.w2_offset() + c * L.hidden;
      const double* row = w2 + c * L.hidden;
      for (std::size_t i = 0; i < L.hidden; ++i) {
        gw2[i] += dz[c] * hidden[i];
        da[i] += row[i] * dz[c];
      }
      g[L.b2_offset() + c] += dz[c];
    }
    for (std::size_t i = 0; i < L.hidden; ++i) {
      if (pre[i] <= 0.0) continue;
      double* gw1 = g + L.w1_offset() + i * L.input;
      for (std::size_t j = 0; j < L.input; ++j) gw1[j] += da[i] * ex.features[j];
      g[L.b1_offset() + i] += da[i];
    }
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  out.loss *= scale;
  for (double& v : out.gradient) v *= scale;
  return out;
}

double MeanLoss(const ModelParameters& params,
                std::span<const LabeledExample> data) {
  return ComputeLossAndGradient(params, data).loss;
}

double Accuracy(const ModelParameters& params,
                std::span<const LabeledExample> data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : data) {
    const auto p = PredictProba(params, ex.features);
    const auto probs = p.values();
    const auto best = std::max_element(probs.begin(), probs.end()) - probs.begin();
    hits += (best == ex.label) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

uint64_t EpochSeed(uint64_t base, int client_id, int round, int epoch) {
  return MixSeed(base, {kTagEpoch, static_cast<uint64_t>(client_id),
                        static_cast<uint64_t>(round),
                        static_cast<uint64_t>(epoch)});
}

void SgdEpoch(ModelParameters& params, std::span<const LabeledExample> data,
              int batch_size, double learning_rate, uint64_t shuffle_seed,
              int round) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<LabeledExample> batch;
  const std::size_t b = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < order.size(); start += b) {
    const std::size_t end = std::min(order.size(), start + b);
    batch.clear();
    for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
    const auto lg = ComputeLossAndGradient(params, batch);
    if (!std::isfinite(lg.loss)) {
      throw DivergenceError(
          fmt::format("non-finite training loss in round {}", round));
    }
    for (std::size_t i = 0; i < params.values.size(); ++i) {
      params.values[i] -= learning_rate * lg.gradient[i];
    }
  }
}

ModelParameters LocalTrain(const ModelParameters& params,
                           std::span<const LabeledExample> train,
                           const TrainConfig& cfg, int client_id, int round) {
  if (train.empty()) {
    throw InvalidInputError(
        fmt::format("client {} has an empty training split", client_id));
  }
  if (cfg.batch_size < 1) throw InvalidInputError("batch_size must be >= 1");
  ModelParameters local = params;
  for (int e = 0; e < cfg.local_epochs; ++e) {
    SgdEpoch(local, train, cfg.batch_size, cfg.learning_rate,
             EpochSeed(cfg.seed, client_id, round, e), round);
  }
  return local;
}

ModelParameters Aggregate(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw InvalidInputError("nothing to aggregate");
  const ModelParameters& ref = updates.front().params;
  std::size_t total = 0;
  for (const auto& u : updates) {
    if (u.params.layout != ref.layout ||
        u.params.values.size() != ref.values.size()) {
      throw DimensionError("client updates have mismatched parameter layouts");
    }
    if (u.sample_count == 0) {
      throw InvalidInputError("client update with zero samples");
    }
    total += u.sample_count;
  }
  // Written as w_0 + sum_k (n_k/n)(w_k - w_0), which equals sum_k (n_k/n) w_k
  // and returns w exactly when every update is w.
  ModelParameters out = ref;
  for (std::size_t k = 1; k < updates.size(); ++k) {
    const double weight = static_cast<double>(updates[k].sample_count) /
                          static_cast<double>(total);
    const auto& w = updates[k].params.values;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      out.values[i] += weight * (w[i] - ref.values[i]);
    }
  }
  return out;
}

ModelParameters FedOpt(const ModelParameters& init,
                       std::span<const ClientDataset> clients,
                       const TrainConfig& cfg, int threads) {
  if (clients.empty()) throw InvalidInputError("federation has no clients");
  for (const auto& c : clients) {
    if (c.train.empty()) {
      throw InvalidInputError(
          fmt::format("client {} has an empty training split", c.client_id));
    }
  }
  ModelParameters global = init;
  std::vector<ClientUpdate> updates(clients.size());
  for (int round = 0; round < cfg.rounds; ++round) {
    ParallelFor(clients.size(), threads, [&](std::size_t k) {
      const ClientDataset& c = clients[k];
      updates[k] = ClientUpdate{LocalTrain(global, c.train, cfg, c.client_id, round),
                                c.train.size()};
    });
    global = Aggregate(updates);
  }
  return global;
}

}  // namespace trustfed
