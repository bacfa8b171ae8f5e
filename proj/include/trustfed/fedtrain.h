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
#ifndef TRUSTFED_FEDTRAIN_H_
#define TRUSTFED_FEDTRAIN_H_

#include <cstdint>
#include <span>
#include <vector>

#include "trustfed/core.h"
#include "trustfed/partition.h"

namespace trustfed {

// Non-finite training loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Shape of the reference one-hidden-layer perceptron. Parameters are stored
// flat as [W1 (hidden x input, row-major) | b1 | W2 (classes x hidden) | b2].
struct MlpLayout {
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::size_t classes = 0;

  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return hidden * input; }
  std::size_t w2_offset() const { return b1_offset() + hidden; }
  std::size_t b2_offset() const { return w2_offset() + classes * hidden; }
  std::size_t size() const { return b2_offset() + classes; }

  friend bool operator==(const MlpLayout&, const MlpLayout&) = default;
};

struct ModelParameters {
  MlpLayout layout;
  std::vector<double> values;

  friend bool operator==(const ModelParameters&,
                         const ModelParameters&) = default;
};

struct TrainConfig {
  int rounds = 30;
  int local_epochs = 1;
  int batch_size = 32;
  double learning_rate = 0.05;
  uint64_t seed = 0;
  int hidden_dim = 64;

  void Validate() const;
};

// The only message a client sends during training: its locally updated
// parameters and the number of samples they were fitted on.
struct ClientUpdate {
  ModelParameters params;
  std::size_t sample_count = 0;
};

// Anything that maps inputs to class probabilities and a hidden
// representation. Implementations must be pure functions of frozen state.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual ProbabilityVector PredictProba(std::span<const double> x) const = 0;
  virtual Embedding Embed(std::span<const double> x) const = 0;
};

// Glorot-uniform weights, zero biases.
ModelParameters InitParams(std::size_t input, std::size_t hidden,
                           std::size_t classes, uint64_t seed);

ProbabilityVector PredictProba(const ModelParameters& params,
                               std::span<const double> x);
// relu(W1 x + b1).
Embedding Embed(const ModelParameters& params, std::span<const double> x);

// Mean cross-entropy over `batch` and its gradient with respect to the flat
// parameter vector.
struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};
LossAndGradient ComputeLossAndGradient(
    const ModelParameters& params, std::span<const LabeledExample> batch);

double MeanLoss(const ModelParameters& params,
                std::span<const LabeledExample> data);
double Accuracy(const ModelParameters& params,
                std::span<const LabeledExample> data);

// Seed for the batch shuffle of one (client, round, epoch) cell.
uint64_t EpochSeed(uint64_t base, int client_id, int round, int epoch);

// One pass of mini-batch SGD over `data` in an order shuffled by
// `shuffle_seed`; the final partial batch is kept. `round` is reported in
// divergence errors.
void SgdEpoch(ModelParameters& params, std::span<const LabeledExample> data,
              int batch_size, double learning_rate, uint64_t shuffle_seed,
              int round);

// E epochs of SGD on one client's training split for one round.
ModelParameters LocalTrain(const ModelParameters& params,
                           std::span<const LabeledExample> train,
                           const TrainConfig& cfg, int client_id = 0,
                           int round = 0);

// Sample-proportional average sum_k (n_k / n) w_k.
ModelParameters Aggregate(std::span<const ClientUpdate> updates);

// R synchronous rounds of broadcast, local training and aggregation with
// full participation. Local updates run on up to `threads` workers; the
// result does not depend on the thread count.
ModelParameters FedOpt(const ModelParameters& init,
                       std::span<const ClientDataset> clients,
                       const TrainConfig& cfg, int threads = 1);

// Reference predictor backed by frozen MLP parameters.
class MlpPredictor : public Predictor {
 public:
  explicit MlpPredictor(ModelParameters params) : params_(std::move(params)) {}

  std::size_t input_dim() const override { return params_.layout.input; }
  std::size_t num_classes() const override { return params_.layout.classes; }
  ProbabilityVector PredictProba(std::span<const double> x) const override {
    return trustfed::PredictProba(params_, x);
  }
  Embedding Embed(std::span<const double> x) const override {
    return trustfed::Embed(params_, x);
  }
  const ModelParameters& params() const { return params_; }

 private:
  ModelParameters params_;
};

}  // namespace trustfed

#endif  // TRUSTFED_FEDTRAIN_H_
