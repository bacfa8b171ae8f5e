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
#ifndef TRUSTFED_NEIGHBORS_H_
#define TRUSTFED_NEIGHBORS_H_

#include <span>
#include <vector>

#include "trustfed/core.h"
#include "trustfed/fedtrain.h"

namespace trustfed {

struct FeatureSpace {};
struct PixelSpace {};

// Per-client store of calibration-sample representations, searched by exact
// linear scan. The tag separates learned-feature banks from raw-input banks.
template <typename Space>
struct VectorBank {
  int client_id = 0;
  std::vector<std::vector<double>> vectors;

  friend bool operator==(const VectorBank&, const VectorBank&) = default;
};

using FeatureBank = VectorBank<FeatureSpace>;
using PixelBank = VectorBank<PixelSpace>;

// The only thing a client reveals about a query: its minimum distance.
struct DistanceReply {
  int client_id = 0;
  double distance = 0.0;
};

FeatureBank BuildFeatureBank(const Predictor& model, int client_id,
                             std::span<const LabeledExample> cal);
PixelBank BuildPixelBank(int client_id, std::span<const LabeledExample> cal);

// min_j ||query - vectors[j]||_2.
double MinDistance(std::span<const std::vector<double>> vectors,
                   std::span<const double> query);

template <typename Space>
double MinDistance(const VectorBank<Space>& bank,
                   std::span<const double> query) {
  return MinDistance(bank.vectors, query);
}

template <typename Space>
DistanceReply ReplyDistance(const VectorBank<Space>& bank,
                            std::span<const double> query) {
  return DistanceReply{bank.client_id, MinDistance(bank, query)};
}

// Client ids by ascending distance, ties by ascending id, first k kept.
std::vector<int> TopKClients(std::span<const DistanceReply> replies,
                             std::size_t k);

// Image as [row][column][channel].
using Image = std::vector<std::vector<std::vector<double>>>;

// Row-major, channel-last flattening.
std::vector<double> VectorizePixels(const Image& image);
// Features that are already flat pass through unchanged.
std::vector<double> VectorizePixels(std::span<const double> flat);

// Fraction of examples whose origin client is among the first k entries of
// the matching client ranking.
double TopKHitRate(std::span<const std::vector<int>> rankings,
                   std::span<const LabeledExample> examples, std::size_t k);

double AssignmentAccuracy(std::span<const LabeledExample> test,
                          const Predictor& model,
                          std::span<const FeatureBank> banks, std::size_t k);
double AssignmentAccuracy(std::span<const LabeledExample> test,
                          std::span<const PixelBank> banks, std::size_t k);

}  // namespace trustfed

#endif  // TRUSTFED_NEIGHBORS_H_
