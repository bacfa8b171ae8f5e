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
#include "trustfed/neighbors.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace trustfed {
namespace {

template <typename Space, typename QueryFn>
double HitRate(std::span<const LabeledExample> test,
               std::span<const VectorBank<Space>> banks, std::size_t k,
               QueryFn query_of) {
  std::vector<std::vector<int>> rankings;
  rankings.reserve(test.size());
  std::vector<DistanceReply> replies(banks.size());
  for (const auto& ex : test) {
    const auto query = query_of(ex);
    for (std::size_t b = 0; b < banks.size(); ++b) {
      replies[b] = ReplyDistance(banks[b], query);
    }
    rankings.push_back(TopKClients(replies, k));
  }
  return TopKHitRate(rankings, test, k);
}

}  // namespace

FeatureBank BuildFeatureBank(const Predictor& model, int client_id,
                             std::span<const LabeledExample> cal) {
  if (cal.empty()) {
    throw InvalidInputError(
        fmt::format("client {} has no calibration data for a bank", client_id));
  }
  FeatureBank bank{client_id, {}};
  bank.vectors.reserve(cal.size());
  for (const auto& ex : cal) bank.vectors.push_back(model.Embed(ex.features));
  return bank;
}

PixelBank BuildPixelBank(int client_id, std::span<const LabeledExample> cal) {
  if (cal.empty()) {
    throw InvalidInputError(
        fmt::format("client {} has no calibration data for a bank", client_id));
  }
  PixelBank bank{client_id, {}};
  bank.vectors.reserve(cal.size());
  for (const auto& ex : cal) bank.vectors.push_back(VectorizePixels(ex.features));
  return bank;
}

double MinDistance(std::span<const std::vector<double>> vectors,
                   std::span<const double> query) {
  if (vectors.empty()) throw InvalidInputError("distance to an empty bank");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& v : vectors) best = std::min(best, SquaredEuclidean(v, query));
  return std::sqrt(best);
}

std::vector<int> TopKClients(std::span<const DistanceReply> replies,
                             std::size_t k) {
  if (k < 1 || k > replies.size()) {
    throw InvalidInputError(
        fmt::format("k = {} outside [1, {}]", k, replies.size()));
  }
  std::vector<DistanceReply> sorted(replies.begin(), replies.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const DistanceReply& a, const DistanceReply& b) {
              if (a.distance != b.distance) return a.distance < b.distance;
              return a.client_id < b.client_id;
            });
  std::vector<int> ids(k);
  for (std::size_t i = 0; i < k; ++i) ids[i] = sorted[i].client_id;
  return ids;
}

std::vector<double> VectorizePixels(const Image& image) {
  std::vector<double> flat;
  for (const auto& row : image) {
    for (const auto& pixel : row) flat.insert(flat.end(), pixel.begin(), pixel.end());
  }
  return flat;
}

std::vector<double> VectorizePixels(std::span<const double> flat) {
  return {flat.begin(), flat.end()};
}

double TopKHitRate(std::span<const std::vector<int>> rankings,
                   std::span<const LabeledExample> examples, std::size_t k) {
  if (rankings.size() != examples.size()) {
    throw DimensionError("rankings and examples differ in length");
  }
  if (examples.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& r = rankings[i];
    const auto end = r.begin() + static_cast<std::ptrdiff_t>(std::min(k, r.size()));
    if (std::find(r.begin(), end, examples[i].origin_client) != end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

double AssignmentAccuracy(std::span<const LabeledExample> test,
                          const Predictor& model,
                          std::span<const FeatureBank> banks, std::size_t k) {
  return HitRate(test, banks, k,
                 [&](const LabeledExample& ex) { return model.Embed(ex.features); });
}

double AssignmentAccuracy(std::span<const LabeledExample> test,
                          std::span<const PixelBank> banks, std::size_t k) {
  return HitRate(test, banks, k, [](const LabeledExample& ex) {
    return VectorizePixels(ex.features);
  });
}

}  // namespace trustfed
