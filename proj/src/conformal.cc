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
#include "trustfed/conformal.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace trustfed {

double Nonconformity(const ProbabilityVector& p, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= p.size()) {
    throw InvalidInputError(
        fmt::format("label {} outside [0, {})", label, p.size()));
  }
  return std::clamp(1.0 - p[label], 0.0, 1.0);
}

CalibrationState::CalibrationState(int client_id, std::vector<double> scores,
                                   std::span<const double> alphas)
    : client_id_(client_id), sorted_scores_(std::move(scores)) {
  if (sorted_scores_.empty()) {
    throw InvalidInputError(
        fmt::format("client {} has no calibration scores", client_id));
  }
  std::stable_sort(sorted_scores_.begin(), sorted_scores_.end());
  for (double a : alphas) thresholds_.emplace(a, ThresholdFromSorted(sorted_scores_, a));
}

Threshold CalibrationState::ThresholdAt(double alpha) const {
  if (auto it = thresholds_.find(alpha); it != thresholds_.end()) return it->second;
  return ThresholdFromSorted(sorted_scores_, alpha);
}

CalibrationState CalibrateClient(const Predictor& model, int client_id,
                                 std::span<const LabeledExample> cal,
                                 std::span<const double> alphas,
                                 const ScoreFunction& score) {
  std::vector<double> scores;
  scores.reserve(cal.size());
  for (const auto& ex : cal) {
    scores.push_back(score(model.PredictProba(ex.features), ex.label));
  }
  return CalibrationState(client_id, std::move(scores), alphas);
}

Threshold PooledThreshold(std::span<const CalibrationState> states,
                          double alpha) {
  std::vector<double> pooled;
  for (const auto& s : states) {
    pooled.insert(pooled.end(), s.sorted_scores().begin(),
                  s.sorted_scores().end());
  }
  if (pooled.empty()) throw InvalidInputError("no calibration scores to pool");
  std::sort(pooled.begin(), pooled.end());
  return ThresholdFromSorted(pooled, alpha);
}

PredictionSet MakePredictionSet(const ProbabilityVector& p,
                                const Threshold& tau,
                                const ScoreFunction& score) {
  if (tau.is_full_set()) return PredictionSet::Full(static_cast<int>(p.size()));
  std::vector<int> labels;
  for (std::size_t y = 0; y < p.size(); ++y) {
    if (tau.Admits(score(p, static_cast<int>(y)))) {
      labels.push_back(static_cast<int>(y));
    }
  }
  return PredictionSet(std::move(labels));
}

}  // namespace trustfed
