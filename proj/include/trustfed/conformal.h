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
#ifndef TRUSTFED_CONFORMAL_H_
#define TRUSTFED_CONFORMAL_H_

#include <functional>
#include <map>
#include <span>
#include <vector>

#include "trustfed/core.h"
#include "trustfed/fedtrain.h"

namespace trustfed {

// Score function S(p, y); larger means less conforming.
using ScoreFunction = std::function<double(const ProbabilityVector&, int)>;

// 1 - p[y].
double Nonconformity(const ProbabilityVector& p, int label);

// Calibration outcome of one client. Immutable after construction.
class CalibrationState {
 public:
  CalibrationState(int client_id, std::vector<double> scores,
                   std::span<const double> alphas);

  int client_id() const { return client_id_; }
  std::size_t size() const { return sorted_scores_.size(); }
  const std::vector<double>& sorted_scores() const { return sorted_scores_; }
  const std::map<double, Threshold>& thresholds() const { return thresholds_; }

  // Threshold at `alpha`, from the precomputed table when present.
  Threshold ThresholdAt(double alpha) const;

 private:
  int client_id_;
  std::vector<double> sorted_scores_;
  std::map<double, Threshold> thresholds_;
};

CalibrationState CalibrateClient(const Predictor& model, int client_id,
                                 std::span<const LabeledExample> cal,
                                 std::span<const double> alphas,
                                 const ScoreFunction& score = Nonconformity);

// Threshold over the union of all clients' calibration scores.
Threshold PooledThreshold(std::span<const CalibrationState> states,
                          double alpha);

// {y : S(p, y) <= tau}.
PredictionSet MakePredictionSet(const ProbabilityVector& p,
                                const Threshold& tau,
                                const ScoreFunction& score = Nonconformity);

}  // namespace trustfed

#endif  // TRUSTFED_CONFORMAL_H_
