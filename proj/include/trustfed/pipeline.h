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
#ifndef TRUSTFED_PIPELINE_H_
#define TRUSTFED_PIPELINE_H_

#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "trustfed/conformal.h"
#include "trustfed/core.h"
#include "trustfed/fedtrain.h"
#include "trustfed/neighbors.h"
#include "trustfed/partition.h"

namespace trustfed {

// A client's calibrated threshold, the only calibration-derived value it
// ever sends.
struct ThresholdReply {
  int client_id = 0;
  Threshold threshold = Threshold::FullSet();
};

ThresholdReply ReplyThreshold(const CalibrationState& state, double alpha);

// Every message type allowed to cross a client boundary.
using BoundaryMessages = std::tuple<ClientUpdate, DistanceReply, ThresholdReply>;

enum class MethodKind { kTrustFed, kFcp, kLocal };

struct Method {
  MethodKind kind = MethodKind::kTrustFed;
  std::size_t k = 1;  // neighbourhood size; meaningful for kTrustFed only

  // Throws InvalidInputError unless 1 <= k <= num_clients for kTrustFed.
  void Validate(std::size_t num_clients) const;
};

std::string ToString(MethodKind kind);

// Max over the thresholds of `neighbor_ids`; the full-set sentinel dominates.
Threshold SoftNearestThreshold(std::span<const ThresholdReply> replies,
                               std::span<const int> neighbor_ids);

PredictionSet TrustFedPredict(std::span<const double> x, const Predictor& model,
                              std::span<const FeatureBank> banks,
                              std::span<const CalibrationState> cal_states,
                              double alpha, std::size_t k);

// Pooled-score baseline.
PredictionSet FcpPredict(std::span<const double> x, const Predictor& model,
                         std::span<const CalibrationState> cal_states,
                         double alpha);

// Oracle baseline using the true origin client's own threshold.
PredictionSet LocalPredict(std::span<const double> x, int origin_client,
                           const Predictor& model,
                           std::span<const CalibrationState> cal_states,
                           double alpha);

struct KSweepRow {
  std::size_t k = 0;
  double coverage = 0.0;
  double avg_cardinality = 0.0;
};

struct KSelection {
  std::size_t k = 0;
  bool met_target = false;
};

// Smallest k whose coverage reaches (1 - alpha) + margin; falls back to the
// largest k with met_target = false. Rows must be ordered by ascending k.
KSelection SelectSmallestK(std::span<const KSweepRow> rows, double alpha,
                           double margin);

enum class AssignmentSpace { kFeature, kPixel };

std::string ToString(AssignmentSpace space);
AssignmentSpace AssignmentSpaceFromString(const std::string& name);

class OracleAccess;

// One simulated institution. Its data, calibration scores and banks stay
// private; the exported calls below are the whole client surface.
class ClientNode {
 public:
  explicit ClientNode(ClientDataset data);

  int id() const { return data_.client_id; }

  // Server-driven local work; returns nothing to the caller.
  void Calibrate(const Predictor& frozen, std::span<const double> alphas);

  ClientUpdate TrainRound(const ModelParameters& global, const TrainConfig& cfg,
                          int round) const;
  DistanceReply FeatureDistance(std::span<const double> embedding) const;
  DistanceReply PixelDistance(std::span<const double> raw) const;
  ThresholdReply QueryThreshold(double alpha) const;

  // Signatures of every value-returning exported call.
  using Exports = std::tuple<decltype(&ClientNode::TrainRound),
                             decltype(&ClientNode::FeatureDistance),
                             decltype(&ClientNode::PixelDistance),
                             decltype(&ClientNode::QueryThreshold)>;

 private:
  friend class OracleAccess;

  ClientDataset data_;
  std::optional<CalibrationState> calibration_;
  std::optional<FeatureBank> feature_bank_;
  std::optional<PixelBank> pixel_bank_;
};

// Simulator-only view used by evaluation: ground-truth test splits and the
// pooled-score baseline, which by construction needs raw scores.
class OracleAccess {
 public:
  static const std::vector<LabeledExample>& TestSplit(const ClientNode& node) {
    return node.data_.test;
  }
  static const CalibrationState& Calibration(const ClientNode& node);
};

// Server-side coordinator over a set of client nodes.
class Federation {
 public:
  explicit Federation(std::vector<ClientDataset> clients);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<ClientNode>& nodes() const { return nodes_; }

  ModelParameters Train(const ModelParameters& init, const TrainConfig& cfg,
                        int threads = 1) const;
  void Calibrate(const Predictor& frozen, std::span<const double> alphas,
                 int threads = 1);

  // All client ids ordered by distance to `x` in the given space.
  std::vector<int> RankClients(const Predictor& model, std::span<const double> x,
                               AssignmentSpace space) const;

  // One ThresholdReply per client at `alpha`, indexed by position.
  std::vector<ThresholdReply> CollectThresholds(double alpha) const;

  // Threshold for a query whose ranking is `ranking`, using the first k.
  Threshold SoftNearest(std::span<const int> ranking, std::size_t k,
                        double alpha) const;

 private:
  const ClientNode& NodeById(int id) const;

  std::vector<ClientNode> nodes_;
};

}  // namespace trustfed

#endif  // TRUSTFED_PIPELINE_H_
