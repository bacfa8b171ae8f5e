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
#include "trustfed/pipeline.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace trustfed {
namespace {

const CalibrationState& StateById(std::span<const CalibrationState> states,
                                  int id) {
  for (const auto& s : states) {
    if (s.client_id() == id) return s;
  }
  throw InvalidInputError(fmt::format("unknown client {}", id));
}

}  // namespace

ThresholdReply ReplyThreshold(const CalibrationState& state, double alpha) {
  return ThresholdReply{state.client_id(), state.ThresholdAt(alpha)};
}

void Method::Validate(std::size_t num_clients) const {
  if (kind == MethodKind::kTrustFed && (k < 1 || k > num_clients)) {
    throw InvalidInputError(
        fmt::format("trustfed k = {} outside [1, {}]", k, num_clients));
  }
}

std::string ToString(MethodKind kind) {
  switch (kind) {
    case MethodKind::kTrustFed:
      return "trustfed";
    case MethodKind::kFcp:
      return "fcp";
    case MethodKind::kLocal:
      return "local";
  }
  return "unknown";
}

std::string ToString(AssignmentSpace space) {
  return space == AssignmentSpace::kFeature ? "feature" : "pixel";
}

AssignmentSpace AssignmentSpaceFromString(const std::string& name) {
  if (name == "feature") return AssignmentSpace::kFeature;
  if (name == "pixel") return AssignmentSpace::kPixel;
  throw InvalidInputError(
      fmt::format("unknown assignment space '{}' (expected feature, pixel)", name));
}

Threshold SoftNearestThreshold(std::span<const ThresholdReply> replies,
                               std::span<const int> neighbor_ids) {
  if (neighbor_ids.empty()) throw InvalidInputError("empty neighbourhood");
  std::optional<Threshold> tau;
  for (int id : neighbor_ids) {
    const auto it = std::find_if(replies.begin(), replies.end(),
                                 [&](const ThresholdReply& r) { return r.client_id == id; });
    if (it == replies.end()) {
      throw InvalidInputError(fmt::format("no threshold reply from client {}", id));
    }
    tau = tau ? Max(*tau, it->threshold) : it->threshold;
  }
  return *tau;
}

PredictionSet TrustFedPredict(std::span<const double> x, const Predictor& model,
                              std::span<const FeatureBank> banks,
                              std::span<const CalibrationState> cal_states,
                              double alpha, std::size_t k) {
  if (banks.size() != cal_states.size()) {
    throw InvalidInputError("feature banks and calibration states differ in count");
  }
  if (k < 1 || k > banks.size()) {
    throw InvalidInputError(fmt::format("k = {} outside [1, {}]", k, banks.size()));
  }
  const Embedding f = model.Embed(x);
  std::vector<DistanceReply> distances;
  distances.reserve(banks.size());
  for (const auto& bank : banks) distances.push_back(ReplyDistance(bank, f));
  const std::vector<int> neighbors = TopKClients(distances, k);

  std::vector<ThresholdReply> thresholds;
  thresholds.reserve(k);
  for (int id : neighbors) thresholds.push_back(ReplyThreshold(StateById(cal_states, id), alpha));
  const Threshold tau = SoftNearestThreshold(thresholds, neighbors);
  return MakePredictionSet(model.PredictProba(x), tau);
}

PredictionSet FcpPredict(std::span<const double> x, const Predictor& model,
                         std::span<const CalibrationState> cal_states,
                         double alpha) {
  return MakePredictionSet(model.PredictProba(x),
                           PooledThreshold(cal_states, alpha));
}

PredictionSet LocalPredict(std::span<const double> x, int origin_client,
                           const Predictor& model,
                           std::span<const CalibrationState> cal_states,
                           double alpha) {
  const auto& state = StateById(cal_states, origin_client);
  return MakePredictionSet(model.PredictProba(x), state.ThresholdAt(alpha));
}

KSelection SelectSmallestK(std::span<const KSweepRow> rows, double alpha,
                           double margin) {
  if (rows.empty()) throw InvalidInputError("empty k sweep");
  const double target = (1.0 - alpha) + margin;
  for (const auto& row : rows) {
    if (row.coverage >= target) return KSelection{row.k, true};
  }
  return KSelection{rows.back().k, false};
}

ClientNode::ClientNode(ClientDataset data) : data_(std::move(data)) {}

void ClientNode::Calibrate(const Predictor& frozen,
                           std::span<const double> alphas) {
  calibration_ = CalibrateClient(frozen, data_.client_id, data_.cal, alphas);
  feature_bank_ = BuildFeatureBank(frozen, data_.client_id, data_.cal);
  pixel_bank_ = BuildPixelBank(data_.client_id, data_.cal);
}

ClientUpdate ClientNode::TrainRound(const ModelParameters& global,
                                    const TrainConfig& cfg, int round) const {
  return ClientUpdate{LocalTrain(global, data_.train, cfg, data_.client_id, round),
                      data_.train.size()};
}

DistanceReply ClientNode::FeatureDistance(std::span<const double> embedding) const {
  if (!feature_bank_) throw InvalidInputError("client not calibrated");
  return ReplyDistance(*feature_bank_, embedding);
}

DistanceReply ClientNode::PixelDistance(std::span<const double> raw) const {
  if (!pixel_bank_) throw InvalidInputError("client not calibrated");
  return ReplyDistance(*pixel_bank_, VectorizePixels(raw));
}

ThresholdReply ClientNode::QueryThreshold(double alpha) const {
  if (!calibration_) throw InvalidInputError("client not calibrated");
  return ReplyThreshold(*calibration_, alpha);
}

const CalibrationState& OracleAccess::Calibration(const ClientNode& node) {
  if (!node.calibration_) throw InvalidInputError("client not calibrated");
  return *node.calibration_;
}

Federation::Federation(std::vector<ClientDataset> clients) {
  if (clients.empty()) throw InvalidInputError("federation has no clients");
  nodes_.reserve(clients.size());
  for (auto& c : clients) nodes_.emplace_back(std::move(c));
}

ModelParameters Federation::Train(const ModelParameters& init,
                                  const TrainConfig& cfg, int threads) const {
  ModelParameters global = init;
  std::vector<ClientUpdate> updates(nodes_.size());
  for (int round = 0; round < cfg.rounds; ++round) {
    ParallelFor(nodes_.size(), threads, [&](std::size_t k) {
      updates[k] = nodes_[k].TrainRound(global, cfg, round);
    });
    global = Aggregate(updates);
  }
  return global;
}

void Federation::Calibrate(const Predictor& frozen,
                           std::span<const double> alphas, int threads) {
  ParallelFor(nodes_.size(), threads,
              [&](std::size_t k) { nodes_[k].Calibrate(frozen, alphas); });
}

std::vector<int> Federation::RankClients(const Predictor& model,
                                         std::span<const double> x,
                                         AssignmentSpace space) const {
  std::vector<DistanceReply> replies;
  replies.reserve(nodes_.size());
  if (space == AssignmentSpace::kFeature) {
    const Embedding f = model.Embed(x);
    for (const auto& node : nodes_) replies.push_back(node.FeatureDistance(f));
  } else {
    for (const auto& node : nodes_) replies.push_back(node.PixelDistance(x));
  }
  return TopKClients(replies, replies.size());
}

std::vector<ThresholdReply> Federation::CollectThresholds(double alpha) const {
  std::vector<ThresholdReply> out;
  out.reserve(nodes_.size());
  for (const auto& node : nodes_) out.push_back(node.QueryThreshold(alpha));
  return out;
}

Threshold Federation::SoftNearest(std::span<const int> ranking, std::size_t k,
                                  double alpha) const {
  if (k < 1 || k > ranking.size()) {
    throw InvalidInputError(fmt::format("k = {} outside [1, {}]", k, ranking.size()));
  }
  const auto neighbors = ranking.first(k);
  std::vector<ThresholdReply> replies;
  replies.reserve(k);
  for (int id : neighbors) replies.push_back(NodeById(id).QueryThreshold(alpha));
  return SoftNearestThreshold(replies, neighbors);
}

const ClientNode& Federation::NodeById(int id) const {
  if (id >= 0 && static_cast<std::size_t>(id) < nodes_.size() &&
      nodes_[id].id() == id) {
    return nodes_[id];
  }
  for (const auto& n : nodes_) {
    if (n.id() == id) return n;
  }
  throw InvalidInputError(fmt::format("unknown client {}", id));
}

}  // namespace trustfed
