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
#include <random>
#include <type_traits>

#include "gtest/gtest.h"

namespace trustfed {
namespace {

const std::vector<double> kAlphas = {0.1, 0.2};

// One client per class of a well separated mixture, so that each client
// occupies its own region of input space.
std::vector<ClientDataset> ClusterClients(int k, double separation, uint64_t seed) {
  const auto data = GenerateSynthetic({.classes = k, .dim = 4, .per_class = 120,
                                       .separation = separation, .seed = seed});
  std::vector<ClientDataset> clients(k);
  for (int c = 0; c < k; ++c) clients[c].client_id = c;
  for (auto ex : data) {
    auto& client = clients[ex.label];
    ex.origin_client = ex.label;
    auto& split = client.train.size() < 60   ? client.train
                  : client.cal.size() < 30   ? client.cal
                                             : client.test;
    split.push_back(std::move(ex));
  }
  return clients;
}

struct Calibrated {
  MlpPredictor model;
  std::vector<FeatureBank> banks;
  std::vector<CalibrationState> states;
  std::vector<LabeledExample> test;
};

Calibrated Calibrate(const std::vector<ClientDataset>& clients, uint64_t seed,
                     int classes = 0) {
  if (classes == 0) classes = static_cast<int>(clients.size());
  const TrainConfig cfg{.rounds = 10, .batch_size = 16, .seed = seed, .hidden_dim = 16};
  Calibrated out{MlpPredictor(FedOpt(InitParams(4, 16, classes, seed), clients, cfg)),
                 {}, {}, {}};
  for (const auto& c : clients) {
    out.banks.push_back(BuildFeatureBank(out.model, c.client_id, c.cal));
    out.states.push_back(CalibrateClient(out.model, c.client_id, c.cal, kAlphas));
    out.test.insert(out.test.end(), c.test.begin(), c.test.end());
  }
  return out;
}

TEST(SoftNearestThresholdTest, Examples) {
  const std::vector<ThresholdReply> replies = {{0, Threshold::Finite(0.3)},
                                               {1, Threshold::Finite(0.7)},
                                               {2, Threshold::Finite(0.5)}};
  const std::vector<int> all = {0, 1, 2};
  EXPECT_EQ(SoftNearestThreshold(replies, all), Threshold::Finite(0.7));
  const std::vector<int> one = {2};
  EXPECT_EQ(SoftNearestThreshold(replies, one), Threshold::Finite(0.5));

  auto with_full = replies;
  with_full[0].threshold = Threshold::FullSet();
  EXPECT_TRUE(SoftNearestThreshold(with_full, all).is_full_set());

  const std::vector<int> unknown = {5};
  EXPECT_THROW(SoftNearestThreshold(replies, unknown), InvalidInputError);
  EXPECT_THROW(SoftNearestThreshold(replies, {}), InvalidInputError);
}

TEST(TrustFedPredictTest, FullNeighbourhoodUsesMaxOfAllThresholds) {
  const auto cal = Calibrate(ClusterClients(3, 2.0, 1), 1);
  for (double alpha : kAlphas) {
    Threshold all_max = cal.states[0].ThresholdAt(alpha);
    for (const auto& s : cal.states) all_max = Max(all_max, s.ThresholdAt(alpha));
    for (const auto& ex : cal.test) {
      const auto got = TrustFedPredict(ex.features, cal.model, cal.banks, cal.states, alpha, 3);
      EXPECT_EQ(got, MakePredictionSet(cal.model.PredictProba(ex.features), all_max));
    }
  }
}

TEST(TrustFedPredictTest, SingleClientIsPlainSplitConformal) {
  auto clients = ClusterClients(2, 3.0, 4);
  // Merge into one client.
  for (auto* split : {&clients[1].train, &clients[1].cal, &clients[1].test}) {
    for (auto& ex : *split) ex.origin_client = 0;
  }
  clients[0].train.insert(clients[0].train.end(), clients[1].train.begin(), clients[1].train.end());
  clients[0].cal.insert(clients[0].cal.end(), clients[1].cal.begin(), clients[1].cal.end());
  clients[0].test.insert(clients[0].test.end(), clients[1].test.begin(), clients[1].test.end());
  clients.pop_back();
  const auto cal = Calibrate(clients, 2, 2);
  for (const auto& ex : cal.test) {
    const auto p = cal.model.PredictProba(ex.features);
    const auto plain = MakePredictionSet(p, ThresholdFromSorted(cal.states[0].sorted_scores(), 0.1));
    EXPECT_EQ(TrustFedPredict(ex.features, cal.model, cal.banks, cal.states, 0.1, 1), plain);
    EXPECT_EQ(FcpPredict(ex.features, cal.model, cal.states, 0.1), plain);
    EXPECT_EQ(LocalPredict(ex.features, 0, cal.model, cal.states, 0.1), plain);
  }
}

TEST(TrustFedPredictTest, SeparatedClientsSelectTheirOwnThreshold) {
  const auto cal = Calibrate(ClusterClients(2, 40.0, 3), 3);
  for (const auto& ex : cal.test) {
    const Embedding f = cal.model.Embed(ex.features);
    std::vector<DistanceReply> d;
    for (const auto& b : cal.banks) d.push_back(ReplyDistance(b, f));
    ASSERT_EQ(TopKClients(d, 1).front(), ex.origin_client);
    const auto own = cal.states[ex.origin_client].ThresholdAt(0.1);
    const auto p = cal.model.PredictProba(ex.features);
    EXPECT_EQ(TrustFedPredict(ex.features, cal.model, cal.banks, cal.states, 0.1, 1),
              MakePredictionSet(p, own));
    EXPECT_EQ(LocalPredict(ex.features, ex.origin_client, cal.model, cal.states, 0.1),
              TrustFedPredict(ex.features, cal.model, cal.banks, cal.states, 0.1, 1));
  }
}

TEST(TrustFedPredictTest, RejectsBadNeighbourhoodSize) {
  const auto cal = Calibrate(ClusterClients(2, 3.0, 5), 5);
  const auto& x = cal.test.front().features;
  EXPECT_THROW(TrustFedPredict(x, cal.model, cal.banks, cal.states, 0.1, 3), InvalidInputError);
  EXPECT_THROW(TrustFedPredict(x, cal.model, cal.banks, cal.states, 0.1, 0), InvalidInputError);
  EXPECT_THROW(LocalPredict(x, 9, cal.model, cal.states, 0.1), InvalidInputError);
}

TEST(FcpPredictTest, IdenticalClientsStayWithinOneOrderStatistic) {
  const std::vector<double> scores = {0.05, 0.12, 0.2, 0.33, 0.41, 0.5, 0.64, 0.7, 0.83,
                                      0.9,  0.91, 0.95};
  std::vector<CalibrationState> states;
  for (int k = 0; k < 3; ++k) states.emplace_back(k, scores, kAlphas);
  for (double alpha : kAlphas) {
    const Threshold pooled = PooledThreshold(states, alpha);
    const Threshold single = states[0].ThresholdAt(alpha);
    ASSERT_FALSE(pooled.is_full_set());
    ASSERT_FALSE(single.is_full_set());
    const auto pos = [&](double v) {
      return std::lower_bound(scores.begin(), scores.end(), v) - scores.begin();
    };
    EXPECT_LE(std::abs(pos(pooled.value()) - pos(single.value())), 1);
  }
}

TEST(FcpPredictTest, OneThresholdForEveryOrigin) {
  const auto cal = Calibrate(ClusterClients(3, 2.0, 8), 8);
  const Threshold pooled = PooledThreshold(cal.states, 0.2);
  for (const auto& ex : cal.test) {
    EXPECT_EQ(FcpPredict(ex.features, cal.model, cal.states, 0.2),
              MakePredictionSet(cal.model.PredictProba(ex.features), pooled));
  }
}

TEST(LocalPredictTest, SentinelThresholdGivesFullSet) {
  const auto model = MlpPredictor(InitParams(2, 3, 4, 0));
  std::vector<CalibrationState> states = {CalibrationState(0, {0.1, 0.2, 0.3}, kAlphas)};
  EXPECT_EQ(LocalPredict(std::vector<double>{0.3, 0.1}, 0, model, states, 0.1),
            PredictionSet::Full(4));
}

TEST(PipelineInvariantTest, DominanceAndMonotonicityInK) {
  const auto data = GenerateSynthetic({.classes = 4, .dim = 4, .per_class = 150,
                                       .separation = 2.5, .seed = 21});
  auto clients = Partition(data, {.kind = PartitionKind::kClassSkew, .clients = 5,
                                  .dirichlet_beta = 0.3, .seed = 4});
  Federation fed(clients);
  const TrainConfig cfg{.rounds = 8, .seed = 2, .hidden_dim = 16};
  const MlpPredictor model(fed.Train(InitParams(4, 16, 4, 2), cfg));
  fed.Calibrate(model, kAlphas);
  for (double alpha : kAlphas) {
    const auto replies = fed.CollectThresholds(alpha);
    for (const auto& c : clients) {
      for (const auto& ex : c.test) {
        const auto ranking = fed.RankClients(model, ex.features, AssignmentSpace::kFeature);
        const auto p = model.PredictProba(ex.features);
        Threshold prev = Threshold::Finite(0.0);
        PredictionSet prev_set;
        for (std::size_t k = 1; k <= fed.size(); ++k) {
          const Threshold tau = fed.SoftNearest(ranking, k, alpha);
          for (std::size_t j = 0; j < k; ++j) {
            EXPECT_GE(tau, replies[ranking[j]].threshold);
          }
          EXPECT_GE(tau, prev);
          const auto set = MakePredictionSet(p, tau);
          EXPECT_TRUE(prev_set.IsSubsetOf(set));
          prev = tau;
          prev_set = set;
        }
      }
    }
  }
}

TEST(FederationTest, TrainingMatchesFedOpt) {
  const auto data = GenerateSynthetic({.classes = 3, .dim = 3, .per_class = 60,
                                       .separation = 3, .seed = 2});
  const auto clients = Partition(data, {.kind = PartitionKind::kSampleSkew, .clients = 3,
                                        .sample_weights = {0.6, 0.3, 0.1}, .seed = 1});
  const TrainConfig cfg{.rounds = 5, .batch_size = 8, .seed = 9, .hidden_dim = 8};
  const auto init = InitParams(3, 8, 3, 9);
  Federation fed(clients);
  EXPECT_EQ(fed.Train(init, cfg, 1), FedOpt(init, clients, cfg, 1));
  EXPECT_EQ(fed.Train(init, cfg, 3), FedOpt(init, clients, cfg, 1));
}

TEST(ClientNodeTest, RequiresCalibrationBeforeQueries) {
  ClientNode node(ClusterClients(2, 3.0, 1)[0]);
  EXPECT_THROW(node.QueryThreshold(0.1), InvalidInputError);
  EXPECT_THROW(node.FeatureDistance(std::vector<double>(4, 0.0)), InvalidInputError);
  EXPECT_THROW(OracleAccess::Calibration(node), InvalidInputError);
}

// Return type of a member-function-pointer type.
template <typename>
struct ReturnOf;
template <typename R, typename C, typename... A>
struct ReturnOf<R (C::*)(A...) const> {
  using type = R;
};

template <typename T, typename Tuple>
struct InTuple;
template <typename T, typename... Ts>
struct InTuple<T, std::tuple<Ts...>> : std::disjunction<std::is_same<T, Ts>...> {};

template <typename Exports, typename Messages>
struct ExportsAreMessages;
template <typename... Fs, typename Messages>
struct ExportsAreMessages<std::tuple<Fs...>, Messages>
    : std::conjunction<InTuple<typename ReturnOf<Fs>::type, Messages>...> {};

template <typename Messages, typename Exports>
struct MessagesAreExported;
template <typename... Ms, typename... Fs>
struct MessagesAreExported<std::tuple<Ms...>, std::tuple<Fs...>>
    : std::conjunction<InTuple<Ms, std::tuple<typename ReturnOf<Fs>::type...>>...> {};

template <typename T>
concept LeaksData = requires(const T& node) { node.data(); } ||
                    requires(const T& node) { node.train(); } ||
                    requires(const T& node) { node.cal(); } ||
                    requires(const T& node) { node.calibration(); } ||
                    requires(const T& node) { node.sorted_scores(); } ||
                    requires(const T& node) { node.feature_bank(); } ||
                    requires(const T& node) { node.pixel_bank(); } ||
                    requires(const T& node) { node.data_; };

TEST(PrivacySurfaceTest, ClientExportsOnlyBoundaryMessages) {
  static_assert(ExportsAreMessages<ClientNode::Exports, BoundaryMessages>::value);
  static_assert(MessagesAreExported<BoundaryMessages, ClientNode::Exports>::value);
  static_assert(std::tuple_size_v<BoundaryMessages> == 3);
  static_assert(!LeaksData<ClientNode>);
  static_assert(std::is_trivially_copyable_v<DistanceReply>);
}

TEST(SelectSmallestKTest, PicksFirstRowReachingTarget) {
  const std::vector<KSweepRow> rows = {{1, 0.85, 1.1}, {2, 0.9, 1.3}, {3, 0.95, 1.6}};
  EXPECT_EQ(SelectSmallestK(rows, 0.1, 0.0).k, 2u);
  EXPECT_TRUE(SelectSmallestK(rows, 0.1, 0.0).met_target);
  EXPECT_EQ(SelectSmallestK(rows, 0.1, 0.02).k, 3u);
  const auto fallback = SelectSmallestK(rows, 0.01, 0.0);
  EXPECT_EQ(fallback.k, 3u);
  EXPECT_FALSE(fallback.met_target);
}

TEST(MethodTest, TrustFedNeighbourhoodMustFit) {
  EXPECT_NO_THROW((Method{MethodKind::kTrustFed, 3}.Validate(3)));
  EXPECT_THROW((Method{MethodKind::kTrustFed, 4}.Validate(3)), InvalidInputError);
  EXPECT_THROW((Method{MethodKind::kTrustFed, 0}.Validate(3)), InvalidInputError);
  EXPECT_NO_THROW((Method{MethodKind::kFcp, 0}.Validate(3)));
}

}  // namespace
}  // namespace trustfed
