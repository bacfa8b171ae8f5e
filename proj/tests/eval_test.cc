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
#include "trustfed/eval.h"

#include <cmath>
#include <random>

#include "gtest/gtest.h"

namespace trustfed {
namespace {

ExperimentConfig SmallConfig(uint64_t seed = 3) {
  ExperimentConfig cfg;
  cfg.dataset.synthetic = {.classes = 3, .dim = 4, .per_class = 80, .separation = 3,
                           .seed = seed};
  cfg.partition = {.kind = PartitionKind::kClassSkew, .clients = 3,
                   .dirichlet_beta = 0.5, .seed = seed};
  cfg.train = {.rounds = 5, .batch_size = 16, .seed = seed, .hidden_dim = 16};
  cfg.conformal.alphas = {0.1, 0.2};
  cfg.assignment.k_values = {1, 2, 3};
  cfg.methods = {kMethodTrustFed, kMethodTrustFedAuto, kMethodFcp, kMethodLocal};
  return cfg;
}

TEST(MetricsTest, CoverageExamples) {
  const std::vector<PredictionSet> sets = {PredictionSet({0}), PredictionSet({1, 2}),
                                           PredictionSet({0, 2}), PredictionSet({1})};
  EXPECT_DOUBLE_EQ(EmpiricalCoverage(sets, std::vector<int>{0, 1, 2, 1}), 1.0);
  EXPECT_DOUBLE_EQ(EmpiricalCoverage(sets, std::vector<int>{1, 0, 1, 0}), 0.0);
  EXPECT_DOUBLE_EQ(EmpiricalCoverage(sets, std::vector<int>{0, 0, 2, 0}), 0.5);
  EXPECT_THROW(EmpiricalCoverage(sets, std::vector<int>{0}), DimensionError);
  EXPECT_THROW(EmpiricalCoverage({}, {}), InvalidInputError);
}

TEST(MetricsTest, CardinalityExamples) {
  EXPECT_DOUBLE_EQ(AverageCardinality(std::vector<PredictionSet>(4, PredictionSet({2}))), 1.0);
  EXPECT_DOUBLE_EQ(AverageCardinality(std::vector<PredictionSet>(3, PredictionSet::Full(5))),
                   5.0);
  const std::vector<PredictionSet> sizes = {PredictionSet({0}), PredictionSet({0, 1}),
                                            PredictionSet({0, 1, 2})};
  EXPECT_DOUBLE_EQ(AverageCardinality(sizes), 2.0);
}

TEST(MetricsTest, SentinelEverywhereCoversEverything) {
  const auto data = GenerateSynthetic({.classes = 5, .dim = 3, .per_class = 20, .seed = 1});
  const ProbabilityVector p({0.6, 0.1, 0.1, 0.1, 0.1});
  std::vector<PredictionSet> sets;
  for (std::size_t i = 0; i < data.size(); ++i) {
    sets.push_back(MakePredictionSet(p, Threshold::FullSet()));
  }
  const SetMetrics m = Summarize(sets, data);
  EXPECT_EQ(m.coverage, 1.0);
  EXPECT_EQ(m.avg_cardinality, 5.0);
  for (const auto& [c, v] : m.per_class_coverage) EXPECT_EQ(v, 1.0) << c;
}

TEST(MetricsTest, PerClientCoverageAveragesToMarginal) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 300);
    std::vector<LabeledExample> ex(n);
    std::vector<PredictionSet> sets;
    for (auto& e : ex) {
      e.label = static_cast<int>(rng() % 4);
      e.origin_client = static_cast<int>(rng() % 5);
      sets.push_back(rng() % 3 == 0 ? PredictionSet({(e.label + 1) % 4})
                                    : PredictionSet::Full(4));
    }
    const SetMetrics m = Summarize(sets, ex);
    std::map<int, int> counts;
    for (const auto& e : ex) ++counts[e.origin_client];
    double weighted = 0.0;
    for (const auto& [c, cov] : m.per_client_coverage) weighted += cov * counts[c];
    EXPECT_NEAR(weighted / n, m.coverage, 1e-9);
  }
}

TEST(MetricsTest, CoverageNonDecreasingInConfidence) {
  const auto prepared = Prepare(SmallConfig(), 1);
  for (auto space : {AssignmentSpace::kFeature, AssignmentSpace::kPixel}) {
    const auto views = ViewQueries(prepared, prepared.reporting, space);
    std::vector<int> labels;
    for (const auto& e : prepared.reporting) labels.push_back(e.label);
    for (std::size_t k = 1; k <= prepared.federation.size(); ++k) {
      // Alphas calibrated in Prepare are 0.1 and 0.2; 0.2 is the lower level.
      const double lo = EmpiricalCoverage(TrustFedSets(prepared, views, 0.2, k), labels);
      const double hi = EmpiricalCoverage(TrustFedSets(prepared, views, 0.1, k), labels);
      EXPECT_LE(lo, hi);
    }
  }
}

TEST(RunExperimentTest, SingleFcpRow) {
  auto cfg = SmallConfig();
  cfg.conformal.alphas = {0.1};
  cfg.methods = {kMethodFcp};
  cfg.assignment.k_values.clear();
  const auto report = RunExperiment(cfg);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_EQ(report.rows[0].method, "fcp");
  EXPECT_FALSE(report.rows[0].k.has_value());
  EXPECT_TRUE(report.rows[0].assignment_top_k.empty());
}

TEST(RunExperimentTest, GridOrderAndRanges) {
  const auto cfg = SmallConfig();
  const auto report = RunExperiment(cfg);
  // Per alpha: three trustfed rows, then auto, fcp, local.
  ASSERT_EQ(report.rows.size(), 12u);
  for (const auto& row : report.rows) {
    EXPECT_GE(row.coverage, 0.0);
    EXPECT_LE(row.coverage, 1.0);
    EXPECT_GE(row.avg_cardinality, 0.0);
    EXPECT_LE(row.avg_cardinality, 3.0);
  }
  EXPECT_EQ(report.rows[0].k, std::optional<std::size_t>(1));
  EXPECT_EQ(report.rows[3].method, "trustfed_auto");
  EXPECT_EQ(report.rows[6].alpha, 0.2);
  const auto& top = report.rows[0].assignment_top_k;
  EXPECT_EQ(top.at(3), 1.0);
  EXPECT_LE(top.at(1), top.at(2));
  EXPECT_EQ(report.metadata.clients, 3);
  EXPECT_EQ(report.metadata.config_digest, cfg.Digest());
}

TEST(RunExperimentTest, Deterministic) {
  const auto a = RunExperiment(SmallConfig(11), 1);
  const auto b = RunExperiment(SmallConfig(11), 2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(FormatReportCsv(a), FormatReportCsv(b));
  EXPECT_EQ(ReportToJson(a).dump(), ReportToJson(b).dump());
}

TEST(RunExperimentTest, IidPooledCoverageNearNominal) {
  ExperimentConfig cfg;
  cfg.dataset.synthetic = {.classes = 4, .dim = 6, .per_class = 1000, .separation = 3,
                           .seed = 5};
  // 4 clients x 1000: 100 calibration and 500 test samples each.
  cfg.partition = {.kind = PartitionKind::kIid, .clients = 4, .seed = 5,
                   .cal_fraction = 0.1, .test_fraction = 0.5};
  cfg.train = {.rounds = 10, .seed = 5, .hidden_dim = 16};
  cfg.conformal = {.alphas = {0.1}, .tuning_fraction = 0.0};
  cfg.methods = {kMethodFcp};
  const auto report = RunExperiment(cfg);
  ASSERT_EQ(report.metadata.test_samples, 2000u);
  EXPECT_GE(report.rows[0].coverage, 0.87);
  EXPECT_LE(report.rows[0].coverage, 0.93);
}

TEST(RunExperimentTest, LocalUsesOriginThreshold) {
  const auto cfg = SmallConfig();
  const auto prepared = Prepare(cfg);
  const auto report = RunExperiment(cfg);
  const auto views = ViewQueries(prepared, prepared.reporting, AssignmentSpace::kFeature);
  std::vector<PredictionSet> sets;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const int origin = prepared.reporting[i].origin_client;
    sets.push_back(MakePredictionSet(
        views[i].probs,
        OracleAccess::Calibration(prepared.federation.nodes()[origin]).ThresholdAt(0.1)));
  }
  EXPECT_DOUBLE_EQ(report.rows[5].coverage, Summarize(sets, prepared.reporting).coverage);
}

TEST(KSweepTest, CardinalityMonotoneAndSelection) {
  const auto cfg = SmallConfig();
  const auto prepared = Prepare(cfg);
  const auto sweep = RunKSweep(prepared, cfg, 0.1);
  ASSERT_EQ(sweep.rows.size(), 3u);
  for (std::size_t i = 1; i < sweep.rows.size(); ++i) {
    EXPECT_GE(sweep.rows[i].avg_cardinality, sweep.rows[i - 1].avg_cardinality);
  }
  EXPECT_EQ(sweep.selection.k, SelectSmallestK(sweep.rows, 0.1, 0.0).k);
  const std::string csv = FormatKSweepCsv(sweep, 0.0);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "k,coverage,avg_cardinality,meets_target,selected,warning");
}

TEST(KSweepTest, SingleClientSelectsOne) {
  auto clients = Partition(GenerateSynthetic({.classes = 3, .dim = 3, .per_class = 60,
                                              .seed = 2}),
                           {.clients = 2, .seed = 2});
  PreparedExperiment prepared{Federation({clients[0]}), MlpPredictor(InitParams(3, 8, 3, 1)),
                              3, clients[0].test, clients[0].test};
  const std::vector<double> alphas = {0.1};
  prepared.federation.Calibrate(prepared.model, alphas);
  auto cfg = SmallConfig();
  const auto sweep = RunKSweep(prepared, cfg, 0.1);
  ASSERT_EQ(sweep.rows.size(), 1u);
  EXPECT_EQ(sweep.selection.k, 1u);
}

TEST(KSweepTest, UnreachableTargetFlagsFallback) {
  KSweepReport sweep{0.1, {{1, 0.5, 1.0}, {2, 0.6, 1.2}}, {}};
  sweep.selection = SelectSmallestK(sweep.rows, 0.1, 0.0);
  EXPECT_EQ(sweep.selection.k, 2u);
  EXPECT_FALSE(sweep.selection.met_target);
  const std::string csv = FormatKSweepCsv(sweep, 0.0);
  EXPECT_NE(csv.find("2,0.6,1.2,0,1,1"), std::string::npos) << csv;
}

TEST(SerializationTest, JsonRoundTrip) {
  const auto report = RunExperiment(SmallConfig(4));
  const auto text = ReportToJson(report).dump(2);
  EXPECT_EQ(ReportFromJson(nlohmann::json::parse(text)), report);
}

TEST(SerializationTest, RandomReportsRoundTrip) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    ExperimentReport r;
    r.metadata.data_seed = rng();
    r.metadata.config_digest = "abc";
    for (int i = 0; i < 4; ++i) {
      ReportRow row{.method = i % 2 ? "fcp" : "trustfed", .alpha = u(rng),
                    .coverage = u(rng), .avg_cardinality = 3 * u(rng)};
      if (i % 2 == 0) row.k = rng() % 5 + 1;
      row.per_client_coverage[static_cast<int>(rng() % 4)] = u(rng);
      row.per_class_coverage[0] = u(rng);
      row.assignment_top_k[2] = u(rng);
      r.rows.push_back(row);
    }
    EXPECT_EQ(ReportFromJson(nlohmann::json::parse(ReportToJson(r).dump())), r);
  }
}

TEST(SerializationTest, LongFormatCsv) {
  ExperimentReport r;
  r.rows.push_back({.method = "fcp", .alpha = 0.1, .coverage = 0.9,
                    .per_client_coverage = {{0, 0.8}}, .per_class_coverage = {{1, 1.0}},
                    .avg_cardinality = 1.5});
  r.rows.push_back({.method = "trustfed", .alpha = 0.1, .k = 2, .coverage = 0.95,
                    .avg_cardinality = 2, .assignment_top_k = {{2, 0.75}}});
  EXPECT_EQ(FormatReportCsv(r),
            "method,alpha,k,metric,value\n"
            "fcp,0.1,,coverage,0.9\n"
            "fcp,0.1,,avg_cardinality,1.5\n"
            "fcp,0.1,,coverage_client_0,0.8\n"
            "fcp,0.1,,coverage_class_1,1\n"
            "trustfed,0.1,2,coverage,0.95\n"
            "trustfed,0.1,2,avg_cardinality,2\n"
            "trustfed,0.1,2,assignment_top_2,0.75\n");
}

}  // namespace
}  // namespace trustfed
