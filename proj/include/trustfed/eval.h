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
#ifndef TRUSTFED_EVAL_H_
#define TRUSTFED_EVAL_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trustfed/config.h"
#include "trustfed/core.h"
#include "trustfed/fedtrain.h"
#include "trustfed/pipeline.h"

namespace trustfed {

double EmpiricalCoverage(std::span<const PredictionSet> sets,
                         std::span<const int> labels);
double AverageCardinality(std::span<const PredictionSet> sets);

struct SetMetrics {
  double coverage = 0.0;
  double avg_cardinality = 0.0;
  std::map<int, double> per_client_coverage;
  std::map<int, double> per_class_coverage;
};

// Coverage and size of `sets` against the labels of `examples`, broken down
// by origin client and by class.
SetMetrics Summarize(std::span<const PredictionSet> sets,
                     std::span<const LabeledExample> examples);

struct ReportRow {
  std::string method;
  double alpha = 0.0;
  std::optional<std::size_t> k;
  double coverage = 0.0;
  std::map<int, double> per_client_coverage;
  std::map<int, double> per_class_coverage;
  double avg_cardinality = 0.0;
  std::map<std::size_t, double> assignment_top_k;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct ReportMetadata {
  uint64_t data_seed = 0;
  uint64_t partition_seed = 0;
  uint64_t train_seed = 0;
  std::string config_digest;
  int clients = 0;
  int classes = 0;
  std::string assignment_space;
  std::size_t tuning_samples = 0;
  std::size_t test_samples = 0;

  friend bool operator==(const ReportMetadata&, const ReportMetadata&) = default;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  ReportMetadata metadata;

  friend bool operator==(const ExperimentReport&,
                         const ExperimentReport&) = default;
};

// Frozen state after training and calibration, shared by every method.
struct PreparedExperiment {
  Federation federation;
  MlpPredictor model;
  int num_classes = 0;
  std::vector<LabeledExample> tuning;     // held out for choosing k
  std::vector<LabeledExample> reporting;  // every reported metric
};

// Data, partition, federated training, then per-client calibration.
PreparedExperiment Prepare(const ExperimentConfig& config, int threads = 1);

// Server-visible view of one query: class probabilities and the ranking of
// all clients by representation distance.
struct QueryView {
  ProbabilityVector probs;
  std::vector<int> ranking;
};

std::vector<QueryView> ViewQueries(const PreparedExperiment& prepared,
                                   std::span<const LabeledExample> queries,
                                   AssignmentSpace space, int threads = 1);

// TrustFed prediction sets for precomputed views at a fixed k.
std::vector<PredictionSet> TrustFedSets(const PreparedExperiment& prepared,
                                        std::span<const QueryView> views,
                                        double alpha, std::size_t k);

// Coverage and cardinality for k = 1..K on the given queries.
std::vector<KSweepRow> SweepK(const PreparedExperiment& prepared,
                              std::span<const QueryView> views,
                              std::span<const LabeledExample> queries,
                              double alpha);

struct KSweepReport {
  double alpha = 0.0;
  std::vector<KSweepRow> rows;
  KSelection selection;
};

ExperimentReport RunExperiment(const ExperimentConfig& config, int threads = 1);
// Sweeps k on the tuning split of a prepared experiment.
KSweepReport RunKSweep(const PreparedExperiment& prepared,
                       const ExperimentConfig& config, double alpha,
                       int threads = 1);

nlohmann::json ReportToJson(const ExperimentReport& report);
ExperimentReport ReportFromJson(const nlohmann::json& j);

// Long format: method,alpha,k,metric,value.
std::string FormatReportCsv(const ExperimentReport& report);
// k,coverage,avg_cardinality,meets_target,selected,warning.
std::string FormatKSweepCsv(const KSweepReport& sweep, double margin);

// Shortest decimal that round-trips to `v`.
std::string FormatNumber(double v);

}  // namespace trustfed

#endif  // TRUSTFED_EVAL_H_
