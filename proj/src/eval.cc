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

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "trustfed/conformal.h"
#include "trustfed/neighbors.h"
#include "trustfed/partition.h"

namespace trustfed {
namespace {

std::vector<int> LabelsOf(std::span<const LabeledExample> examples) {
  std::vector<int> labels;
  labels.reserve(examples.size());
  for (const auto& ex : examples) labels.push_back(ex.label);
  return labels;
}

std::vector<std::vector<int>> RankingsOf(std::span<const QueryView> views) {
  std::vector<std::vector<int>> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back(v.ranking);
  return out;
}

std::vector<PredictionSet> SetsWithThreshold(std::span<const QueryView> views,
                                             const Threshold& tau) {
  std::vector<PredictionSet> sets;
  sets.reserve(views.size());
  for (const auto& v : views) sets.push_back(MakePredictionSet(v.probs, tau));
  return sets;
}

ReportRow RowFrom(std::string method, double alpha, std::optional<std::size_t> k,
                  const SetMetrics& m) {
  ReportRow row;
  row.method = std::move(method);
  row.alpha = alpha;
  row.k = k;
  row.coverage = m.coverage;
  row.avg_cardinality = m.avg_cardinality;
  row.per_client_coverage = m.per_client_coverage;
  row.per_class_coverage = m.per_class_coverage;
  return row;
}

template <typename K>
nlohmann::json MapToJson(const std::map<K, double>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, value] : m) j[std::to_string(key)] = value;
  return j;
}

template <typename K>
std::map<K, double> MapFromJson(const nlohmann::json& j) {
  std::map<K, double> m;
  for (const auto& [key, value] : j.items()) {
    m[static_cast<K>(std::stoll(key))] = value.template get<double>();
  }
  return m;
}

}  // namespace

std::string FormatNumber(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double EmpiricalCoverage(std::span<const PredictionSet> sets,
                         std::span<const int> labels) {
  if (sets.size() != labels.size()) {
    throw DimensionError(fmt::format("{} prediction sets but {} labels",
                                     sets.size(), labels.size()));
  }
  if (sets.empty()) throw InvalidInputError("coverage of zero samples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    hits += sets[i].Contains(labels[i]) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(sets.size());
}

double AverageCardinality(std::span<const PredictionSet> sets) {
  if (sets.empty()) throw InvalidInputError("cardinality of zero samples");
  std::size_t total = 0;
  for (const auto& s : sets) total += s.size();
  return static_cast<double>(total) / static_cast<double>(sets.size());
}

SetMetrics Summarize(std::span<const PredictionSet> sets,
                     std::span<const LabeledExample> examples) {
  const auto labels = LabelsOf(examples);
  SetMetrics m;
  m.coverage = EmpiricalCoverage(sets, labels);
  m.avg_cardinality = AverageCardinality(sets);
  std::map<int, std::pair<std::size_t, std::size_t>> by_client, by_class;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const bool hit = sets[i].Contains(labels[i]);
    auto& c = by_client[examples[i].origin_client];
    c.first += hit ? 1 : 0;
    ++c.second;
    auto& y = by_class[labels[i]];
    y.first += hit ? 1 : 0;
    ++y.second;
  }
  for (const auto& [id, hc] : by_client) {
    m.per_client_coverage[id] = static_cast<double>(hc.first) / static_cast<double>(hc.second);
  }
  for (const auto& [y, hc] : by_class) {
    m.per_class_coverage[y] = static_cast<double>(hc.first) / static_cast<double>(hc.second);
  }
  return m;
}

PreparedExperiment Prepare(const ExperimentConfig& config, int threads) {
  config.Validate();
  std::vector<LabeledExample> data =
      config.dataset.source == DataSource::kCsv
          ? LoadCsv(config.dataset.path)
          : GenerateSynthetic(config.dataset.synthetic);
  if (data.empty()) throw InvalidInputError("dataset is empty");
  const std::size_t dim = data.front().features.size();
  int num_classes = 0;
  for (const auto& ex : data) num_classes = std::max(num_classes, ex.label + 1);
  if (num_classes < 2) throw InvalidInputError("dataset has fewer than 2 classes");

  std::vector<ClientDataset> clients = Partition(data, config.partition);
  std::vector<LabeledExample> tuning, reporting;
  for (auto& c : clients) {
    const auto n_tune = static_cast<std::size_t>(
        std::floor(static_cast<double>(c.test.size()) * config.conformal.tuning_fraction));
    for (std::size_t i = 0; i < c.test.size(); ++i) {
      (i < n_tune ? tuning : reporting).push_back(c.test[i]);
    }
  }
  if (reporting.empty()) throw InvalidInputError("no test samples left for reporting");

  Federation federation(std::move(clients));
  const ModelParameters init =
      InitParams(dim, static_cast<std::size_t>(config.train.hidden_dim),
                 static_cast<std::size_t>(num_classes), config.train.seed);
  MlpPredictor model(federation.Train(init, config.train, threads));
  federation.Calibrate(model, config.conformal.alphas, threads);
  return PreparedExperiment{std::move(federation), std::move(model), num_classes,
                            std::move(tuning), std::move(reporting)};
}

std::vector<QueryView> ViewQueries(const PreparedExperiment& prepared,
                                   std::span<const LabeledExample> queries,
                                   AssignmentSpace space, int threads) {
  std::vector<QueryView> views(queries.size());
  ParallelFor(queries.size(), threads, [&](std::size_t i) {
    const auto& x = queries[i].features;
    views[i] = QueryView{prepared.model.PredictProba(x),
                         prepared.federation.RankClients(prepared.model, x, space)};
  });
  return views;
}

std::vector<PredictionSet> TrustFedSets(const PreparedExperiment& prepared,
                                        std::span<const QueryView> views,
                                        double alpha, std::size_t k) {
  std::vector<PredictionSet> sets;
  sets.reserve(views.size());
  for (const auto& v : views) {
    const Threshold tau = prepared.federation.SoftNearest(v.ranking, k, alpha);
    sets.push_back(MakePredictionSet(v.probs, tau));
  }
  return sets;
}

std::vector<KSweepRow> SweepK(const PreparedExperiment& prepared,
                              std::span<const QueryView> views,
                              std::span<const LabeledExample> queries,
                              double alpha) {
  const auto labels = LabelsOf(queries);
  std::vector<KSweepRow> rows;
  for (std::size_t k = 1; k <= prepared.federation.size(); ++k) {
    const auto sets = TrustFedSets(prepared, views, alpha, k);
    rows.push_back(KSweepRow{k, EmpiricalCoverage(sets, labels), AverageCardinality(sets)});
  }
  return rows;
}

KSweepReport RunKSweep(const PreparedExperiment& prepared,
                       const ExperimentConfig& config, double alpha,
                       int threads) {
  if (prepared.tuning.empty()) {
    throw InvalidInputError("k sweep needs a non-empty tuning split");
  }
  const auto views =
      ViewQueries(prepared, prepared.tuning, config.assignment.space, threads);
  KSweepReport out;
  out.alpha = alpha;
  out.rows = SweepK(prepared, views, prepared.tuning, alpha);
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    if (out.rows[i].avg_cardinality < out.rows[i - 1].avg_cardinality) {
      throw Error(fmt::format("average cardinality decreased from k = {} to k = {}",
                              out.rows[i - 1].k, out.rows[i].k));
    }
  }
  out.selection = SelectSmallestK(out.rows, alpha, config.conformal.k_margin);
  return out;
}

ExperimentReport RunExperiment(const ExperimentConfig& config, int threads) {
  const PreparedExperiment prepared = Prepare(config, threads);
  const auto space = config.assignment.space;
  const auto views = ViewQueries(prepared, prepared.reporting, space, threads);
  const auto rankings = RankingsOf(views);
  const std::size_t num_clients = prepared.federation.size();

  std::vector<QueryView> tuning_views;
  if (config.HasMethod(kMethodTrustFedAuto)) {
    tuning_views = ViewQueries(prepared, prepared.tuning, space, threads);
  }
  std::vector<CalibrationState> states;
  for (const auto& node : prepared.federation.nodes()) {
    states.push_back(OracleAccess::Calibration(node));
  }

  std::map<std::size_t, double> assignment;
  for (std::size_t k : config.assignment.k_values) {
    assignment[k] = TopKHitRate(rankings, prepared.reporting, k);
  }

  ExperimentReport report;
  for (double alpha : config.conformal.alphas) {
    const auto replies = prepared.federation.CollectThresholds(alpha);
    for (const auto& method : config.methods) {
      if (method == kMethodFcp) {
        const auto sets = SetsWithThreshold(views, PooledThreshold(states, alpha));
        report.rows.push_back(RowFrom(method, alpha, std::nullopt,
                                      Summarize(sets, prepared.reporting)));
      } else if (method == kMethodLocal) {
        std::vector<PredictionSet> sets;
        sets.reserve(views.size());
        for (std::size_t i = 0; i < views.size(); ++i) {
          const int origin = prepared.reporting[i].origin_client;
          sets.push_back(MakePredictionSet(
              views[i].probs, SoftNearestThreshold(replies, std::span(&origin, 1))));
        }
        report.rows.push_back(RowFrom(method, alpha, std::nullopt,
                                      Summarize(sets, prepared.reporting)));
      } else if (method == kMethodTrustFed) {
        for (std::size_t k : config.assignment.k_values) {
          const auto sets = TrustFedSets(prepared, views, alpha, k);
          ReportRow row = RowFrom(method, alpha, k, Summarize(sets, prepared.reporting));
          row.assignment_top_k = assignment;
          report.rows.push_back(std::move(row));
        }
      } else if (method == kMethodTrustFedAuto) {
        const auto sweep = SweepK(prepared, tuning_views, prepared.tuning, alpha);
        const KSelection sel = SelectSmallestK(sweep, alpha, config.conformal.k_margin);
        const auto sets = TrustFedSets(prepared, views, alpha, sel.k);
        ReportRow row = RowFrom(method, alpha, sel.k, Summarize(sets, prepared.reporting));
        row.assignment_top_k = assignment;
        row.assignment_top_k[sel.k] = TopKHitRate(rankings, prepared.reporting, sel.k);
        report.rows.push_back(std::move(row));
      }
    }
  }

  auto& meta = report.metadata;
  meta.data_seed = config.dataset.synthetic.seed;
  meta.partition_seed = config.partition.seed;
  meta.train_seed = config.train.seed;
  meta.config_digest = config.Digest();
  meta.clients = static_cast<int>(num_clients);
  meta.classes = prepared.num_classes;
  meta.assignment_space = ToString(space);
  meta.tuning_samples = prepared.tuning.size();
  meta.test_samples = prepared.reporting.size();
  return report;
}

nlohmann::json ReportToJson(const ExperimentReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"method", r.method},
                    {"alpha", r.alpha},
                    {"k", r.k ? nlohmann::json(*r.k) : nlohmann::json(nullptr)},
                    {"coverage", r.coverage},
                    {"per_client_coverage", MapToJson(r.per_client_coverage)},
                    {"per_class_coverage", MapToJson(r.per_class_coverage)},
                    {"avg_cardinality", r.avg_cardinality},
                    {"assignment_top_k", MapToJson(r.assignment_top_k)}});
  }
  const auto& m = report.metadata;
  return {{"rows", rows},
          {"metadata",
           {{"data_seed", m.data_seed},
            {"partition_seed", m.partition_seed},
            {"train_seed", m.train_seed},
            {"config_digest", m.config_digest},
            {"clients", m.clients},
            {"classes", m.classes},
            {"assignment_space", m.assignment_space},
            {"tuning_samples", m.tuning_samples},
            {"test_samples", m.test_samples}}}};
}

ExperimentReport ReportFromJson(const nlohmann::json& j) {
  ExperimentReport report;
  for (const auto& r : j.at("rows")) {
    ReportRow row;
    row.method = r.at("method").get<std::string>();
    row.alpha = r.at("alpha").get<double>();
    if (!r.at("k").is_null()) row.k = r.at("k").get<std::size_t>();
    row.coverage = r.at("coverage").get<double>();
    row.per_client_coverage = MapFromJson<int>(r.at("per_client_coverage"));
    row.per_class_coverage = MapFromJson<int>(r.at("per_class_coverage"));
    row.avg_cardinality = r.at("avg_cardinality").get<double>();
    row.assignment_top_k = MapFromJson<std::size_t>(r.at("assignment_top_k"));
    report.rows.push_back(std::move(row));
  }
  const auto& m = j.at("metadata");
  auto& meta = report.metadata;
  meta.data_seed = m.at("data_seed").get<uint64_t>();
  meta.partition_seed = m.at("partition_seed").get<uint64_t>();
  meta.train_seed = m.at("train_seed").get<uint64_t>();
  meta.config_digest = m.at("config_digest").get<std::string>();
  meta.clients = m.at("clients").get<int>();
  meta.classes = m.at("classes").get<int>();
  meta.assignment_space = m.at("assignment_space").get<std::string>();
  meta.tuning_samples = m.at("tuning_samples").get<std::size_t>();
  meta.test_samples = m.at("test_samples").get<std::size_t>();
  return report;
}

std::string FormatReportCsv(const ExperimentReport& report) {
  std::string out = "method,alpha,k,metric,value\n";
  for (const auto& r : report.rows) {
    const std::string prefix = fmt::format("{},{},{},", r.method, FormatNumber(r.alpha),
                                           r.k ? std::to_string(*r.k) : std::string());
    auto emit = [&](const std::string& metric, double value) {
      out += prefix;
      out += metric;
      out += ',';
      out += FormatNumber(value);
      out += '\n';
    };
    emit("coverage", r.coverage);
    emit("avg_cardinality", r.avg_cardinality);
    for (const auto& [id, v] : r.per_client_coverage) emit(fmt::format("coverage_client_{}", id), v);
    for (const auto& [y, v] : r.per_class_coverage) emit(fmt::format("coverage_class_{}", y), v);
    for (const auto& [k, v] : r.assignment_top_k) emit(fmt::format("assignment_top_{}", k), v);
  }
  return out;
}

std::string FormatKSweepCsv(const KSweepReport& sweep, double margin) {
  std::string out = "k,coverage,avg_cardinality,meets_target,selected,warning\n";
  const double target = (1.0 - sweep.alpha) + margin;
  for (const auto& row : sweep.rows) {
    const bool selected = row.k == sweep.selection.k;
    out += fmt::format("{},{},{},{},{},{}\n", row.k, FormatNumber(row.coverage),
                       FormatNumber(row.avg_cardinality),
                       row.coverage >= target ? 1 : 0, selected ? 1 : 0,
                       (selected && !sweep.selection.met_target) ? 1 : 0);
  }
  return out;
}

}  // namespace trustfed
