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
#include "trustfed/cli.h"

#include <fstream>
#include <map>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "trustfed/config.h"
#include "trustfed/eval.h"
#include "trustfed/partition.h"

namespace trustfed::cli {
namespace {

struct Options {
  std::string config_path;
  std::string output_dir;
  std::optional<uint64_t> seed_override;
  int threads = 1;
  std::optional<double> alpha;
};

ExperimentConfig LoadWithOverrides(const Options& opt) {
  ExperimentConfig cfg = LoadConfig(opt.config_path);
  if (opt.seed_override) cfg.OverrideSeeds(*opt.seed_override);
  if (!opt.output_dir.empty()) cfg.output.directory = opt.output_dir;
  return cfg;
}

int CmdGenerate(const Options& opt, std::ostream& out) {
  const ExperimentConfig cfg = LoadWithOverrides(opt);
  if (cfg.dataset.source != DataSource::kSynthetic) {
    throw ConfigError("dataset.source", "generate requires a synthetic source");
  }
  const auto data = GenerateSynthetic(cfg.dataset.synthetic);
  const auto path = cfg.output.directory / "dataset.csv";
  std::filesystem::create_directories(cfg.output.directory);
  WriteFileAtomically(path, FormatCsv(data));
  std::map<int, std::size_t> counts;
  for (const auto& ex : data) ++counts[ex.label];
  out << fmt::format("wrote {} ({} examples, {} classes, d = {})\n", path.string(),
                     data.size(), counts.size(), cfg.dataset.synthetic.dim);
  for (const auto& [label, n] : counts) out << fmt::format("  class {}: {}\n", label, n);
  return kExitOk;
}

int CmdRun(const Options& opt, std::ostream& out) {
  const ExperimentConfig cfg = LoadWithOverrides(opt);
  const ExperimentReport report = RunExperiment(cfg, opt.threads);
  std::filesystem::create_directories(cfg.output.directory);
  for (const auto& format : cfg.output.formats) {
    if (format == "csv") {
      WriteFileAtomically(cfg.output.directory / "report.csv", FormatReportCsv(report));
    } else if (format == "json") {
      WriteFileAtomically(cfg.output.directory / "report.json",
                          ReportToJson(report).dump(2) + "\n");
    }
  }
  out << fmt::format("{:<14} {:>6} {:>4} {:>9} {:>12} {:>14}\n", "method", "alpha",
                     "k", "coverage", "cardinality", "min_client_cov");
  for (const auto& row : report.rows) {
    double min_client = 1.0;
    for (const auto& [id, c] : row.per_client_coverage) min_client = std::min(min_client, c);
    out << fmt::format("{:<14} {:>6} {:>4} {:>9.4f} {:>12.4f} {:>14.4f}\n", row.method,
                       FormatNumber(row.alpha), row.k ? std::to_string(*row.k) : "-",
                       row.coverage, row.avg_cardinality, min_client);
  }
  out << fmt::format("reports written to {}\n", cfg.output.directory.string());
  return kExitOk;
}

int CmdSweepK(const Options& opt, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = LoadWithOverrides(opt);
  const double alpha = opt.alpha.value_or(cfg.conformal.alphas.front());
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("--alpha", "must lie in (0, 1)");
  }
  if (!(cfg.conformal.tuning_fraction > 0.0)) {
    throw ConfigError("conformal.tuning_fraction", "sweep-k needs a positive tuning fraction");
  }
  const PreparedExperiment prepared = Prepare(cfg, opt.threads);
  const KSweepReport sweep = RunKSweep(prepared, cfg, alpha, opt.threads);
  std::filesystem::create_directories(cfg.output.directory);
  WriteFileAtomically(cfg.output.directory / "ksweep.csv",
                      FormatKSweepCsv(sweep, cfg.conformal.k_margin));

  out << fmt::format("k sweep at alpha = {} (target coverage {})\n", FormatNumber(alpha),
                     FormatNumber(1.0 - alpha + cfg.conformal.k_margin));
  out << fmt::format("{:>4} {:>9} {:>12} {:>8}\n", "k", "coverage", "cardinality", "flag");
  for (const auto& row : sweep.rows) {
    std::string flag;
    if (row.k == sweep.selection.k) flag = sweep.selection.met_target ? "selected" : "warning";
    out << fmt::format("{:>4} {:>9.4f} {:>12.4f} {:>8}\n", row.k, row.coverage,
                       row.avg_cardinality, flag);
  }
  out << fmt::format("selected k = {}\n", sweep.selection.k);
  if (!sweep.selection.met_target) {
    err << fmt::format("warning: no k reached the target coverage; using k = {}\n",
                       sweep.selection.k);
  }
  return kExitOk;
}

}  // namespace

void WriteFileAtomically(const std::filesystem::path& path,
                         const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(fmt::format("cannot write '{}'", tmp.string()));
    f << contents;
    f.close();
    if (!f) throw Error(fmt::format("failed writing '{}'", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

int Main(const std::vector<std::string>& args, std::ostream& out,
         std::ostream& err) {
  CLI::App app{"Federated conformal prediction simulator"};
  app.require_subcommand(1);
  Options opt;
  uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "experiment YAML file")->required();
    sub->add_option("--output", opt.output_dir, "output directory (overrides config)");
    sub->add_option("--seed-override", seed, "replace the data, partition and training seeds");
    sub->add_option("--threads", opt.threads, "worker threads (0 = auto)")
        ->check(CLI::NonNegativeNumber);
  };
  CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset CSV");
  CLI::App* run = app.add_subcommand("run", "run the full experiment and write reports");
  CLI::App* sweep = app.add_subcommand("sweep-k", "sweep the neighbourhood size k");
  add_common(generate);
  add_common(run);
  add_common(sweep);
  double alpha = 0.0;
  CLI::Option* alpha_opt = sweep->add_option("--alpha", alpha, "miscoverage level");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();  // program name
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  for (CLI::App* sub : {generate, run, sweep}) {
    if (sub->parsed() && sub->count("--seed-override") > 0) opt.seed_override = seed;
  }
  if (alpha_opt->count() > 0) opt.alpha = alpha;

  try {
    if (generate->parsed()) return CmdGenerate(opt, out);
    if (run->parsed()) return CmdRun(opt, out);
    return CmdSweepK(opt, out, err);
  } catch (const ConfigError& e) {
    if (e.line()) {
      err << fmt::format("{}:{}: {}\n", opt.config_path, *e.line(), e.what());
    } else {
      err << fmt::format("{}: {}\n", opt.config_path, e.what());
    }
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace trustfed::cli
