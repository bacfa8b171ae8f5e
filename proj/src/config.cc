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
#include "trustfed/config.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace trustfed {
namespace {

std::optional<int> LineOf(const YAML::Node& node) {
  const YAML::Mark mark = node.Mark();
  if (mark.line < 0) return std::nullopt;
  return mark.line + 1;
}

// Reads one YAML document while remembering where each field was defined, so
// that semantic validation can point at a line.
class Reader {
 public:
  std::map<std::string, int> lines;

  void Record(const std::string& field, const YAML::Node& node) {
    if (auto l = LineOf(node)) lines[field] = *l;
  }

  void CheckKeys(const YAML::Node& map, const std::string& section,
                 std::initializer_list<std::string_view> allowed) {
    if (!map.IsMap()) {
      throw ConfigError(section, "expected a mapping", LineOf(map));
    }
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw ConfigError(section.empty() ? key : section + "." + key,
                          "unknown key", LineOf(kv.first));
      }
    }
  }

  template <typename T>
  void Read(const YAML::Node& map, const std::string& section,
            const std::string& key, T& out) {
    const YAML::Node node = map[key];
    if (!node) return;
    const std::string field = section + "." + key;
    Record(field, node);
    try {
      out = node.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(field, "value has the wrong type", LineOf(node));
    }
  }
};

template <typename T>
bool HasDuplicates(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  return std::adjacent_find(v.begin(), v.end()) != v.end();
}

uint64_t Fnv1a(const std::string& text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

bool ExperimentConfig::HasMethod(const std::string& name) const {
  return std::find(methods.begin(), methods.end(), name) != methods.end();
}

void ExperimentConfig::OverrideSeeds(uint64_t seed) {
  dataset.synthetic.seed = seed;
  partition.seed = seed;
  train.seed = seed;
}

void ExperimentConfig::Validate() const {
  if (dataset.source == DataSource::kCsv && dataset.path.empty()) {
    throw ConfigError("dataset.path", "required when source is csv");
  }
  if (dataset.source == DataSource::kSynthetic) {
    const auto& s = dataset.synthetic;
    if (s.classes < 2) throw ConfigError("dataset.synthetic.classes", "must be >= 2");
    if (s.dim < 2) throw ConfigError("dataset.synthetic.dim", "must be >= 2");
    if (s.per_class < 1) throw ConfigError("dataset.synthetic.per_class", "must be >= 1");
    if (!(s.separation >= 0.0) || !std::isfinite(s.separation)) {
      throw ConfigError("dataset.synthetic.separation", "must be finite and >= 0");
    }
  }

  const auto& p = partition;
  if (p.clients < 2) throw ConfigError("partition.clients", "must be >= 2");
  if (!(p.cal_fraction > 0.0 && p.cal_fraction < 1.0)) {
    throw ConfigError("partition.cal_fraction", "must lie in (0, 1)");
  }
  if (!(p.test_fraction > 0.0 && p.test_fraction < 1.0)) {
    throw ConfigError("partition.test_fraction", "must lie in (0, 1)");
  }
  if (!(p.cal_fraction + p.test_fraction < 1.0)) {
    throw ConfigError("partition.test_fraction", "cal_fraction + test_fraction must be < 1");
  }
  if (p.kind == PartitionKind::kClassSkew &&
      !(p.dirichlet_beta > 0.0 && std::isfinite(p.dirichlet_beta))) {
    throw ConfigError("partition.dirichlet_beta", "must be positive");
  }
  if (p.kind == PartitionKind::kSampleSkew) {
    try {
      p.Validate();
    } catch (const InvalidInputError& e) {
      throw ConfigError("partition.sample_weights", e.what());
    }
  }

  const auto& t = train;
  if (t.rounds < 1) throw ConfigError("train.rounds", "must be >= 1");
  if (t.local_epochs < 1) throw ConfigError("train.local_epochs", "must be >= 1");
  if (t.batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
  if (!(t.learning_rate > 0.0) || !std::isfinite(t.learning_rate)) {
    throw ConfigError("train.learning_rate", "must be positive");
  }
  if (t.hidden_dim < 1) throw ConfigError("train.hidden_dim", "must be >= 1");

  if (conformal.alphas.empty()) throw ConfigError("conformal.alphas", "must not be empty");
  for (double a : conformal.alphas) {
    if (!(a > 0.0 && a < 1.0)) {
      throw ConfigError("conformal.alphas", fmt::format("{} outside (0, 1)", a));
    }
  }
  if (HasDuplicates(conformal.alphas)) {
    throw ConfigError("conformal.alphas", "duplicate entries");
  }
  if (!(conformal.tuning_fraction >= 0.0 && conformal.tuning_fraction < 1.0)) {
    throw ConfigError("conformal.tuning_fraction", "must lie in [0, 1)");
  }
  if (!(std::abs(conformal.k_margin) <= 1.0)) {
    throw ConfigError("conformal.k_margin", "must lie in [-1, 1]");
  }

  for (std::size_t k : assignment.k_values) {
    if (k < 1 || k > static_cast<std::size_t>(p.clients)) {
      throw ConfigError("assignment.k_values",
                        fmt::format("k = {} outside [1, {}]", k, p.clients));
    }
  }
  if (HasDuplicates(assignment.k_values)) {
    throw ConfigError("assignment.k_values", "duplicate entries");
  }

  if (methods.empty()) throw ConfigError("methods", "at least one method is required");
  for (const auto& m : methods) {
    if (m != kMethodTrustFed && m != kMethodTrustFedAuto && m != kMethodFcp &&
        m != kMethodLocal) {
      throw ConfigError("methods", fmt::format("unknown method '{}'", m));
    }
  }
  if (HasDuplicates(methods)) throw ConfigError("methods", "duplicate entries");
  if (HasMethod(kMethodTrustFed) && assignment.k_values.empty()) {
    throw ConfigError("assignment.k_values", "must not be empty when trustfed is requested");
  }
  if (HasMethod(kMethodTrustFedAuto) && conformal.tuning_fraction <= 0.0) {
    throw ConfigError("conformal.tuning_fraction",
                      "must be positive when trustfed_auto is requested");
  }

  for (const auto& f : output.formats) {
    if (f != "csv" && f != "json") {
      throw ConfigError("output.formats", fmt::format("unknown format '{}'", f));
    }
  }
}

nlohmann::json ExperimentConfig::ToJson() const {
  nlohmann::json j;
  j["dataset"] = {
      {"source", dataset.source == DataSource::kCsv ? "csv" : "synthetic"},
      {"path", dataset.path.generic_string()},
      {"synthetic",
       {{"classes", dataset.synthetic.classes},
        {"dim", dataset.synthetic.dim},
        {"per_class", dataset.synthetic.per_class},
        {"separation", dataset.synthetic.separation},
        {"seed", dataset.synthetic.seed}}}};
  j["partition"] = {{"kind", ToString(partition.kind)},
                    {"clients", partition.clients},
                    {"dirichlet_beta", partition.dirichlet_beta},
                    {"sample_weights", partition.sample_weights},
                    {"seed", partition.seed},
                    {"cal_fraction", partition.cal_fraction},
                    {"test_fraction", partition.test_fraction}};
  j["train"] = {{"rounds", train.rounds},
                {"local_epochs", train.local_epochs},
                {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"seed", train.seed},
                {"hidden_dim", train.hidden_dim}};
  j["conformal"] = {{"alphas", conformal.alphas},
                    {"tuning_fraction", conformal.tuning_fraction},
                    {"k_margin", conformal.k_margin}};
  j["assignment"] = {{"k_values", assignment.k_values},
                     {"space", ToString(assignment.space)}};
  j["methods"] = methods;
  j["output"] = {{"directory", output.directory.generic_string()},
                 {"formats", output.formats}};
  return j;
}

std::string ExperimentConfig::Digest() const {
  // Where reports land does not change them.
  nlohmann::json j = ToJson();
  j.erase("output");
  return fmt::format("{:016x}", Fnv1a(j.dump()));
}

ExperimentConfig ParseConfig(const std::string& text,
                             const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("", e.msg, e.mark.line >= 0 ? std::optional<int>(e.mark.line + 1)
                                                  : std::nullopt);
  }
  Reader r;
  ExperimentConfig cfg;
  if (!root || root.IsNull()) throw ConfigError("", "empty configuration");
  r.CheckKeys(root, "", {"dataset", "partition", "train", "conformal",
                         "assignment", "methods", "output"});

  if (const YAML::Node d = root["dataset"]) {
    r.CheckKeys(d, "dataset", {"source", "path", "synthetic"});
    std::string source = "synthetic";
    r.Read(d, "dataset", "source", source);
    if (source == "csv") {
      cfg.dataset.source = DataSource::kCsv;
    } else if (source != "synthetic") {
      throw ConfigError("dataset.source", "expected synthetic or csv",
                        LineOf(d["source"]));
    }
    std::string path;
    r.Read(d, "dataset", "path", path);
    if (!path.empty()) {
      std::filesystem::path p(path);
      cfg.dataset.path = (p.is_relative() && !base_dir.empty()) ? base_dir / p : p;
    }
    if (const YAML::Node s = d["synthetic"]) {
      r.CheckKeys(s, "dataset.synthetic",
                  {"classes", "dim", "per_class", "separation", "seed"});
      auto& syn = cfg.dataset.synthetic;
      r.Read(s, "dataset.synthetic", "classes", syn.classes);
      r.Read(s, "dataset.synthetic", "dim", syn.dim);
      r.Read(s, "dataset.synthetic", "per_class", syn.per_class);
      r.Read(s, "dataset.synthetic", "separation", syn.separation);
      r.Read(s, "dataset.synthetic", "seed", syn.seed);
    }
  }

  if (const YAML::Node p = root["partition"]) {
    r.CheckKeys(p, "partition", {"kind", "clients", "dirichlet_beta", "sample_weights",
                                 "seed", "cal_fraction", "test_fraction"});
    std::string kind = ToString(cfg.partition.kind);
    r.Read(p, "partition", "kind", kind);
    try {
      cfg.partition.kind = PartitionKindFromString(kind);
    } catch (const InvalidInputError& e) {
      throw ConfigError("partition.kind", e.what(), LineOf(p["kind"]));
    }
    r.Read(p, "partition", "clients", cfg.partition.clients);
    r.Read(p, "partition", "dirichlet_beta", cfg.partition.dirichlet_beta);
    r.Read(p, "partition", "sample_weights", cfg.partition.sample_weights);
    r.Read(p, "partition", "seed", cfg.partition.seed);
    r.Read(p, "partition", "cal_fraction", cfg.partition.cal_fraction);
    r.Read(p, "partition", "test_fraction", cfg.partition.test_fraction);
  }

  if (const YAML::Node t = root["train"]) {
    r.CheckKeys(t, "train", {"rounds", "local_epochs", "batch_size",
                             "learning_rate", "seed", "hidden_dim"});
    r.Read(t, "train", "rounds", cfg.train.rounds);
    r.Read(t, "train", "local_epochs", cfg.train.local_epochs);
    r.Read(t, "train", "batch_size", cfg.train.batch_size);
    r.Read(t, "train", "learning_rate", cfg.train.learning_rate);
    r.Read(t, "train", "seed", cfg.train.seed);
    r.Read(t, "train", "hidden_dim", cfg.train.hidden_dim);
  }

  if (const YAML::Node c = root["conformal"]) {
    r.CheckKeys(c, "conformal", {"alphas", "tuning_fraction", "k_margin"});
    r.Read(c, "conformal", "alphas", cfg.conformal.alphas);
    r.Read(c, "conformal", "tuning_fraction", cfg.conformal.tuning_fraction);
    r.Read(c, "conformal", "k_margin", cfg.conformal.k_margin);
  }

  if (const YAML::Node a = root["assignment"]) {
    r.CheckKeys(a, "assignment", {"k_values", "space"});
    std::vector<long long> ks;
    r.Read(a, "assignment", "k_values", ks);
    for (long long k : ks) {
      if (k < 1) throw ConfigError("assignment.k_values", "entries must be >= 1",
                                   LineOf(a["k_values"]));
      cfg.assignment.k_values.push_back(static_cast<std::size_t>(k));
    }
    std::string space = ToString(cfg.assignment.space);
    r.Read(a, "assignment", "space", space);
    try {
      cfg.assignment.space = AssignmentSpaceFromString(space);
    } catch (const InvalidInputError& e) {
      throw ConfigError("assignment.space", e.what(), LineOf(a["space"]));
    }
  }

  if (const YAML::Node m = root["methods"]) {
    r.Record("methods", m);
    try {
      cfg.methods = m.as<std::vector<std::string>>();
    } catch (const YAML::Exception&) {
      throw ConfigError("methods", "expected a list of method names", LineOf(m));
    }
  }

  if (const YAML::Node o = root["output"]) {
    r.CheckKeys(o, "output", {"directory", "formats"});
    std::string dir = cfg.output.directory.string();
    r.Read(o, "output", "directory", dir);
    cfg.output.directory = dir;
    r.Read(o, "output", "formats", cfg.output.formats);
  }

  try {
    cfg.Validate();
  } catch (const ConfigError& e) {
    std::optional<int> line;
    if (auto it = r.lines.find(e.field()); it != r.lines.end()) line = it->second;
    throw ConfigError(e.field(), std::string(e.what()).substr(
                                     e.field().empty() ? 0 : e.field().size() + 2),
                      line);
  }
  return cfg;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", fmt::format("cannot read '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseConfig(buf.str(), path.parent_path());
}

}  // namespace trustfed
