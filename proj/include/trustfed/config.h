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
#ifndef TRUSTFED_CONFIG_H_
#define TRUSTFED_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trustfed/core.h"
#include "trustfed/fedtrain.h"
#include "trustfed/partition.h"
#include "trustfed/pipeline.h"

namespace trustfed {

// Invalid experiment configuration. `field` is the dotted key path
// ("train.rounds") and `line` the 1-based line in the config file, when known.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message,
              std::optional<int> line = std::nullopt)
      : Error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)),
        line_(line) {}
  const std::string& field() const { return field_; }
  std::optional<int> line() const { return line_; }

 private:
  std::string field_;
  std::optional<int> line_;
};

enum class DataSource { kSynthetic, kCsv };

struct DatasetConfig {
  DataSource source = DataSource::kSynthetic;
  std::filesystem::path path;  // csv source; relative paths resolve against the config file
  SyntheticSpec synthetic;
};

struct ConformalConfig {
  std::vector<double> alphas = {0.1};
  // Share of each client's test split held out for choosing k.
  double tuning_fraction = 0.5;
  double k_margin = 0.0;
};

struct AssignmentConfig {
  std::vector<std::size_t> k_values;
  AssignmentSpace space = AssignmentSpace::kFeature;
};

// Method names accepted in the `methods` list.
inline constexpr const char* kMethodTrustFed = "trustfed";
inline constexpr const char* kMethodTrustFedAuto = "trustfed_auto";
inline constexpr const char* kMethodFcp = "fcp";
inline constexpr const char* kMethodLocal = "local";

struct OutputConfig {
  std::filesystem::path directory = "out";
  std::vector<std::string> formats = {"csv", "json"};
};

struct ExperimentConfig {
  DatasetConfig dataset;
  PartitionSpec partition;
  TrainConfig train;
  ConformalConfig conformal;
  AssignmentConfig assignment;
  std::vector<std::string> methods = {kMethodTrustFed, kMethodFcp, kMethodLocal};
  OutputConfig output;

  bool HasMethod(const std::string& name) const;
  // Sets the data, partition and training seeds to `seed`.
  void OverrideSeeds(uint64_t seed);
  // Throws ConfigError naming the offending field.
  void Validate() const;
  nlohmann::json ToJson() const;
  // Hex FNV-1a digest of the canonical JSON form, output section excluded.
  std::string Digest() const;
};

// Parses the YAML experiment file. Unknown keys are errors. Relative dataset
// paths are resolved against `base_dir`.
ExperimentConfig ParseConfig(const std::string& text,
                             const std::filesystem::path& base_dir = {});
ExperimentConfig LoadConfig(const std::filesystem::path& path);

}  // namespace trustfed

#endif  // TRUSTFED_CONFIG_H_
