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
#ifndef TRUSTFED_PARTITION_H_
#define TRUSTFED_PARTITION_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trustfed/core.h"

namespace trustfed {

class ParseError : public Error {
 public:
  using Error::Error;
};

// A client ends up with too few examples to hold a calibration split.
class PartitionDegenerateError : public Error {
 public:
  using Error::Error;
};

// One institutional silo: disjoint train / calibration / test splits.
struct ClientDataset {
  int client_id = 0;
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> cal;
  std::vector<LabeledExample> test;

  std::size_t size() const { return train.size() + cal.size() + test.size(); }
  friend bool operator==(const ClientDataset&, const ClientDataset&) = default;
};

enum class PartitionKind { kIid, kClassSkew, kSampleSkew };

std::string ToString(PartitionKind kind);
PartitionKind PartitionKindFromString(const std::string& name);

struct PartitionSpec {
  PartitionKind kind = PartitionKind::kIid;
  int clients = 2;
  double dirichlet_beta = 0.5;        // class_skew concentration
  std::vector<double> sample_weights; // sample_skew; one per client, sum 1
  uint64_t seed = 0;
  double cal_fraction = 0.25;
  double test_fraction = 0.25;
  bool require_calibration = true;

  // Throws InvalidInputError describing the first violated invariant.
  void Validate() const;
};

struct SyntheticSpec {
  int classes = 3;
  int dim = 2;
  int per_class = 100;
  double separation = 4.0;
  uint64_t seed = 0;
};

// Gaussian mixture: class c is N(separation * u_c, I_d) where the u_c are
// evenly spaced unit vectors on the plane of the first two coordinates.
// Output is grouped by class, class 0 first.
std::vector<LabeledExample> GenerateSynthetic(const SyntheticSpec& spec);

// Unit direction of class `c` among `classes` (length `dim`).
std::vector<double> ClassDirection(int c, int classes, int dim);

// Splits `data` into `spec.clients` silos. Deterministic in (data, spec).
std::vector<ClientDataset> Partition(std::span<const LabeledExample> data,
                                     const PartitionSpec& spec);

// Sizes of the (train, cal, test) splits for a client holding n examples.
struct SplitSizes {
  std::size_t train = 0;
  std::size_t cal = 0;
  std::size_t test = 0;
};
SplitSizes ComputeSplitSizes(std::size_t n, double cal_fraction,
                             double test_fraction);

// CSV contract: header `f0,...,f{d-1},label`, one example per row. Labels are
// remapped to a dense 0-based range preserving their sorted order.
std::vector<LabeledExample> LoadCsv(const std::filesystem::path& path);
std::vector<LabeledExample> ParseCsv(const std::string& text);

// Serializes examples in the CSV contract (shortest round-trip decimals).
std::string FormatCsv(std::span<const LabeledExample> data);

}  // namespace trustfed

#endif  // TRUSTFED_PARTITION_H_
