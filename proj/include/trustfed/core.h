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
#ifndef TRUSTFED_CORE_H_
#define TRUSTFED_CORE_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace trustfed {

// Error hierarchy. Every failure raised by the library derives from Error so
// front ends can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// One labelled sample. `origin_client` is evaluation metadata: it records
// which silo the sample came from and is never consulted by the
// calibration or assignment algorithms.
struct LabeledExample {
  std::vector<double> features;
  int label = 0;
  int origin_client = 0;

  friend bool operator==(const LabeledExample&,
                         const LabeledExample&) = default;
};

// Class probabilities; entries in [0, 1] summing to one.
class ProbabilityVector {
 public:
  ProbabilityVector() = default;
  explicit ProbabilityVector(std::vector<double> probs);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> values() const { return probs_; }

 private:
  std::vector<double> probs_;
};

// Hidden representation of one input under a frozen model.
using Embedding = std::vector<double>;

// Subset of {0, ..., C-1}, kept sorted ascending.
class PredictionSet {
 public:
  PredictionSet() = default;
  // `labels` must be strictly increasing.
  explicit PredictionSet(std::vector<int> labels);

  static PredictionSet Full(int num_classes);

  bool Contains(int label) const;
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  const std::vector<int>& labels() const { return labels_; }

  // True when every label of this set is also in `other`.
  bool IsSubsetOf(const PredictionSet& other) const;

  friend bool operator==(const PredictionSet&,
                         const PredictionSet&) = default;

 private:
  std::vector<int> labels_;
};

// Conformal threshold on the nonconformity scale: a finite value in [0, 1]
// or the full-set sentinel, which admits every label and orders strictly
// above every finite value.
class Threshold {
 public:
  static Threshold Finite(double value);
  static Threshold FullSet() { return Threshold(); }

  bool is_full_set() const { return !value_.has_value(); }
  // Precondition: !is_full_set().
  double value() const { return *value_; }

  // True when a candidate label with this score belongs in the set.
  bool Admits(double score) const {
    return is_full_set() || score <= *value_;
  }

  friend bool operator==(const Threshold&, const Threshold&) = default;
  friend std::partial_ordering operator<=>(const Threshold& a,
                                           const Threshold& b);

  std::string ToString() const;

 private:
  Threshold() = default;
  std::optional<double> value_;
};

Threshold Max(const Threshold& a, const Threshold& b);

// Numerically stable softmax; throws InvalidInputError on empty or
// non-finite logits.
ProbabilityVector Softmax(std::span<const double> logits);

// 1-based rank ceil((1 - alpha)(m + 1)) of the order statistic used as the
// conformal threshold, or nullopt when that rank exceeds m (the threshold is
// then the full-set sentinel).
std::optional<std::size_t> QuantileIndex(std::size_t m, double alpha);

// Threshold selected from ascending-sorted scores at miscoverage `alpha`.
Threshold ThresholdFromSorted(std::span<const double> sorted_scores,
                              double alpha);

double Euclidean(std::span<const double> a, std::span<const double> b);

// Squared distance, used by linear scans that only need the argmin.
double SquaredEuclidean(std::span<const double> a, std::span<const double> b);

// Derives an independent 64-bit stream seed from a base seed and a list of
// integer coordinates (purpose tag, client, round, ...).
uint64_t MixSeed(uint64_t base, std::initializer_list<uint64_t> coords);

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). Results must be written to index-addressed slots; the
// first exception thrown by any worker is rethrown.
void ParallelFor(std::size_t n, int threads,
                 const std::function<void(std::size_t)>& fn);

}  // namespace trustfed

#endif  // TRUSTFED_CORE_H_
