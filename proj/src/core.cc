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
#include "trustfed/core.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

namespace trustfed {

ProbabilityVector::ProbabilityVector(std::vector<double> probs)
    : probs_(std::move(probs)) {
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvalidInputError(fmt::format("probability {} outside [0, 1]", p));
    }
    total += p;
  }
  if (probs_.empty() || std::abs(total - 1.0) > 1e-6) {
    throw InvalidInputError(
        fmt::format("probabilities sum to {}, expected 1", total));
  }
}

PredictionSet::PredictionSet(std::vector<int> labels)
    : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || (i > 0 && labels_[i] <= labels_[i - 1])) {
      throw InvalidInputError("prediction set labels must be strictly "
                              "increasing non-negative integers");
    }
  }
}

PredictionSet PredictionSet::Full(int num_classes) {
  std::vector<int> all(num_classes);
  for (int c = 0; c < num_classes; ++c) all[c] = c;
  return PredictionSet(std::move(all));
}

bool PredictionSet::Contains(int label) const {
  return std::binary_search(labels_.begin(), labels_.end(), label);
}

bool PredictionSet::IsSubsetOf(const PredictionSet& other) const {
  return std::includes(other.labels_.begin(), other.labels_.end(),
                       labels_.begin(), labels_.end());
}

Threshold Threshold::Finite(double value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw InvalidInputError(
        fmt::format("finite threshold {} outside [0, 1]", value));
  }
  Threshold t;
  t.value_ = value;
  return t;
}

std::partial_ordering operator<=>(const Threshold& a, const Threshold& b) {
  if (a.is_full_set() || b.is_full_set()) {
    return static_cast<int>(a.is_full_set()) <=>
           static_cast<int>(b.is_full_set());
  }
  return *a.value_ <=> *b.value_;
}

std::string Threshold::ToString() const {
  return is_full_set() ? std::string("full") : fmt::format("{}", *value_);
}

Threshold Max(const Threshold& a, const Threshold& b) {
  return (a < b) ? b : a;
}

ProbabilityVector Softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInputError("softmax of empty logits");
  double top = logits[0];
  for (double z : logits) {
    if (!std::isfinite(z)) throw InvalidInputError("non-finite logit");
    top = std::max(top, z);
  }
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return ProbabilityVector(std::move(out));
}

std::optional<std::size_t> QuantileIndex(std::size_t m, double alpha) {
  if (m == 0) throw InvalidInputError("quantile index needs m >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidInputError(fmt::format("alpha {} outside (0, 1)", alpha));
  }
  const double n = static_cast<double>(m + 1);
  // Absorb representation error so that e.g. 0.9 * 10 lands on rank 9.
  const double target = (1.0 - alpha) * n - 1e-12 * n;
  const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(target)));
  if (rank > m) return std::nullopt;
  return rank;
}

Threshold ThresholdFromSorted(std::span<const double> sorted_scores,
                              double alpha) {
  const auto rank = QuantileIndex(sorted_scores.size(), alpha);
  if (!rank) return Threshold::FullSet();
  return Threshold::Finite(sorted_scores[*rank - 1]);
}

double SquaredEuclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError(
        fmt::format("distance between vectors of length {} and {}", a.size(),
                    b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double Euclidean(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(SquaredEuclidean(a, b));
}

uint64_t MixSeed(uint64_t base, std::initializer_list<uint64_t> coords) {
  // splitmix64 finalizer applied after folding in each coordinate.
  auto mix = [](uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  uint64_t h = mix(base);
  for (uint64_t c : coords) h = mix(h ^ mix(c));
  return h;
}

void ParallelFor(std::size_t n, int threads,
                 const std::function<void(std::size_t)>& fn) {
  std::size_t workers =
      threads > 0 ? static_cast<std::size_t>(threads)
                  : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  pool.clear();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace trustfed
