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
#include "trustfed/partition.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

namespace trustfed {
namespace {

constexpr uint64_t kTagSynthetic = 0x5359;
constexpr uint64_t kTagShuffle = 0x5348;
constexpr uint64_t kTagDirichlet = 0x4449;
constexpr uint64_t kTagClient = 0x434c;

// Deals positions 0..n-1 to clients so that after every prefix of length i
// each client holds within one of weight_k * i items (largest-deficit rule,
// ties to the lowest client id).
std::vector<int> DealByWeights(std::size_t n, std::span<const double> weights) {
  std::vector<int> owner(n);
  std::vector<std::size_t> counts(weights.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    double best_deficit = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const double deficit =
          weights[k] * static_cast<double>(i + 1) - static_cast<double>(counts[k]);
      if (deficit > best_deficit + 1e-12) {
        best_deficit = deficit;
        best = static_cast<int>(k);
      }
    }
    owner[i] = best;
    ++counts[best];
  }
  return owner;
}

std::vector<double> SampleDirichlet(int dim, double beta, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(beta, 1.0);
  std::vector<double> p(dim);
  double total = 0.0;
  for (double& v : p) {
    v = gamma(rng);
    total += v;
  }
  if (!(total > 0.0)) {
    std::fill(p.begin(), p.end(), 1.0 / dim);
    return p;
  }
  for (double& v : p) v /= total;
  return p;
}

std::string_view TrimCr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::vector<std::string_view> SplitCells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string FormatDouble(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

std::string ToString(PartitionKind kind) {
  switch (kind) {
    case PartitionKind::kIid:
      return "iid";
    case PartitionKind::kClassSkew:
      return "class_skew";
    case PartitionKind::kSampleSkew:
      return "sample_skew";
  }
  return "unknown";
}

PartitionKind PartitionKindFromString(const std::string& name) {
  if (name == "iid") return PartitionKind::kIid;
  if (name == "class_skew") return PartitionKind::kClassSkew;
  if (name == "sample_skew") return PartitionKind::kSampleSkew;
  throw InvalidInputError(fmt::format(
      "unknown partition kind '{}' (expected iid, class_skew, sample_skew)",
      name));
}

void PartitionSpec::Validate() const {
  if (clients < 2) throw InvalidInputError("partition needs at least 2 clients");
  if (!(cal_fraction > 0.0 && cal_fraction < 1.0)) {
    throw InvalidInputError("cal_fraction must lie in (0, 1)");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidInputError("test_fraction must lie in (0, 1)");
  }
  if (!(cal_fraction + test_fraction < 1.0)) {
    throw InvalidInputError("cal_fraction + test_fraction must be < 1");
  }
  if (kind == PartitionKind::kClassSkew &&
      !(dirichlet_beta > 0.0 && std::isfinite(dirichlet_beta))) {
    throw InvalidInputError("dirichlet_beta must be positive");
  }
  if (kind == PartitionKind::kSampleSkew) {
    if (sample_weights.size() != static_cast<std::size_t>(clients)) {
      throw InvalidInputError(
          fmt::format("sample_weights has {} entries, expected {}",
                      sample_weights.size(), clients));
    }
    double total = 0.0;
    for (double w : sample_weights) {
      if (!(w >= 0.0)) throw InvalidInputError("sample_weights must be >= 0");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw InvalidInputError("sample_weights must sum to 1");
    }
  }
}

std::vector<double> ClassDirection(int c, int classes, int dim) {
  std::vector<double> u(dim, 0.0);
  const double angle = 2.0 * std::numbers::pi * c / classes;
  u[0] = std::cos(angle);
  u[1] = std::sin(angle);
  return u;
}

std::vector<LabeledExample> GenerateSynthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2 || spec.dim < 2 || spec.per_class < 1 ||
      !(spec.separation >= 0.0)) {
    throw InvalidInputError(
        "synthetic data needs classes >= 2, dim >= 2, per_class >= 1, "
        "separation >= 0");
  }
  std::mt19937_64 rng(MixSeed(spec.seed, {kTagSynthetic}));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<LabeledExample> out;
  out.reserve(static_cast<std::size_t>(spec.classes) * spec.per_class);
  for (int c = 0; c < spec.classes; ++c) {
    const auto u = ClassDirection(c, spec.classes, spec.dim);
    for (int i = 0; i < spec.per_class; ++i) {
      LabeledExample ex;
      ex.label = c;
      ex.features.resize(spec.dim);
      for (int j = 0; j < spec.dim; ++j) {
        ex.features[j] = spec.separation * u[j] + noise(rng);
      }
      out.push_back(std::move(ex));
    }
  }
  return out;
}

SplitSizes ComputeSplitSizes(std::size_t n, double cal_fraction,
                             double test_fraction) {
  const double dn = static_cast<double>(n);
  SplitSizes s;
  s.cal = static_cast<std::size_t>(std::floor(dn * cal_fraction + 1e-9));
  s.test = static_cast<std::size_t>(std::floor(dn * test_fraction + 1e-9));
  if (s.cal == 0 && n >= 3) s.cal = 1;
  s.cal = std::min(s.cal, n);
  s.test = std::min(s.test, n - s.cal);
  s.train = n - s.cal - s.test;
  return s;
}

std::vector<ClientDataset> Partition(std::span<const LabeledExample> data,
                                     const PartitionSpec& spec) {
  spec.Validate();
  if (data.empty()) throw InvalidInputError("cannot partition an empty dataset");
  const std::size_t num_clients = static_cast<std::size_t>(spec.clients);

  std::mt19937_64 rng(MixSeed(spec.seed, {kTagShuffle}));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> members(num_clients);
  switch (spec.kind) {
    case PartitionKind::kIid: {
      const std::vector<double> uniform(num_clients, 1.0 / num_clients);
      const auto owner = DealByWeights(order.size(), uniform);
      for (std::size_t i = 0; i < order.size(); ++i) {
        members[owner[i]].push_back(order[i]);
      }
      break;
    }
    case PartitionKind::kSampleSkew: {
      // Class-grouped sequence dealt by weight keeps per-client class
      // proportions aligned with the global ones.
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return data[a].label < data[b].label;
                       });
      const auto owner = DealByWeights(order.size(), spec.sample_weights);
      for (std::size_t i = 0; i < order.size(); ++i) {
        members[owner[i]].push_back(order[i]);
      }
      break;
    }
    case PartitionKind::kClassSkew: {
      int num_classes = 0;
      for (const auto& ex : data) num_classes = std::max(num_classes, ex.label + 1);
      std::mt19937_64 dir_rng(MixSeed(spec.seed, {kTagDirichlet}));
      std::vector<std::vector<double>> props(num_clients);
      for (auto& p : props) p = SampleDirichlet(num_classes, spec.dirichlet_beta, dir_rng);
      std::vector<std::discrete_distribution<int>> per_class;
      per_class.reserve(num_classes);
      for (int c = 0; c < num_classes; ++c) {
        std::vector<double> w(num_clients);
        double total = 0.0;
        for (std::size_t k = 0; k < num_clients; ++k) {
          w[k] = props[k][c];
          total += w[k];
        }
        if (!(total > 0.0)) std::fill(w.begin(), w.end(), 1.0);
        per_class.emplace_back(w.begin(), w.end());
      }
      for (std::size_t idx : order) {
        const int k = per_class[data[idx].label](dir_rng);
        members[k].push_back(idx);
      }
      break;
    }
  }

  std::vector<ClientDataset> clients(num_clients);
  for (std::size_t k = 0; k < num_clients; ++k) {
    auto& idx = members[k];
    std::mt19937_64 client_rng(MixSeed(spec.seed, {kTagClient, k}));
    std::shuffle(idx.begin(), idx.end(), client_rng);
    const SplitSizes sizes =
        ComputeSplitSizes(idx.size(), spec.cal_fraction, spec.test_fraction);
    if (spec.require_calibration && sizes.cal == 0) {
      throw PartitionDegenerateError(fmt::format(
          "client {} received {} examples, too few for a calibration split", k,
          idx.size()));
    }
    ClientDataset& client = clients[k];
    client.client_id = static_cast<int>(k);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      LabeledExample ex = data[idx[i]];
      ex.origin_client = static_cast<int>(k);
      if (i < sizes.train) {
        client.train.push_back(std::move(ex));
      } else if (i < sizes.train + sizes.cal) {
        client.cal.push_back(std::move(ex));
      } else {
        client.test.push_back(std::move(ex));
      }
    }
  }
  return clients;
}

std::vector<LabeledExample> ParseCsv(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  if (!std::getline(in, raw)) throw ParseError("line 1: missing CSV header");
  const auto header = SplitCells(TrimCr(raw));
  const std::size_t dim = header.size() - 1;
  if (header.size() < 2 || header.back() != "label") {
    throw ParseError("line 1: header must be f0,...,f{d-1},label");
  }
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[j] != fmt::format("f{}", j)) {
      throw ParseError(fmt::format("line 1: expected column 'f{}', found '{}'",
                                   j, header[j]));
    }
  }

  std::vector<LabeledExample> out;
  std::vector<long long> raw_labels;
  std::size_t line_no = 1;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = TrimCr(raw);
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    const auto cells = SplitCells(line);
    if (cells.size() != header.size()) {
      throw ParseError(fmt::format("line {}: expected {} columns, found {}",
                                   line_no, header.size(), cells.size()));
    }
    LabeledExample ex;
    ex.features.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const auto cell = cells[j];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() ||
          ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ParseError(fmt::format("line {}: invalid value '{}' in column f{}",
                                     line_no, cell, j));
      }
      ex.features[j] = v;
    }
    const auto cell = cells[dim];
    long long label = -1;
    auto [ptr, ec] =
        std::from_chars(cell.data(), cell.data() + cell.size(), label);
    if (cell.empty() || ec != std::errc() ||
        ptr != cell.data() + cell.size() || label < 0) {
      throw ParseError(
          fmt::format("line {}: invalid label '{}'", line_no, cell));
    }
    raw_labels.push_back(label);
    out.push_back(std::move(ex));
  }

  std::map<long long, int> dense;
  for (long long l : raw_labels) dense.emplace(l, 0);
  int next = 0;
  for (auto& [orig, mapped] : dense) mapped = next++;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].label = dense[raw_labels[i]];
  return out;
}

std::vector<LabeledExample> LoadCsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseCsv(buf.str());
}

std::string FormatCsv(std::span<const LabeledExample> data) {
  std::string out;
  const std::size_t dim = data.empty() ? 0 : data.front().features.size();
  for (std::size_t j = 0; j < dim; ++j) out += fmt::format("f{},", j);
  out += "label\n";
  for (const auto& ex : data) {
    for (double v : ex.features) {
      out += FormatDouble(v);
      out += ',';
    }
    out += std::to_string(ex.label);
    out += '\n';
  }
  return out;
}

}  // namespace trustfed
