// Copyright (c) 2026 The ukat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef UKAT_METRICS_H_
#define UKAT_METRICS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ukat/inference.h"
#include "ukat/labels.h"

namespace ukat {

// Fraction of decisions whose index equals the reference index.
double Accuracy(std::span<const Decision> decisions, std::span<const int> references);

// Non-interpolated AP. Items are ranked by descending score with ties kept in
// input order; returns nullopt when there is no positive.
std::optional<double> AveragePrecision(std::span<const double> scores,
                                       std::span<const std::uint8_t> relevance);

struct MapResult {
  double map = 0.0;
  std::vector<std::optional<double>> per_class;  // nullopt: no positives
  int num_included = 0;
};

// `scores` and `labels` are row-major [items, classes]. Classes without a
// positive are left out of the mean; kArgument when none remain.
MapResult MeanAveragePrecision(std::span<const double> scores,
                               std::span<const std::uint8_t> labels, int num_items,
                               int num_classes);

// Fraction of decisions taking the at branch.
double RejectionRate(std::span<const Decision> decisions);

// Row = reference, column = decided index, both in [0, size). A decision with
// index -1 (rejection) is counted in column `size`.
struct ConfusionMatrix {
  int size = 0;
  std::vector<std::int64_t> counts;  // size x (size + 1)

  std::int64_t at(int reference, int decided) const {
    return counts[static_cast<std::size_t>(reference) * (size + 1) + decided];
  }
  std::int64_t Total() const;
  std::int64_t Diagonal() const;
};

ConfusionMatrix Confusion(std::span<const Decision> decisions, std::span<const int> references,
                          int size);

struct ClassReport {
  std::string label;
  std::int64_t support = 0;
  std::optional<double> ap;
  std::optional<double> recall;  // single-label tasks
};

struct EvalReport {
  std::string dataset;
  std::string task;  // "kws" | "at" | "neg"
  std::int64_t n_samples = 0;
  std::optional<double> accuracy;
  std::optional<double> map;
  std::optional<double> rejection_rate;
  double gamma = 0.4;
  std::uint64_t seed = 0;
  std::vector<ClassReport> per_class;
};

// Fields in documented order.
nlohmann::ordered_json ReportToJson(const EvalReport& report);
// Deterministic text: fixed key order and float formatting.
std::string FormatReport(const EvalReport& report);
std::string PerClassCsv(const EvalReport& report);

}  // namespace ukat

#endif  // UKAT_METRICS_H_
