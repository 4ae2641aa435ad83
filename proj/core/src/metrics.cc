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

#include "ukat/metrics.h"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ukat/error.h"

namespace ukat {

double Accuracy(std::span<const Decision> decisions, std::span<const int> references) {
  Require(!decisions.empty(), ErrorKind::kArgument, "accuracy of an empty set");
  Require(decisions.size() == references.size(), ErrorKind::kShape,
          "decision and reference counts differ");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i].index == references[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(decisions.size());
}

std::optional<double> AveragePrecision(std::span<const double> scores,
                                       std::span<const std::uint8_t> relevance) {
  Require(scores.size() == relevance.size(), ErrorKind::kShape,
          "score and relevance lengths differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (relevance[order[rank]] == 0) continue;
    ++positives;
    sum += static_cast<double>(positives) / static_cast<double>(rank + 1);
  }
  if (positives == 0) return std::nullopt;
  return sum / static_cast<double>(positives);
}

MapResult MeanAveragePrecision(std::span<const double> scores,
                               std::span<const std::uint8_t> labels, int num_items,
                               int num_classes) {
  Require(num_items >= 1 && num_classes >= 1, ErrorKind::kArgument,
          "mAP needs at least one item and one class");
  const auto n = static_cast<std::size_t>(num_items);
  const auto c = static_cast<std::size_t>(num_classes);
  Require(scores.size() == n * c && labels.size() == n * c, ErrorKind::kShape,
          "score / label matrix shape mismatch");
  MapResult result;
  result.per_class.resize(c);
  std::vector<double> column(n);
  std::vector<std::uint8_t> rel(n);
  double sum = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = scores[i * c + k];
      rel[i] = labels[i * c + k];
    }
    result.per_class[k] = AveragePrecision(column, rel);
    if (result.per_class[k]) {
      sum += *result.per_class[k];
      ++result.num_included;
    }
  }
  Require(result.num_included > 0, ErrorKind::kArgument, "no class has a positive label");
  result.map = sum / result.num_included;
  return result;
}

double RejectionRate(std::span<const Decision> decisions) {
  Require(!decisions.empty(), ErrorKind::kArgument, "rejection rate of an empty set");
  const auto rejected = std::count_if(decisions.begin(), decisions.end(), [](const Decision& d) {
    return d.branch == Branch::kAt;
  });
  return static_cast<double>(rejected) / static_cast<double>(decisions.size());
}

std::int64_t ConfusionMatrix::Total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::Diagonal() const {
  std::int64_t d = 0;
  for (int i = 0; i < size; ++i) d += at(i, i);
  return d;
}

ConfusionMatrix Confusion(std::span<const Decision> decisions, std::span<const int> references,
                          int size) {
  Require(decisions.size() == references.size(), ErrorKind::kShape,
          "decision and reference counts differ");
  ConfusionMatrix m;
  m.size = size;
  m.counts.assign(static_cast<std::size_t>(size) * (size + 1), 0);
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const int ref = references[i];
    const int dec = decisions[i].index < 0 ? size : decisions[i].index;
    Require(ref >= 0 && ref < size && dec <= size, ErrorKind::kArgument,
            "label index outside the confusion matrix");
    ++m.counts[static_cast<std::size_t>(ref) * (size + 1) + dec];
  }
  return m;
}

namespace {

// Fixed-precision rendering keeps reports byte-stable across runs.
nlohmann::json Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return nlohmann::json::parse(buf);
}

}  // namespace

nlohmann::ordered_json ReportToJson(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["dataset"] = report.dataset;
  j["task"] = report.task;
  j["n_samples"] = report.n_samples;
  if (report.accuracy) j["accuracy"] = Num(*report.accuracy);
  if (report.map) j["mAP"] = Num(*report.map);
  if (report.rejection_rate) j["rejection_rate"] = Num(*report.rejection_rate);
  j["gamma"] = Num(report.gamma);
  j["seed"] = report.seed;
  auto per_class = nlohmann::ordered_json::array();
  for (const auto& c : report.per_class) {
    nlohmann::ordered_json row;
    row["label"] = c.label;
    row["support"] = c.support;
    if (c.ap) row["ap"] = Num(*c.ap);
    if (c.recall) row["recall"] = Num(*c.recall);
    per_class.push_back(std::move(row));
  }
  j["per_class"] = std::move(per_class);
  return j;
}

std::string FormatReport(const EvalReport& report) {
  return ReportToJson(report).dump(2) + "\n";
}

std::string PerClassCsv(const EvalReport& report) {
  std::ostringstream os;
  os << "label,support,ap,recall\n";
  char buf[32];
  for (const auto& c : report.per_class) {
    os << c.label << ',' << c.support << ',';
    if (c.ap) {
      std::snprintf(buf, sizeof(buf), "%.6f", *c.ap);
      os << buf;
    }
    os << ',';
    if (c.recall) {
      std::snprintf(buf, sizeof(buf), "%.6f", *c.recall);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace ukat
