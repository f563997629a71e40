// Copyright 2026 The HKG Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hkg/hierarchy.hpp"

namespace hkg::metrics {

/// Sigmoid probabilities and multi-hot truth for one evaluated sample.
struct EvalRecord {
  std::vector<double> probs;
  std::vector<double> truth;
  std::size_t leaf_truth = 0;
};

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct Rates {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Threshold maximising TPR - FPR over {-inf, midpoints between adjacent
/// distinct scores, +inf}; a sample is positive when score >= threshold.
/// Ties resolve to the lowest threshold. Throws DegenerateInputError
/// unless both labels occur.
double youden_threshold(std::span<const double> scores, std::span<const int> labels);

/// TPR - FPR of a fixed threshold.
double youden_index(std::span<const double> scores, std::span<const int> labels, double threshold);

/// Per-class counts; class i is predicted positive iff probs[i] >= thresholds[i].
std::vector<Confusion> confusion(std::span<const EvalRecord> records, std::span<const double> thresholds);

/// Accuracy, precision, recall and F1. A zero denominator yields 0 and
/// appends a note to `warnings` when given.
Rates prf1(const Confusion& c, std::vector<std::string>* warnings = nullptr);

/// sum_n (R_n - R_{n-1}) P_n over descending distinct-score thresholds.
/// Throws DegenerateInputError without positives.
double average_precision(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

/// Points for each candidate threshold, ascending in threshold.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

/// Argmax over leaf probabilities; ties go to the first leaf in node order.
std::size_t leaf_prediction(std::span<const double> probs, const hierarchy::LabelTree& tree);

struct MetricsReport {
  std::vector<std::string> node_order;
  std::vector<double> thresholds;
  std::vector<Confusion> counts;
  std::vector<Rates> per_class;
  std::vector<double> average_precision;  // NaN where the class had no positives
  Rates macro;
  double mean_average_precision = 0.0;

  std::vector<std::string> leaf_names;
  std::vector<double> per_leaf_accuracy;
  std::vector<std::vector<std::uint64_t>> leaf_confusion;  // [truth][predicted]
  double leaf_accuracy = 0.0;
  std::size_t sample_count = 0;
  std::vector<std::string> warnings;

  std::string to_json() const;
  std::string to_text() const;
  void write_leaf_confusion_csv(const std::filesystem::path& path) const;
};

/// Per-class Youden thresholds fitted on `calibration` (classes without
/// both labels fall back to 0.5 with a warning).
std::vector<double> fit_thresholds(std::span<const EvalRecord> calibration, std::size_t class_count,
                                   std::vector<std::string>* warnings = nullptr);

/// Scores `test` with the given per-class thresholds.
MetricsReport build_report(const hierarchy::LabelTree& tree, std::span<const EvalRecord> test,
                           std::span<const double> thresholds, std::vector<std::string> warnings = {});

/// Writes threshold, fpr, tpr per class to <dir>/roc_<index>.csv.
void write_roc_csv(const std::filesystem::path& dir, const hierarchy::LabelTree& tree,
                   std::span<const EvalRecord> records);

}  // namespace hkg::metrics
