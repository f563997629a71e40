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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "hkg/error.hpp"
#include "hkg/metrics.hpp"

namespace hkg::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_length(std::span<const double> scores, std::span<const int> labels, const char* op) {
  if (scores.size() != labels.size()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(labels.size()) + " labels");
  }
}

// Distinct scores ascending with per-group label counts.
struct Group {
  double score;
  std::uint64_t pos;
  std::uint64_t neg;
};

std::vector<Group> group_scores(std::span<const double> scores, std::span<const int> labels) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<Group> groups;
  for (auto i : idx) {
    if (groups.empty() || groups.back().score != scores[i]) groups.push_back({scores[i], 0, 0});
    (labels[i] ? groups.back().pos : groups.back().neg) += 1;
  }
  return groups;
}

struct Candidate {
  double threshold;
  std::uint64_t tp;
  std::uint64_t fp;
};

// Every candidate threshold in ascending order with its positive counts.
std::vector<Candidate> sweep(std::span<const double> scores, std::span<const int> labels, std::uint64_t& pos,
                             std::uint64_t& neg) {
  const auto groups = group_scores(scores, labels);
  pos = neg = 0;
  for (const auto& g : groups) {
    pos += g.pos;
    neg += g.neg;
  }
  std::vector<Candidate> out;
  out.reserve(groups.size() + 1);
  std::uint64_t tp = pos, fp = neg;
  out.push_back({-kInf, tp, fp});
  for (std::size_t g = 0; g + 1 < groups.size(); ++g) {
    tp -= groups[g].pos;
    fp -= groups[g].neg;
    out.push_back({std::midpoint(groups[g].score, groups[g + 1].score), tp, fp});
  }
  out.push_back({kInf, 0, 0});
  return out;
}

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double youden_threshold(std::span<const double> scores, std::span<const int> labels) {
  require_same_length(scores, labels, "youden_threshold");
  std::uint64_t pos = 0, neg = 0;
  const auto candidates = sweep(scores, labels, pos, neg);
  if (pos == 0 || neg == 0) throw DegenerateInputError("youden_threshold: both classes must be present");
  double best_j = -kInf, best_t = -kInf;
  for (const auto& c : candidates) {
    const double j = ratio(c.tp, pos) - ratio(c.fp, neg);
    if (j > best_j) {
      best_j = j;
      best_t = c.threshold;
    }
  }
  return best_t;
}

double youden_index(std::span<const double> scores, std::span<const int> labels, double threshold) {
  require_same_length(scores, labels, "youden_index");
  std::uint64_t tp = 0, fp = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i]) {
      ++pos;
      tp += predicted;
    } else {
      ++neg;
      fp += predicted;
    }
  }
  return ratio(tp, pos) - ratio(fp, neg);
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  require_same_length(scores, labels, "roc_curve");
  std::uint64_t pos = 0, neg = 0;
  std::vector<RocPoint> out;
  for (const auto& c : sweep(scores, labels, pos, neg)) out.push_back({c.threshold, ratio(c.fp, neg), ratio(c.tp, pos)});
  return out;
}

std::vector<Confusion> confusion(std::span<const EvalRecord> records, std::span<const double> thresholds) {
  std::vector<Confusion> out(thresholds.size());
  for (const auto& r : records) {
    if (r.probs.size() != thresholds.size() || r.truth.size() != thresholds.size())
      throw ShapeError("confusion: record length does not match the threshold count");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      const bool predicted = r.probs[i] >= thresholds[i];
      const bool actual = r.truth[i] > 0.5;
      auto& c = out[i];
      if (predicted && actual) ++c.tp;
      else if (predicted) ++c.fp;
      else if (actual) ++c.fn;
      else ++c.tn;
    }
  }
  return out;
}

Rates prf1(const Confusion& c, std::vector<std::string>* warnings) {
  auto safe = [&](double num, double den, const char* what) {
    if (den == 0.0) {
      if (warnings) warnings->push_back(std::string(what) + " has a zero denominator; reported as 0");
      return 0.0;
    }
    return num / den;
  };
  const auto tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const auto tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  Rates r;
  r.accuracy = safe(tp + tn, tp + tn + fp + fn, "accuracy");
  r.precision = safe(tp, tp + fp, "precision");
  r.recall = safe(tp, tp + fn, "recall");
  r.f1 = safe(2.0 * r.precision * r.recall, r.precision + r.recall, "F1");
  return r;
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  require_same_length(scores, labels, "average_precision");
  const auto groups = group_scores(scores, labels);
  std::uint64_t pos = 0;
  for (const auto& g : groups) pos += g.pos;
  if (pos == 0) throw DegenerateInputError("average_precision: no positive samples");
  double ap = 0.0, prev_recall = 0.0;
  std::uint64_t tp = 0, fp = 0;
  for (auto it = groups.rbegin(); it != groups.rend(); ++it) {
    tp += it->pos;
    fp += it->neg;
    const double recall = ratio(tp, pos);
    const double precision = ratio(tp, tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

std::size_t leaf_prediction(std::span<const double> probs, const hierarchy::LabelTree& tree) {
  if (probs.size() != tree.class_count()) throw ShapeError("leaf_prediction: probability vector length mismatch");
  std::optional<std::size_t> best;
  for (auto leaf : tree.leaves())
    if (!best || probs[leaf] > probs[*best]) best = leaf;
  return *best;
}

std::vector<double> fit_thresholds(std::span<const EvalRecord> calibration, std::size_t class_count,
                                   std::vector<std::string>* warnings) {
  std::vector<double> out(class_count, 0.5);
  std::vector<double> scores(calibration.size());
  std::vector<int> labels(calibration.size());
  for (std::size_t i = 0; i < class_count; ++i) {
    for (std::size_t r = 0; r < calibration.size(); ++r) {
      scores[r] = calibration[r].probs.at(i);
      labels[r] = calibration[r].truth.at(i) > 0.5;
    }
    try {
      out[i] = youden_threshold(scores, labels);
    } catch (const DegenerateInputError&) {
      if (warnings) warnings->push_back("class " + std::to_string(i) + ": single-label calibration data, threshold 0.5");
    }
  }
  return out;
}

MetricsReport build_report(const hierarchy::LabelTree& tree, std::span<const EvalRecord> test,
                           std::span<const double> thresholds, std::vector<std::string> warnings) {
  const std::size_t c = tree.class_count();
  if (thresholds.size() != c) throw ShapeError("build_report: threshold count does not match the tree");
  MetricsReport rep;
  rep.node_order = tree.node_order();
  rep.thresholds.assign(thresholds.begin(), thresholds.end());
  rep.warnings = std::move(warnings);
  rep.sample_count = test.size();
  rep.counts = confusion(test, thresholds);
  std::vector<double> scores(test.size());
  std::vector<int> labels(test.size());
  double ap_sum = 0.0;
  std::size_t ap_n = 0;
  for (std::size_t i = 0; i < c; ++i) {
    rep.per_class.push_back(prf1(rep.counts[i], nullptr));
    const auto& cnt = rep.counts[i];
    if (cnt.tp + cnt.fp == 0) rep.warnings.push_back(tree.name(i) + ": no positive predictions, precision reported as 0");
    if (cnt.tp + cnt.fn == 0) rep.warnings.push_back(tree.name(i) + ": no positive samples, recall reported as 0");
    for (std::size_t r = 0; r < test.size(); ++r) {
      scores[r] = test[r].probs[i];
      labels[r] = test[r].truth[i] > 0.5;
    }
    double ap = std::numeric_limits<double>::quiet_NaN();
    if (std::find(labels.begin(), labels.end(), 1) != labels.end()) {
      ap = average_precision(scores, labels);
      ap_sum += ap;
      ++ap_n;
    }
    rep.average_precision.push_back(ap);
  }
  for (const auto& r : rep.per_class) {
    rep.macro.accuracy += r.accuracy / static_cast<double>(c);
    rep.macro.precision += r.precision / static_cast<double>(c);
    rep.macro.recall += r.recall / static_cast<double>(c);
    rep.macro.f1 += r.f1 / static_cast<double>(c);
  }
  rep.mean_average_precision = ap_n ? ap_sum / static_cast<double>(ap_n) : 0.0;

  const auto leaves = tree.leaves();
  std::vector<std::size_t> leaf_slot(c, 0);
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    leaf_slot[leaves[k]] = k;
    rep.leaf_names.push_back(tree.name(leaves[k]));
  }
  rep.leaf_confusion.assign(leaves.size(), std::vector<std::uint64_t>(leaves.size(), 0));
  std::size_t correct = 0;
  for (const auto& r : test) {
    const auto pred = leaf_prediction(r.probs, tree);
    rep.leaf_confusion[leaf_slot.at(r.leaf_truth)][leaf_slot[pred]] += 1;
    correct += pred == r.leaf_truth;
  }
  rep.leaf_accuracy = test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const auto& row = rep.leaf_confusion[k];
    const auto total = std::accumulate(row.begin(), row.end(), std::uint64_t{0});
    rep.per_leaf_accuracy.push_back(ratio(row[k], total));
  }
  return rep;
}

namespace {

nlohmann::ordered_json number_or_text(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

nlohmann::ordered_json rates_json(const Rates& r) {
  return {{"accuracy", r.accuracy}, {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}};
}

}  // namespace

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["sample_count"] = sample_count;
  doc["leaf_accuracy"] = leaf_accuracy;
  doc["macro"] = rates_json(macro);
  doc["mean_average_precision"] = mean_average_precision;
  auto& classes = doc["classes"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < node_order.size(); ++i) {
    nlohmann::ordered_json item;
    item["name"] = node_order[i];
    item["threshold"] = number_or_text(thresholds[i]);
    item["tp"] = counts[i].tp;
    item["fp"] = counts[i].fp;
    item["tn"] = counts[i].tn;
    item["fn"] = counts[i].fn;
    item["rates"] = rates_json(per_class[i]);
    item["average_precision"] = number_or_text(average_precision[i]);
    classes.push_back(item);
  }
  auto& leaves = doc["leaves"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < leaf_names.size(); ++k)
    leaves.push_back({{"name", leaf_names[k]}, {"accuracy", per_leaf_accuracy[k]}});
  doc["leaf_confusion"] = leaf_confusion;
  doc["warnings"] = warnings;
  return doc.dump(2);
}

std::string MetricsReport::to_text() const {
  std::ostringstream out;
  std::size_t width = 8;
  for (const auto& n : node_order) width = std::max(width, n.size());
  for (const auto& n : leaf_names) width = std::max(width, n.size());
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %9s %6s %6s %6s %6s %7s %7s %7s %7s %7s\n", static_cast<int>(width), "class",
                "threshold", "TP", "FP", "TN", "FN", "Acc", "Pre", "Rec", "F1", "AP");
  out << buf;
  for (std::size_t i = 0; i < node_order.size(); ++i) {
    const auto& r = per_class[i];
    std::snprintf(buf, sizeof(buf), "%-*s %9.4g %6llu %6llu %6llu %6llu %7.4f %7.4f %7.4f %7.4f %7.4f\n",
                  static_cast<int>(width), node_order[i].c_str(), thresholds[i],
                  static_cast<unsigned long long>(counts[i].tp), static_cast<unsigned long long>(counts[i].fp),
                  static_cast<unsigned long long>(counts[i].tn), static_cast<unsigned long long>(counts[i].fn),
                  r.accuracy, r.precision, r.recall, r.f1, average_precision[i]);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-*s %9s %6s %6s %6s %6s %7.4f %7.4f %7.4f %7.4f %7.4f\n", static_cast<int>(width),
                "macro", "", "", "", "", "", macro.accuracy, macro.precision, macro.recall, macro.f1,
                mean_average_precision);
  out << buf << '\n';
  for (std::size_t k = 0; k < leaf_names.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%-*s leaf accuracy %7.4f\n", static_cast<int>(width), leaf_names[k].c_str(),
                  per_leaf_accuracy[k]);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-*s leaf accuracy %7.4f  (%zu samples)\n", static_cast<int>(width), "overall",
                leaf_accuracy, sample_count);
  out << buf;
  return out.str();
}

void MetricsReport::write_leaf_confusion_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "truth\\predicted";
  for (const auto& n : leaf_names) out << ',' << n;
  out << '\n';
  for (std::size_t k = 0; k < leaf_names.size(); ++k) {
    out << leaf_names[k];
    for (auto v : leaf_confusion[k]) out << ',' << v;
    out << '\n';
  }
}

void write_roc_csv(const std::filesystem::path& dir, const hierarchy::LabelTree& tree,
                   std::span<const EvalRecord> records) {
  std::filesystem::create_directories(dir);
  std::vector<double> scores(records.size());
  std::vector<int> labels(records.size());
  for (std::size_t i = 0; i < tree.class_count(); ++i) {
    for (std::size_t r = 0; r < records.size(); ++r) {
      scores[r] = records[r].probs[i];
      labels[r] = records[r].truth[i] > 0.5;
    }
    std::ofstream out(dir / ("roc_" + std::to_string(i) + ".csv"), std::ios::binary);
    out << "# " << tree.name(i) << "\nthreshold,fpr,tpr\n";
    for (const auto& p : roc_curve(scores, labels)) out << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
  }
}

}  // namespace hkg::metrics
