#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "cardiomm/core/error.hpp"

#include <nlohmann/json.hpp>

namespace cardiomm {

/// ROC AUC as the Mann-Whitney statistic P(s+ > s-) + 0.5 P(s+ = s-),
/// computed with midranks so ties land exactly on the 0.5 convention.
inline double roc_auc(const std::vector<double>& scores,
                      const std::vector<int>& labels) {
  check_arg(scores.size() == labels.size() && !scores.empty(),
            "roc_auc: scores and labels must be equal-length and non-empty");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int y : labels) {
    check_arg(y == 0 || y == 1, "roc_auc: labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(y);
  }
  const std::size_t n_neg = n - n_pos;
  check_arg(n_pos > 0 && n_neg > 0, "roc_auc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // midranks: tied scores all get the mean of their rank range
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double mid = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }

  double rank_sum_pos = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (labels[k] == 1) rank_sum_pos += rank[k];
  double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) *
                                static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

inline ConfusionCounts confusion_counts(const std::vector<int>& preds,
                                        const std::vector<int>& labels) {
  check_arg(preds.size() == labels.size() && !preds.empty(),
            "confusion: preds and labels must be equal-length and non-empty");
  ConfusionCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    check_arg(labels[i] == 0 || labels[i] == 1, "confusion: labels must be 0 or 1");
    check_arg(preds[i] == 0 || preds[i] == 1, "confusion: preds must be 0 or 1");
    if (labels[i] == 1)
      (preds[i] == 1 ? c.tp : c.fn)++;
    else
      (preds[i] == 1 ? c.fp : c.tn)++;
  }
  return c;
}

inline double balanced_accuracy_from_counts(const ConfusionCounts& c) {
  check_arg(c.tp + c.fn > 0 && c.tn + c.fp > 0,
            "balanced_accuracy: both classes must be present");
  double tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  double tnr = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return 0.5 * (tpr + tnr);
}

/// (sensitivity + specificity) / 2 over binary predictions.
inline double balanced_accuracy(const std::vector<int>& preds,
                                const std::vector<int>& labels) {
  return balanced_accuracy_from_counts(confusion_counts(preds, labels));
}

struct MetricsReport {
  double auc = 0.0;
  double balanced_acc = 0.0;
  ConfusionCounts counts;
  std::string task;
  std::string split;
  std::uint64_t seed = 0;
  std::string checkpoint_id;

  nlohmann::json to_json() const {
    return nlohmann::json{{"auc", auc},
                          {"balanced_accuracy", balanced_acc},
                          {"confusion", {{"tp", counts.tp},
                                         {"fp", counts.fp},
                                         {"tn", counts.tn},
                                         {"fn", counts.fn}}},
                          {"task", task},
                          {"split", split},
                          {"seed", seed},
                          {"checkpoint_id", checkpoint_id}};
  }

  static MetricsReport from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.auc = j.at("auc").get<double>();
    r.balanced_acc = j.at("balanced_accuracy").get<double>();
    const auto& c = j.at("confusion");
    r.counts = {c.at("tp").get<std::int64_t>(), c.at("fp").get<std::int64_t>(),
                c.at("tn").get<std::int64_t>(), c.at("fn").get<std::int64_t>()};
    r.task = j.at("task").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.checkpoint_id = j.at("checkpoint_id").get<std::string>();
    return r;
  }
};

/// ROC curve points (threshold, tpr, fpr) at every distinct score.
struct RocPoint {
  double threshold, tpr, fpr;
};

inline std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                       const std::vector<int>& labels) {
  check_arg(scores.size() == labels.size() && !scores.empty(),
            "roc_curve: scores and labels must be equal-length and non-empty");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  double n_pos = 0, n_neg = 0;
  for (int y : labels) (y == 1 ? n_pos : n_neg) += 1;
  check_arg(n_pos > 0 && n_neg > 0, "roc_curve: both classes must be present");
  std::vector<RocPoint> pts;
  double tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    pts.push_back({s, tp / n_pos, fp / n_neg});
  }
  return pts;
}

}  // namespace cardiomm
