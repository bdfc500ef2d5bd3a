#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aealt/matrix.hpp"

namespace aealt::metrics {

struct ClassificationMetrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    // Binary only (class 1 is "positive"); empty for multiclass.
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> positive_f1;
};

// Per-class precision/recall/F1 use the 0/0 -> 0 convention so degenerate
// classes are penalized rather than dropped.
ClassificationMetrics classification_metrics(const std::vector<int>& y_true,
                                             const std::vector<int>& y_pred,
                                             std::size_t num_classes);

// Rank statistics over anomaly scores (higher = more anomalous). Ties are
// counted exactly: auroc = (wins + 0.5*ties) / (n_pos * n_neg) with integer
// pair counts, aucpr is average precision with tied scores handled as one
// group. Both throw DataError when either class is absent.
double auroc(const Vector& scores, const std::vector<int>& labels);
double aucpr(const Vector& scores, const std::vector<int>& labels);

// Picks the threshold maximizing F1 of the rule "positive iff score >= t"
// over candidate thresholds (the observed scores). Ties prefer the larger
// threshold.
double select_threshold(const Vector& scores, const std::vector<int>& labels);

struct RegressionMetrics {
    double mae = 0.0;
    double rmse = 0.0;
    double r2_oos = 0.0;  // 1 - SSE / sum((y - train_mean)^2)
};

RegressionMetrics regression_metrics(const Vector& y_true, const Vector& y_pred,
                                     double train_mean);

// One evaluated (method, repetition) cell, as consumed by the harness.
struct MetricReport {
    std::map<std::string, double> values;
    std::size_t n = 0;
    std::vector<std::size_t> class_counts;  // empty for regression
};

}  // namespace aealt::metrics
