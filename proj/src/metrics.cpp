#include "aealt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "aealt/errors.hpp"

namespace aealt::metrics {

ClassificationMetrics classification_metrics(const std::vector<int>& y_true,
                                             const std::vector<int>& y_pred,
                                             std::size_t num_classes) {
    if (y_true.size() != y_pred.size()) throw DataError("metrics: prediction count mismatch");
    if (y_true.empty()) throw DataError("metrics: empty evaluation set");
    if (num_classes < 2) throw DataError("metrics: need at least two classes");

    std::vector<std::int64_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i], p = y_pred[i];
        if (t < 0 || static_cast<std::size_t>(t) >= num_classes || p < 0 ||
            static_cast<std::size_t>(p) >= num_classes)
            throw DataError("metrics: label out of range");
        if (t == p) {
            ++correct;
            ++tp[static_cast<std::size_t>(t)];
        } else {
            ++fn[static_cast<std::size_t>(t)];
            ++fp[static_cast<std::size_t>(p)];
        }
    }

    auto safe_div = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };

    ClassificationMetrics out;
    out.accuracy = static_cast<double>(correct) / static_cast<double>(y_true.size());
    double f1_sum = 0.0;
    std::vector<double> prec(num_classes), rec(num_classes), f1(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        prec[c] = safe_div(static_cast<double>(tp[c]), static_cast<double>(tp[c] + fp[c]));
        rec[c] = safe_div(static_cast<double>(tp[c]), static_cast<double>(tp[c] + fn[c]));
        f1[c] = safe_div(2.0 * prec[c] * rec[c], prec[c] + rec[c]);
        f1_sum += f1[c];
    }
    out.macro_f1 = f1_sum / static_cast<double>(num_classes);
    if (num_classes == 2) {
        out.precision = prec[1];
        out.recall = rec[1];
        out.positive_f1 = f1[1];
    }
    return out;
}

namespace {

struct ScoredLabels {
    std::vector<std::pair<double, int>> pairs;  // sorted descending by score
    std::int64_t n_pos = 0, n_neg = 0;
};

ScoredLabels sort_scores(const Vector& scores, const std::vector<int>& labels,
                         const char* what) {
    if (scores.size() != labels.size()) throw DataError(std::string(what) + ": size mismatch");
    ScoredLabels s;
    s.pairs.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw DataError(std::string(what) + ": non-finite score");
        if (labels[i] != 0 && labels[i] != 1)
            throw DataError(std::string(what) + ": labels must be 0/1");
        s.pairs.emplace_back(scores[i], labels[i]);
        if (labels[i] == 1)
            ++s.n_pos;
        else
            ++s.n_neg;
    }
    if (s.n_pos == 0 || s.n_neg == 0)
        throw DataError(std::string(what) + ": needs both classes present");
    std::sort(s.pairs.begin(), s.pairs.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    return s;
}

}  // namespace

double auroc(const Vector& scores, const std::vector<int>& labels) {
    ScoredLabels s = sort_scores(scores, labels, "auroc");
    // Walk from the lowest score upward: every positive beats all the
    // negatives strictly below it and half-ties the negatives at its score.
    std::int64_t wins = 0, ties = 0;
    std::int64_t neg_below = 0;
    std::size_t i = s.pairs.size();
    while (i > 0) {
        std::size_t j = i;
        std::int64_t group_pos = 0, group_neg = 0;
        const double v = s.pairs[i - 1].first;
        while (j > 0 && s.pairs[j - 1].first == v) {
            if (s.pairs[j - 1].second == 1)
                ++group_pos;
            else
                ++group_neg;
            --j;
        }
        wins += group_pos * neg_below;
        ties += group_pos * group_neg;
        neg_below += group_neg;
        i = j;
    }
    return (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) /
           (static_cast<double>(s.n_pos) * static_cast<double>(s.n_neg));
}

double aucpr(const Vector& scores, const std::vector<int>& labels) {
    ScoredLabels s = sort_scores(scores, labels, "aucpr");
    // Average precision: sum over descending tie groups of
    // (recall gain) * (precision at the group boundary).
    std::int64_t tp = 0, fp = 0;
    double ap = 0.0;
    std::size_t i = 0;
    while (i < s.pairs.size()) {
        std::size_t j = i;
        std::int64_t group_pos = 0, group_neg = 0;
        const double v = s.pairs[i].first;
        while (j < s.pairs.size() && s.pairs[j].first == v) {
            if (s.pairs[j].second == 1)
                ++group_pos;
            else
                ++group_neg;
            ++j;
        }
        tp += group_pos;
        fp += group_neg;
        if (group_pos > 0) {
            const double precision =
                static_cast<double>(tp) / static_cast<double>(tp + fp);
            const double recall_gain =
                static_cast<double>(group_pos) / static_cast<double>(s.n_pos);
            ap += recall_gain * precision;
        }
        i = j;
    }
    return ap;
}

double select_threshold(const Vector& scores, const std::vector<int>& labels) {
    ScoredLabels s = sort_scores(scores, labels, "select_threshold");
    // Candidates are the distinct observed scores; predict positive iff
    // score >= t. Iterating descending means earlier candidates are larger,
    // so keeping the first maximum implements the tie -> larger-t rule.
    std::int64_t tp = 0, fp = 0;
    double best_f1 = -1.0, best_t = s.pairs.front().first;
    std::size_t i = 0;
    while (i < s.pairs.size()) {
        std::size_t j = i;
        const double v = s.pairs[i].first;
        while (j < s.pairs.size() && s.pairs[j].first == v) {
            if (s.pairs[j].second == 1)
                ++tp;
            else
                ++fp;
            ++j;
        }
        const std::int64_t fn = s.n_pos - tp;
        const double denom = static_cast<double>(2 * tp + fp + fn);
        const double f1 = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
        if (f1 > best_f1) {
            best_f1 = f1;
            best_t = v;
        }
        i = j;
    }
    return best_t;
}

RegressionMetrics regression_metrics(const Vector& y_true, const Vector& y_pred,
                                     double train_mean) {
    if (y_true.size() != y_pred.size()) throw DataError("regression_metrics: size mismatch");
    if (y_true.empty()) throw DataError("regression_metrics: empty evaluation set");
    double abs_sum = 0.0, sq_sum = 0.0, base_sum = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double d = y_pred[i] - y_true[i];
        abs_sum += std::abs(d);
        sq_sum += d * d;
        const double b = y_true[i] - train_mean;
        base_sum += b * b;
    }
    if (base_sum == 0.0)
        throw DataError("regression_metrics: zero variance around train mean");
    const double n = static_cast<double>(y_true.size());
    RegressionMetrics out;
    out.mae = abs_sum / n;
    out.rmse = std::sqrt(sq_sum / n);
    out.r2_oos = 1.0 - sq_sum / base_sum;
    return out;
}

}  // namespace aealt::metrics
