#pragma once

#include <span>
#include <string>
#include <vector>

#include "ansp/error.hpp"

namespace ansp {

struct ClassMetrics {
    std::string name;
    std::size_t support = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy_delta = 0.0;  // within-class accuracy minus overall accuracy
};

struct MetricsReport {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    std::vector<ClassMetrics> per_class;
};

// Macro precision/recall average the per-class values; F1 is the harmonic
// mean per class before averaging.  Classes without predictions score 0.
inline MetricsReport compute_metrics(std::span<const std::size_t> y_true,
                                     std::span<const std::size_t> y_pred,
                                     const std::vector<std::string>& class_names) {
    if (y_true.empty()) throw ContractError("metrics: empty prediction set");
    if (y_true.size() != y_pred.size())
        throw ContractError("metrics: prediction/label count mismatch");
    const std::size_t c = class_names.size();
    std::vector<std::size_t> tp(c, 0), pred_n(c, 0), true_n(c, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] >= c || y_pred[i] >= c)
            throw ContractError("metrics: class index out of range");
        ++true_n[y_true[i]];
        ++pred_n[y_pred[i]];
        if (y_true[i] == y_pred[i]) {
            ++tp[y_true[i]];
            ++correct;
        }
    }
    MetricsReport report;
    report.accuracy = static_cast<double>(correct) / static_cast<double>(y_true.size());
    for (std::size_t k = 0; k < c; ++k) {
        ClassMetrics m;
        m.name = class_names[k];
        m.support = true_n[k];
        m.precision = pred_n[k] ? static_cast<double>(tp[k]) / static_cast<double>(pred_n[k]) : 0.0;
        m.recall = true_n[k] ? static_cast<double>(tp[k]) / static_cast<double>(true_n[k]) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        m.accuracy_delta = m.recall - report.accuracy;
        report.macro_precision += m.precision;
        report.macro_recall += m.recall;
        report.macro_f1 += m.f1;
        report.per_class.push_back(std::move(m));
    }
    report.macro_precision /= static_cast<double>(c);
    report.macro_recall /= static_cast<double>(c);
    report.macro_f1 /= static_cast<double>(c);
    return report;
}

}  // namespace ansp
