#pragma once

#include <string>
#include <vector>

#include "fedevo/gaussian.hpp"

namespace fedevo {

double accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred);

/// Unweighted mean of per-class F1 over [0, M). A class absent from both
/// vectors contributes 0 and triggers a warning.
double macro_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred, int n_classes);

/// Binary AUC via the Mann-Whitney rank sum with midranks for ties.
double roc_auc_binary(const std::vector<bool>& positive, const std::vector<double>& scores);

/// One-vs-rest macro AUC; `scores` is n x M. Classes without both positives and
/// negatives are skipped with a warning.
double roc_auc_ovr(const std::vector<int>& y_true, const Matrix& scores, int n_classes);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample std (n - 1); 0 for a single value
};

MeanStd mean_std(const std::vector<double>& values);

struct FoldResult {
    std::size_t repeat = 0;
    std::size_t fold = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double roc_auc = 0.0;
    double train_time_per_sample_ms = 0.0;
    std::size_t n_clusters_global = 0;
};

/// Cross-validation summary: per-repeat means over folds, then mean +- std over repeats.
struct EvalReport {
    std::string dataset;
    std::vector<FoldResult> folds;
    MeanStd accuracy;
    MeanStd macro_f1;
    MeanStd roc_auc_ovr_macro;
    MeanStd train_time_per_sample_ms;
    MeanStd n_clusters_global;
};

EvalReport summarize(std::string dataset, std::vector<FoldResult> folds);

}  // namespace fedevo
