#include "fedevo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "fedevo/error.hpp"
#include "fedevo/log.hpp"

namespace fedevo {
namespace {

void check_lengths(std::size_t a, std::size_t b) {
    if (a != b) throw DimensionMismatch("metric inputs differ in length");
    if (a == 0) throw InvalidArgument("metric inputs are empty");
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    check_lengths(y_true.size(), y_pred.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) hits += y_true[i] == y_pred[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

double macro_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred, int n_classes) {
    check_lengths(y_true.size(), y_pred.size());
    double sum = 0.0;
    for (int m = 0; m < n_classes; ++m) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < y_true.size(); ++i) {
            const bool t = y_true[i] == m, p = y_pred[i] == m;
            tp += t && p;
            fp += !t && p;
            fn += t && !p;
        }
        if (tp + fp + fn == 0) {
            warn("macro_f1: class " + std::to_string(m) + " is absent from both labels and predictions");
            continue;
        }
        sum += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    }
    return sum / static_cast<double>(n_classes);
}

double roc_auc_binary(const std::vector<bool>& positive, const std::vector<double>& scores) {
    check_lengths(positive.size(), scores.size());
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double pos = 0.0, rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (positive[i]) {
            pos += 1.0;
            rank_sum += rank[i];
        }
    const double neg = static_cast<double>(n) - pos;
    if (pos == 0.0 || neg == 0.0) throw InvalidArgument("AUC needs both positives and negatives");
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double roc_auc_ovr(const std::vector<int>& y_true, const Matrix& scores, int n_classes) {
    check_lengths(y_true.size(), static_cast<std::size_t>(scores.rows()));
    if (scores.cols() != n_classes) throw DimensionMismatch("score matrix must have one column per class");
    if (!scores.allFinite()) throw InvalidArgument("scores must be finite");
    double sum = 0.0;
    int used = 0;
    for (int m = 0; m < n_classes; ++m) {
        std::vector<bool> pos(y_true.size());
        std::size_t npos = 0;
        for (std::size_t i = 0; i < y_true.size(); ++i) npos += (pos[i] = y_true[i] == m);
        if (npos == 0) continue;  // not present in y_true
        if (npos == y_true.size()) {
            warn("roc_auc: class " + std::to_string(m) + " has no negatives; skipped");
            continue;
        }
        std::vector<double> s(y_true.size());
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = scores(static_cast<Eigen::Index>(i), m);
        sum += roc_auc_binary(pos, s);
        ++used;
    }
    if (used == 0) throw InvalidArgument("roc_auc: no class has both positives and negatives");
    return sum / used;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    check_lengths(a.size(), b.size());
    std::map<std::pair<int, int>, double> table;
    std::map<int, double> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        table[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [k, v] : table) index += choose2(v);
    for (const auto& [k, v] : rows) sum_rows += choose2(v);
    for (const auto& [k, v] : cols) sum_cols += choose2(v);
    const double total = choose2(static_cast<double>(a.size()));
    const double expected = sum_rows * sum_cols / total;
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd r;
    if (values.empty()) return r;
    r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - r.mean) * (v - r.mean);
        r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return r;
}

EvalReport summarize(std::string dataset, std::vector<FoldResult> folds) {
    std::sort(folds.begin(), folds.end(), [](const FoldResult& a, const FoldResult& b) {
        return std::tie(a.repeat, a.fold) < std::tie(b.repeat, b.fold);
    });
    std::map<std::size_t, std::vector<const FoldResult*>> by_repeat;
    for (const auto& f : folds) by_repeat[f.repeat].push_back(&f);
    std::vector<double> acc, f1, auc, time, clusters;
    for (const auto& [r, fs] : by_repeat) {
        auto avg = [&](auto get) {
            double s = 0.0;
            for (const auto* f : fs) s += get(*f);
            return s / static_cast<double>(fs.size());
        };
        acc.push_back(avg([](const FoldResult& f) { return f.accuracy; }));
        f1.push_back(avg([](const FoldResult& f) { return f.macro_f1; }));
        auc.push_back(avg([](const FoldResult& f) { return f.roc_auc; }));
        time.push_back(avg([](const FoldResult& f) { return f.train_time_per_sample_ms; }));
        clusters.push_back(avg([](const FoldResult& f) { return static_cast<double>(f.n_clusters_global); }));
    }
    EvalReport rep;
    rep.dataset = std::move(dataset);
    rep.folds = std::move(folds);
    rep.accuracy = mean_std(acc);
    rep.macro_f1 = mean_std(f1);
    rep.roc_auc_ovr_macro = mean_std(auc);
    rep.train_time_per_sample_ms = mean_std(time);
    rep.n_clusters_global = mean_std(clusters);
    return rep;
}

}  // namespace fedevo
