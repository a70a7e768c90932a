#pragma once

// Test-only reference computations. Nothing here calls into the library's
// statistics code: batch moments are computed directly from the points.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Two-pass batch mean over rows, accumulated in long double.
inline Vec batch_mean(const Mat& rows) {
    Vec m(rows.cols());
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
        long double s = 0;
        for (Eigen::Index i = 0; i < rows.rows(); ++i) s += rows(i, j);
        m(j) = static_cast<double>(s / rows.rows());
    }
    return m;
}

/// Two-pass unbiased sample covariance (n - 1 denominator).
inline Mat batch_cov(const Mat& rows) {
    const Vec m = batch_mean(rows);
    const auto d = rows.cols();
    Mat c(d, d);
    for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b) {
            long double s = 0;
            for (Eigen::Index i = 0; i < rows.rows(); ++i)
                s += (static_cast<long double>(rows(i, a)) - m(a)) * (static_cast<long double>(rows(i, b)) - m(b));
            c(a, b) = static_cast<double>(s / (rows.rows() - 1));
        }
    return c;
}

inline double rel_err(const Mat& got, const Mat& want) {
    const double scale = std::max(1.0, want.cwiseAbs().maxCoeff());
    return (got - want).cwiseAbs().maxCoeff() / scale;
}

inline Mat gaussian_rows(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, double spread = 1.0) {
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    Mat A(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) A(i, j) = U(rng) * 0.3 + (i == j ? 1.0 : 0.0);
    Vec shift(d);
    for (Eigen::Index j = 0; j < d; ++j) shift(j) = U(rng);
    Mat X(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        Vec z(d);
        for (Eigen::Index j = 0; j < d; ++j) z(j) = N(rng);
        X.row(i) = (spread * A * z + shift).transpose();
    }
    return X;
}

/// Isotropic blobs around the given centres, `per` points each, labels 0..k-1.
inline Mat blobs(std::mt19937_64& rng, const std::vector<Vec>& centers, int per, double sigma,
                 std::vector<int>* labels = nullptr) {
    std::normal_distribution<double> N(0.0, sigma);
    const auto d = centers.front().size();
    Mat X(static_cast<Eigen::Index>(centers.size()) * per, d);
    Eigen::Index r = 0;
    for (std::size_t k = 0; k < centers.size(); ++k)
        for (int i = 0; i < per; ++i, ++r) {
            for (Eigen::Index j = 0; j < d; ++j) X(r, j) = centers[k](j) + N(rng);
            if (labels) labels->push_back(static_cast<int>(k));
        }
    return X;
}

inline Mat shuffled_rows(const Mat& X, std::vector<int>* labels, std::uint64_t seed) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    Mat out(X.rows(), X.cols());
    std::vector<int> new_labels;
    for (std::size_t i = 0; i < order.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = X.row(order[i]);
        if (labels) new_labels.push_back((*labels)[static_cast<std::size_t>(order[i])]);
    }
    if (labels) *labels = new_labels;
    return out;
}

/// Pair-counting Rand statistics, written out from the contingency definition.
inline double ari(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t n = a.size();
    long double agree_both = 0, same_a = 0, same_b = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool sa = a[i] == a[j], sb = b[i] == b[j];
            agree_both += sa && sb;
            same_a += sa;
            same_b += sb;
            pairs += 1;
        }
    const long double expected = same_a * same_b / pairs;
    const long double max_index = (same_a + same_b) / 2;
    if (max_index == expected) return 1.0;
    return static_cast<double>((agree_both - expected) / (max_index - expected));
}

}  // namespace oracle
