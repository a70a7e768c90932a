#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "fedevo/gaussian.hpp"

namespace fedevo {

/// Per-feature count / mean / M2 (sum of squared deviations). Two summaries
/// combine exactly with the parallel-variance rule, so owners can share these
/// instead of raw rows.
struct StatsSummary {
    std::int64_t count = 0;
    Vector mean;
    Vector m2;

    StatsSummary() = default;
    explicit StatsSummary(Eigen::Index dim) : mean(Vector::Zero(dim)), m2(Vector::Zero(dim)) {}

    [[nodiscard]] Eigen::Index dim() const { return mean.size(); }
    [[nodiscard]] bool empty() const { return count == 0; }

    /// Welford single-sample update.
    void push(const Eigen::Ref<const Vector>& x);

    /// Unbiased (n - 1) variance; zero when count < 2.
    [[nodiscard]] Vector variance() const;
};

StatsSummary local_stats(const Eigen::Ref<const Matrix>& rows);

/// Exact combination; the empty summary is the identity element.
StatsSummary combine_stats(const StatsSummary& a, const StatsSummary& b);

}  // namespace fedevo
