#include "fedevo/stats.hpp"

namespace fedevo {

void StatsSummary::push(const Eigen::Ref<const Vector>& x) {
    if (mean.size() == 0 && count == 0) *this = StatsSummary(x.size());
    if (x.size() != mean.size()) throw DimensionMismatch("stats: sample dimension mismatch");
    ++count;
    const Vector delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2.array() += delta.array() * (x - mean).array();
}

Vector StatsSummary::variance() const {
    if (count < 2) return Vector::Zero(mean.size());
    return m2 / static_cast<double>(count - 1);
}

StatsSummary local_stats(const Eigen::Ref<const Matrix>& rows) {
    StatsSummary s(rows.cols());
    for (Eigen::Index i = 0; i < rows.rows(); ++i) s.push(rows.row(i).transpose());
    return s;
}

StatsSummary combine_stats(const StatsSummary& a, const StatsSummary& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (a.dim() != b.dim()) throw DimensionMismatch("stats: cannot combine summaries of different dimension");
    const double na = static_cast<double>(a.count);
    const double nb = static_cast<double>(b.count);
    const double n = na + nb;
    const Vector delta = b.mean - a.mean;
    StatsSummary out;
    out.count = a.count + b.count;
    out.mean = a.mean + delta * (nb / n);
    out.m2 = a.m2 + b.m2 + (delta.array().square() * (na * nb / n)).matrix();
    return out;
}

}  // namespace fedevo
