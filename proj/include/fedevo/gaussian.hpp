#pragma once

// Gaussian cluster representation and the per-cluster math used by the
// evolving models: effective covariance, Mahalanobis distance, membership,
// incremental (Welford-style) updates, hyperellipsoid volumes and the
// sample-free pairwise merge.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "fedevo/error.hpp"

namespace fedevo {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Which determinant power enters the hyperellipsoid volume.
/// SqrtDet is the geometric volume of the unit-Mahalanobis ellipsoid;
/// LiteralDet uses det(Sigma) itself.
enum class DetMode { SqrtDet, LiteralDet };

inline const char* to_string(DetMode mode) { return mode == DetMode::SqrtDet ? "sqrt-det" : "literal-det"; }

inline DetMode det_mode_from_string(const std::string& s) {
    if (s == "sqrt-det") return DetMode::SqrtDet;
    if (s == "literal-det") return DetMode::LiteralDet;
    throw InvalidArgument("unknown det mode '" + s + "'");
}

/// One Gaussian rule antecedent. The spread is stored as the scatter matrix
/// S = sum (x - mu)(x - mu)^T, i.e. (n - 1) times the sample covariance.
template <typename Scalar>
struct GaussianCluster {
    std::int64_t id = 0;
    VectorX<Scalar> mu;
    MatrixX<Scalar> scatter;
    std::int64_t n = 1;
    std::int64_t last_activation = 0;
    std::optional<int> class_id;

    [[nodiscard]] Eigen::Index dim() const { return mu.size(); }

    /// Single-sample cluster centred at x (zero scatter).
    static GaussianCluster born(std::int64_t id, const VectorX<Scalar>& x, std::int64_t tick,
                                std::optional<int> class_id = std::nullopt) {
        GaussianCluster c;
        c.id = id;
        c.mu = x;
        c.scatter = MatrixX<Scalar>::Zero(x.size(), x.size());
        c.n = 1;
        c.last_activation = tick;
        c.class_id = class_id;
        return c;
    }
};

/// Global variance estimate and quantization number; the prototype
/// (birth) covariance is diag(sigma2 / n_r).
template <typename Scalar>
struct PrototypeSpec {
    VectorX<Scalar> sigma2;
    Scalar n_r = Scalar(1);

    [[nodiscard]] Eigen::Index dim() const { return sigma2.size(); }

    [[nodiscard]] MatrixX<Scalar> covariance() const { return (sigma2 / n_r).asDiagonal(); }

    void validate() const {
        if (!(n_r > Scalar(0)) || !std::isfinite(static_cast<double>(n_r)))
            throw InvalidArgument("prototype n_r must be positive");
        for (Eigen::Index j = 0; j < sigma2.size(); ++j)
            if (!(sigma2(j) > Scalar(0)) || !std::isfinite(static_cast<double>(sigma2(j))))
                throw InvalidArgument("prototype sigma2 must be positive in every feature");
    }
};

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;
using Cluster = GaussianCluster<double>;
using Prototype = PrototypeSpec<double>;

/// Cholesky factor of an SPD matrix with its log-determinant.
template <typename Scalar>
class CovarianceFactor {
public:
    explicit CovarianceFactor(const MatrixX<Scalar>& sigma) : llt_(sigma) {
        if (llt_.info() != Eigen::Success)
            throw DegenerateCovariance("covariance is not positive definite");
        const auto diag = llt_.matrixLLT().diagonal();
        const Scalar max_diag = diag.cwiseAbs().maxCoeff();
        // Condition number above ~1e20 counts as singular.
        const Scalar floor = max_diag * Scalar(1e-10);
        log_det_ = Scalar(0);
        for (Eigen::Index i = 0; i < diag.size(); ++i) {
            if (!(diag(i) > floor) || !std::isfinite(static_cast<double>(diag(i))))
                throw DegenerateCovariance("covariance is numerically singular");
            log_det_ += Scalar(2) * std::log(diag(i));
        }
    }

    [[nodiscard]] Eigen::Index dim() const { return llt_.matrixLLT().rows(); }
    [[nodiscard]] Scalar log_det() const { return log_det_; }
    [[nodiscard]] const Eigen::LLT<MatrixX<Scalar>>& llt() const { return llt_; }

    /// diff^T Sigma^{-1} diff via one triangular solve.
    template <typename Derived>
    [[nodiscard]] Scalar mahalanobis_sq(const Eigen::MatrixBase<Derived>& diff) const {
        if (diff.size() != dim()) throw DimensionMismatch("mahalanobis: dimension mismatch");
        return llt_.matrixL().solve(diff).squaredNorm();
    }

private:
    Eigen::LLT<MatrixX<Scalar>> llt_;
    Scalar log_det_{};
};

using Factor = CovarianceFactor<double>;

template <typename Scalar>
void symmetrize(MatrixX<Scalar>& m) {
    m = (m + m.transpose()).eval() * Scalar(0.5);
}

/// (S + w diag(sigma2/n_r)) / (n - 1 + w). With w = 1 this is the prototype
/// covariance at n = 1 and tends to the sample covariance as n grows.
template <typename Scalar>
MatrixX<Scalar> effective_covariance_unchecked(const GaussianCluster<Scalar>& c, const PrototypeSpec<Scalar>& proto,
                                               Scalar prior_weight) {
    if (prior_weight < Scalar(0)) throw InvalidArgument("prior_weight must be non-negative");
    if (proto.dim() != c.dim()) throw DimensionMismatch("cluster and prototype dimensions differ");
    const Scalar denom = Scalar(c.n - 1) + prior_weight;
    if (!(denom > Scalar(0)))
        throw DegenerateCovariance("sample covariance undefined for n < 2 without a prior");
    MatrixX<Scalar> sigma = c.scatter;
    if (prior_weight > Scalar(0)) sigma.diagonal() += prior_weight * proto.sigma2 / proto.n_r;
    sigma /= denom;
    symmetrize(sigma);
    return sigma;
}

template <typename Scalar>
MatrixX<Scalar> effective_covariance(const GaussianCluster<Scalar>& c, const PrototypeSpec<Scalar>& proto,
                                     Scalar prior_weight = Scalar(1)) {
    MatrixX<Scalar> sigma = effective_covariance_unchecked(c, proto, prior_weight);
    CovarianceFactor<Scalar> check(sigma);
    return sigma;
}

template <typename Scalar>
Scalar mahalanobis_sq(const VectorX<Scalar>& x, const GaussianCluster<Scalar>& c, const CovarianceFactor<Scalar>& f) {
    if (x.size() != c.dim()) throw DimensionMismatch("sample and cluster dimensions differ");
    return f.mahalanobis_sq(x - c.mu);
}

template <typename Scalar>
Scalar mahalanobis_sq(const VectorX<Scalar>& x, const GaussianCluster<Scalar>& c, const MatrixX<Scalar>& sigma_eff) {
    return mahalanobis_sq(x, c, CovarianceFactor<Scalar>(sigma_eff));
}

/// exp(-d^2 / D), in (0, 1].
template <typename Scalar>
Scalar membership(const VectorX<Scalar>& x, const GaussianCluster<Scalar>& c, const CovarianceFactor<Scalar>& f) {
    return std::exp(-mahalanobis_sq(x, c, f) / Scalar(c.dim()));
}

template <typename Scalar>
Scalar membership(const VectorX<Scalar>& x, const GaussianCluster<Scalar>& c, const MatrixX<Scalar>& sigma_eff) {
    return membership(x, c, CovarianceFactor<Scalar>(sigma_eff));
}

template <typename Scalar>
void check_sample(const VectorX<Scalar>& x, Eigen::Index dim) {
    if (x.size() != dim)
        throw DimensionMismatch("sample has dimension " + std::to_string(x.size()) + ", expected " +
                                std::to_string(dim));
    if (!x.allFinite()) throw RejectedSample("sample has non-finite components");
}

/// In-place single-sample update:
///   e = x - mu;  mu += e / (n + 1);  S += e (x - mu_new)^T;  n += 1.
template <typename Scalar>
void absorb(GaussianCluster<Scalar>& c, const VectorX<Scalar>& x, std::int64_t tick) {
    check_sample(x, c.dim());
    if (tick < c.last_activation) throw InvalidArgument("tick precedes last activation");
    const VectorX<Scalar> e = x - c.mu;
    c.mu += e / Scalar(c.n + 1);
    c.scatter.noalias() += e * (x - c.mu).transpose();
    symmetrize(c.scatter);
    c.n += 1;
    c.last_activation = tick;
}

template <typename Scalar>
GaussianCluster<Scalar> incremental_update(GaussianCluster<Scalar> c, const VectorX<Scalar>& x, std::int64_t tick) {
    absorb(c, x, tick);
    return c;
}

/// ln of the volume of the unit ball in D dimensions: 2 pi^{D/2} / (D Gamma(D/2)).
inline double log_unit_ball_volume(Eigen::Index dim) {
    const double d = static_cast<double>(dim);
    return 0.5 * d * std::log(M_PI) - std::lgamma(0.5 * d + 1.0);
}

template <typename Scalar>
Scalar log_volume(const CovarianceFactor<Scalar>& f, DetMode mode = DetMode::SqrtDet) {
    const Scalar power = mode == DetMode::SqrtDet ? Scalar(0.5) : Scalar(1);
    return Scalar(log_unit_ball_volume(f.dim())) + power * f.log_det();
}

template <typename Scalar>
Scalar log_volume(const MatrixX<Scalar>& sigma, DetMode mode = DetMode::SqrtDet) {
    return log_volume(CovarianceFactor<Scalar>(sigma), mode);
}

namespace detail {

// (n - 1) * Sigma_eff, written so that n = 1 contributes exactly zero.
template <typename Scalar>
MatrixX<Scalar> weighted_spread(const GaussianCluster<Scalar>& c, const PrototypeSpec<Scalar>* proto,
                                Scalar prior_weight) {
    if (c.n <= 1 || proto == nullptr || prior_weight == Scalar(0)) return c.scatter;
    MatrixX<Scalar> m = c.scatter;
    m.diagonal() += prior_weight * proto->sigma2 / proto->n_r;
    return m * (Scalar(c.n - 1) / (Scalar(c.n - 1) + prior_weight));
}

template <typename Scalar>
GaussianCluster<Scalar> merge_impl(const GaussianCluster<Scalar>& p, const GaussianCluster<Scalar>& q,
                                   const PrototypeSpec<Scalar>* proto, Scalar prior_weight) {
    if (p.dim() != q.dim()) throw DimensionMismatch("cannot merge clusters of different dimension");
    if (p.class_id != q.class_id) throw ClassMismatch("refusing to merge clusters of different classes");
    if (p.n < 1 || q.n < 1) throw InvalidArgument("cluster counts must be positive");
    const Scalar np = Scalar(p.n), nq = Scalar(q.n);
    const Scalar npq = np + nq;
    const VectorX<Scalar> delta = p.mu - q.mu;

    GaussianCluster<Scalar> out;
    out.id = std::min(p.id, q.id);
    out.mu = (np * p.mu + nq * q.mu) / npq;
    out.scatter = weighted_spread(p, proto, prior_weight) + weighted_spread(q, proto, prior_weight);
    out.scatter.noalias() += (np * nq / npq) * delta * delta.transpose();
    symmetrize(out.scatter);
    out.n = p.n + q.n;
    out.last_activation = std::max(p.last_activation, q.last_activation);
    out.class_id = p.class_id;
    return out;
}

}  // namespace detail

/// Sample-free merge of two clusters. Each input contributes (n - 1) times its
/// effective covariance; the result stores (n_pq - 1) Sigma_pq as its scatter.
template <typename Scalar>
GaussianCluster<Scalar> merge_pair(const GaussianCluster<Scalar>& p, const GaussianCluster<Scalar>& q,
                                   const PrototypeSpec<Scalar>& proto, Scalar prior_weight) {
    return detail::merge_impl(p, q, &proto, prior_weight);
}

/// Merge using pure sample statistics (no prior). Equals the batch statistics
/// of the pooled samples.
template <typename Scalar>
GaussianCluster<Scalar> merge_pair(const GaussianCluster<Scalar>& p, const GaussianCluster<Scalar>& q) {
    return detail::merge_impl<Scalar>(p, q, nullptr, Scalar(0));
}

template <typename Scalar>
Scalar log_sum_exp(Scalar a, Scalar b) {
    const Scalar m = std::max(a, b);
    if (!std::isfinite(static_cast<double>(m))) return m;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

template <typename Scalar>
struct OverlapEvaluation {
    GaussianCluster<Scalar> merged;
    Scalar log_ratio{};          // ln(V_pq / (V_p + V_q))
    Scalar log_volume_merged{};  // ln V_pq
};

/// Evaluates the hypothetical merge of p and q given their precomputed log volumes.
template <typename Scalar>
OverlapEvaluation<Scalar> evaluate_overlap(const GaussianCluster<Scalar>& p, Scalar log_vp,
                                           const GaussianCluster<Scalar>& q, Scalar log_vq,
                                           const PrototypeSpec<Scalar>& proto, Scalar prior_weight, DetMode mode) {
    OverlapEvaluation<Scalar> ev{merge_pair(p, q, proto, prior_weight), {}, {}};
    const CovarianceFactor<Scalar> f(effective_covariance_unchecked(ev.merged, proto, prior_weight));
    ev.log_volume_merged = log_volume(f, mode);
    ev.log_ratio = ev.log_volume_merged - log_sum_exp(log_vp, log_vq);
    return ev;
}

/// ln(V_pq / (V_p + V_q)) with every volume taken from the effective covariance.
template <typename Scalar>
Scalar log_overlap_ratio(const GaussianCluster<Scalar>& p, const GaussianCluster<Scalar>& q,
                         const PrototypeSpec<Scalar>& proto, Scalar prior_weight = Scalar(1),
                         DetMode mode = DetMode::SqrtDet) {
    const Scalar lvp = log_volume(CovarianceFactor<Scalar>(effective_covariance_unchecked(p, proto, prior_weight)), mode);
    const Scalar lvq = log_volume(CovarianceFactor<Scalar>(effective_covariance_unchecked(q, proto, prior_weight)), mode);
    return evaluate_overlap(p, lvp, q, lvq, proto, prior_weight, mode).log_ratio;
}

template <typename Scalar>
Scalar overlap_ratio(const GaussianCluster<Scalar>& p, const GaussianCluster<Scalar>& q,
                     const PrototypeSpec<Scalar>& proto, Scalar prior_weight = Scalar(1),
                     DetMode mode = DetMode::SqrtDet) {
    return std::exp(log_overlap_ratio(p, q, proto, prior_weight, mode));
}

}  // namespace fedevo
