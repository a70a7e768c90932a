#pragma once

// Single-node evolving Gaussian model: per-sample activation, update or
// birth, greedy overlap-driven merging with a volume cap, and pruning.

#include <compare>
#include <cstdint>
#include <optional>
#include <vector>

#include "fedevo/gaussian.hpp"
#include "fedevo/stats.hpp"

namespace fedevo {

struct EvolveConfig {
    double n_r = 1.0;              // quantization number N_r
    double kappa_m = 1.5;          // overlap threshold base; merge if ratio < kappa_m^D
    std::int64_t kappa_n = 1;      // minimum sample count kept by prune
    double kappa_v = 10.0;         // merged volume cap, multiple of the prototype volume
    std::optional<double> n_sigma; // activation radius N_sigma; sqrt(D) when unset
    std::optional<std::int64_t> age_limit;
    double prior_weight = 1.0;
    DetMode det_mode = DetMode::SqrtDet;

    void validate() const;
    [[nodiscard]] double n_sigma_for(Eigen::Index dim) const;

    bool operator==(const EvolveConfig&) const = default;
};

struct ClusterPair {
    std::int64_t p = 0;  // p < q
    std::int64_t q = 0;
    auto operator<=>(const ClusterPair&) const = default;
};

struct Match {
    std::int64_t id = 0;
    std::size_t index = 0;
    double membership = 0.0;
    double mahalanobis_sq = 0.0;
};

/// A dynamic set of Gaussian clusters sharing one prototype and config.
///
/// The Cholesky factor and log-volume of every cluster's effective covariance
/// are cached alongside it and refreshed on each mutation, so const access
/// (prediction, candidate search) is safe from several threads at once.
class EvolvingModel {
public:
    /// Model with a fixed global variance estimate.
    EvolvingModel(Prototype proto, EvolveConfig config, std::optional<int> class_id = std::nullopt);

    /// Model whose sigma^2 tracks the running variance of every sample it sees.
    static EvolvingModel with_running_variance(Eigen::Index dim, EvolveConfig config,
                                               std::optional<int> class_id = std::nullopt);

    [[nodiscard]] Eigen::Index dim() const { return proto_.dim(); }
    [[nodiscard]] const std::vector<Cluster>& clusters() const { return clusters_; }
    [[nodiscard]] std::size_t size() const { return clusters_.size(); }
    [[nodiscard]] bool empty() const { return clusters_.empty(); }
    [[nodiscard]] const Prototype& prototype() const { return proto_; }
    [[nodiscard]] const EvolveConfig& config() const { return config_; }
    [[nodiscard]] std::int64_t tick() const { return tick_; }
    [[nodiscard]] std::int64_t next_id() const { return next_id_; }
    [[nodiscard]] std::optional<int> class_id() const { return class_id_; }
    [[nodiscard]] bool running_variance() const { return running_.has_value(); }
    [[nodiscard]] std::int64_t total_count() const;

    [[nodiscard]] const Factor& factor(std::size_t index) const { return cache_[index].factor; }
    [[nodiscard]] double log_volume(std::size_t index) const { return cache_[index].log_volume; }
    [[nodiscard]] std::optional<std::size_t> index_of(std::int64_t id) const;

    /// N_sigma^2: a sample activates a cluster iff its Mahalanobis d^2 is below this.
    [[nodiscard]] double activation_d2() const;
    /// exp(-N_sigma^2 / D).
    [[nodiscard]] double activation_threshold() const;
    [[nodiscard]] double log_prototype_volume() const;
    /// D * ln(kappa_m).
    [[nodiscard]] double log_merge_threshold() const;

    void set_prototype(Prototype proto);
    void set_config(EvolveConfig config);

    /// Appends a cluster under a fresh id; returns that id.
    std::int64_t add_cluster(Cluster c);
    void replace_cluster(std::size_t index, Cluster c);
    void erase_cluster(std::size_t index);
    /// Absorbs x into cluster `index` at the current tick.
    void absorb_into(std::size_t index, const Vector& x);
    std::int64_t advance_tick() { return ++tick_; }
    void set_tick(std::int64_t tick) { tick_ = tick; }

    /// Replaces the cluster set wholesale (snapshot restore). Ids must be unique.
    void restore(std::vector<Cluster> clusters, std::int64_t tick, std::int64_t next_id);

    /// Folds x into the running variance (running mode only) and refreshes sigma^2.
    void observe_for_variance(const Vector& x);

private:
    struct Cached {
        Factor factor;
        double log_volume;
    };

    Cached compute_cache(const Cluster& c) const;
    void refresh_all();

    Prototype proto_;
    EvolveConfig config_;
    std::optional<int> class_id_;
    std::optional<StatsSummary> running_;
    std::vector<Cluster> clusters_;
    std::vector<Cached> cache_;
    std::int64_t tick_ = 0;
    std::int64_t next_id_ = 0;
};

/// Cluster with the highest membership for x; ties go to the lowest id.
[[nodiscard]] Match best_match(const EvolvingModel& model, const Vector& x);

/// One online step: activation test, incremental update or birth, then local merging.
void process_sample(EvolvingModel& model, const Vector& x);

/// Online mode (focus = x): pairs among clusters activated by x.
/// Global mode (no focus): pairs where either centre activates the other cluster.
/// Pairs with differing class ids are never returned.
[[nodiscard]] std::vector<ClusterPair> candidate_pairs(const EvolvingModel& model,
                                                       const std::optional<Vector>& focus = std::nullopt);

/// Greedy merging to a fixpoint: repeatedly merges the qualifying pair with the
/// smallest overlap ratio, recomputing candidates (around `focus`, or globally)
/// after each merge. Returns the number of merges performed.
std::size_t merge_step(EvolvingModel& model, const std::vector<ClusterPair>& pairs,
                       const std::optional<Vector>& focus = std::nullopt);

/// Drops clusters with n < kappa_n and, when age_limit is set, clusters idle
/// for more than age_limit ticks. Never empties a non-empty model. Returns the
/// number removed.
std::size_t prune(EvolvingModel& model);

/// process_sample over the rows of X in order.
void fit_stream(EvolvingModel& model, const Eigen::Ref<const Matrix>& X);

}  // namespace fedevo
