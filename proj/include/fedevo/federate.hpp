#pragma once

// Federated workflow: random partition, round-0 statistics exchange, local
// single-pass training, snapshot upload, and server-side aggregation
// (concatenate -> merge to fixpoint -> prune).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedevo/classify.hpp"
#include "fedevo/data.hpp"
#include "fedevo/evolve.hpp"
#include "fedevo/snapshot.hpp"
#include "fedevo/stats.hpp"

namespace fedevo {

struct FederatedPartition {
    std::vector<std::vector<std::size_t>> shards;
    std::uint64_t seed = 0;
    std::string mode = "iid-random";
};

/// Uniform random disjoint shards whose sizes differ by at most one.
FederatedPartition partition_data(std::size_t n_samples, std::size_t n_owners, std::uint64_t seed);

/// Raised when snapshots disagree on shape or owner config. `offending` holds
/// the indices of snapshots that differ from the majority.
class SnapshotMismatch : public IncompatibleSnapshots {
public:
    SnapshotMismatch(const std::string& what, std::vector<std::size_t> offending)
        : IncompatibleSnapshots(what), offending_(std::move(offending)) {}
    [[nodiscard]] const std::vector<std::size_t>& offending() const { return offending_; }

private:
    std::vector<std::size_t> offending_;
};

struct ServerOptions {
    EvolveConfig config;
    /// When config.age_limit is unset, clusters idle for more than this fraction
    /// of the global tick are removed after merging. 0 disables age pruning.
    double age_fraction = 0.95;
    std::string owner_id = "server";
};

/// Builds the global model from owner snapshots. Owners' N_r and sigma^2 carry
/// over; every other threshold comes from the server config.
ModelSnapshot aggregate(std::span<const ModelSnapshot> snapshots, const ServerOptions& server);

struct RoundOptions {
    std::size_t n_owners = 3;
    std::uint64_t seed = 0;
    ClassifierConfig owner;  // owner.evolve is used alone for clustering
    ServerOptions server;
    bool parallel_owners = true;
};

/// What the server learns in round 0: combined feature statistics (and, for
/// classification, combined per-class statistics).
struct RoundZero {
    Standardizer standardizer;
    Vector sigma2;     // in standardized units, kept features
    FeatureMask mask;  // over standardized features
};

struct RoundResult {
    ModelSnapshot global;
    std::vector<ModelSnapshot> owners;
    std::vector<std::string> owner_bytes;  // what each owner uploaded
    FederatedPartition partition;
    RoundZero round_zero;
};

/// One communication round over rows of X. With labels, trains one-vs-all
/// classifiers (n_classes classes); without, evolving clustering models.
/// Fully deterministic given options.seed.
RoundResult run_round(const Eigen::Ref<const Matrix>& X, const std::vector<int>* labels, int n_classes,
                      const RoundOptions& options);

}  // namespace fedevo
