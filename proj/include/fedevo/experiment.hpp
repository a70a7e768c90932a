#pragma once

// Experiment drivers shared by the command-line tool and the acceptance suite.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedevo/data.hpp"
#include "fedevo/federate.hpp"
#include "fedevo/metrics.hpp"

namespace fedevo {

/// Ordered key/value echo of every setting that produced an output file.
struct RunManifest {
    std::vector<std::pair<std::string, std::string>> entries;

    void set(const std::string& key, const std::string& value);
    [[nodiscard]] std::string to_json() const;  // compact JSON object, keys in insertion order
};

struct BenchmarkOptions {
    std::size_t folds = 3;
    std::size_t repeats = 10;
    std::size_t owners = 3;
    std::uint64_t seed = 0;
    ClassifierConfig owner;
    ServerOptions server;
    bool parallel = true;
};

/// Deterministic seed for a (base, stream, index) triple.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

/// K-fold x repeats cross-validation; every training fold is split among
/// `owners` and trained in one federated round.
EvalReport run_classification_benchmark(const Dataset& data, const std::string& name, const BenchmarkOptions& options);

FoldResult evaluate_fold(const Dataset& data, const Fold& fold, const BenchmarkOptions& options, std::uint64_t round_seed);

struct ClusteringRun {
    RoundResult round;
    EvolvingModel global;
    Matrix standardized;          // X mapped with the round-0 standardizer
    std::vector<int> assignment;  // index of the best-matching global cluster per row
};

ClusteringRun run_federated_clustering(const Eigen::Ref<const Matrix>& X, const RoundOptions& options);

/// Data points plus 2-sigma ellipses (axes from the eigen-decomposition of each
/// effective covariance), drawn in original data units. 2-D only.
std::string render_cluster_svg(const Eigen::Ref<const Matrix>& X, const EvolvingModel& model,
                               const Standardizer& standardizer, const RunManifest& manifest);

std::string cluster_summary_json(const EvolvingModel& model, const Standardizer& standardizer,
                                 const RunManifest& manifest, double ari);

std::string report_json(const EvalReport& report, const RunManifest& manifest);
std::string report_text(const EvalReport& report, const RunManifest& manifest);
std::string timing_json(const EvalReport& report);

}  // namespace fedevo
