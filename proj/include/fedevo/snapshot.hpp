#pragma once

// ModelSnapshot: the parameter set an owner sends to the server. It is the
// only thing that crosses the owner/server boundary.
//
// Wire form is canonical JSON: keys sorted, doubles written in the shortest
// form that parses back to the identical bit pattern, matrices as row-major
// arrays. Layout:
//
//   {
//     "D": <model dimension>, "M": <classes, 0 for pure clustering>,
//     "classifier": {"feature_mask": [0|1...], "input_dim": .., "kappa_f": .., "warmup": ..},  // M > 0 only
//     "clusters": [{"class_id": m|null, "id": .., "last_activation": .., "mu": [D],
//                   "n": .., "scatter": [D*D], "sigma_eff": [D*D]}, ...],
//     "config": {"age_limit": t|null, "det_mode": "sqrt-det"|"literal-det", "kappa_m": ..,
//                "kappa_n": .., "kappa_v": .., "n_r": .., "n_sigma": x|null, "prior_weight": ..},
//     "format_version": 1, "next_id": [per class model], "owner_id": "...",
//     "proto": {"n_r": .., "sigma2": [D]}, "tick": ..
//   }

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fedevo/classify.hpp"
#include "fedevo/evolve.hpp"

namespace fedevo {

struct ModelSnapshot {
    static constexpr int kFormatVersion = 1;

    int format_version = kFormatVersion;
    Eigen::Index D = 0;
    int M = 0;
    EvolveConfig config;
    Prototype proto;
    std::vector<Cluster> clusters;
    std::string owner_id;
    std::int64_t tick = 0;
    std::vector<std::int64_t> next_id;  // one entry per class model (one entry when M == 0)

    // Classifier-only fields (M > 0).
    Eigen::Index input_dim = 0;
    FeatureMask feature_mask;
    double kappa_f = 0.0;
    std::size_t warmup = 50;

    [[nodiscard]] bool is_classifier() const { return M > 0; }
    [[nodiscard]] std::int64_t total_count() const;
};

ModelSnapshot snapshot_of(const EvolvingModel& model, std::string owner_id);
ModelSnapshot snapshot_of(const EvolvingClassifier& clf, std::string owner_id);

EvolvingModel restore_model(const ModelSnapshot& snap);
/// Restores the per-class models and feature mask. Fisher statistics are
/// owner-local and are not part of the snapshot.
EvolvingClassifier restore_classifier(const ModelSnapshot& snap);

std::string serialize(const ModelSnapshot& snap);
/// Throws SchemaError on malformed input or an unknown format_version.
ModelSnapshot deserialize(std::string_view bytes);

void write_snapshot(const std::filesystem::path& path, const ModelSnapshot& snap);
ModelSnapshot read_snapshot(const std::filesystem::path& path);

}  // namespace fedevo
