#include "fedevo/federate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "fedevo/parallel.hpp"

namespace fedevo {

FederatedPartition partition_data(std::size_t n_samples, std::size_t n_owners, std::uint64_t seed) {
    if (n_owners < 1) throw InvalidArgument("need at least one owner");
    if (n_samples < n_owners) throw InvalidArgument("fewer samples than owners");
    std::vector<std::size_t> perm(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) perm[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    FederatedPartition part;
    part.seed = seed;
    part.shards.resize(n_owners);
    const std::size_t base = n_samples / n_owners;
    const std::size_t extra = n_samples % n_owners;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < n_owners; ++k) {
        const std::size_t len = base + (k < extra ? 1 : 0);
        part.shards[k].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                              perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
    }
    return part;
}

namespace {

// Everything that must agree between snapshots for them to be aggregated.
std::string compatibility_key(const ModelSnapshot& s) {
    ModelSnapshot shape;
    shape.D = s.D;
    shape.M = s.M;
    shape.config = s.config;
    shape.proto = s.proto;
    shape.input_dim = s.input_dim;
    shape.feature_mask = s.feature_mask;
    shape.kappa_f = s.kappa_f;
    shape.warmup = s.warmup;
    shape.next_id.assign(static_cast<std::size_t>(std::max(s.M, 1)), 0);
    return serialize(shape);
}

void check_compatible(std::span<const ModelSnapshot> snaps) {
    std::vector<std::string> keys;
    std::map<std::string, std::size_t> votes;
    for (const auto& s : snaps) ++votes[keys.emplace_back(compatibility_key(s))];
    if (votes.size() == 1) return;
    // Majority (ties: earliest snapshot) defines the reference shape.
    std::string reference = keys.front();
    for (const auto& k : keys)
        if (votes[k] > votes[reference]) reference = k;
    std::vector<std::size_t> offending;
    std::string names;
    for (std::size_t i = 0; i < snaps.size(); ++i)
        if (keys[i] != reference) {
            offending.push_back(i);
            names += (names.empty() ? "" : ", ") + snaps[i].owner_id;
        }
    throw SnapshotMismatch("incompatible snapshots (dimension, class count or owner config differ): " + names,
                           std::move(offending));
}

}  // namespace

ModelSnapshot aggregate(std::span<const ModelSnapshot> snapshots, const ServerOptions& server) {
    if (snapshots.empty()) throw InvalidArgument("aggregate needs at least one snapshot");
    check_compatible(snapshots);
    const ModelSnapshot& first = snapshots.front();

    EvolveConfig cfg = server.config;
    cfg.n_r = first.proto.n_r;
    cfg.validate();
    if (server.age_fraction < 0.0 || server.age_fraction > 1.0)
        throw InvalidArgument("age_fraction must lie in [0, 1]");

    std::int64_t tick = 0;
    for (const auto& s : snapshots) tick = std::max(tick, s.tick);

    EvolveConfig prune_cfg = cfg;
    if (!prune_cfg.age_limit && server.age_fraction > 0.0 && tick > 0)
        prune_cfg.age_limit = std::max<std::int64_t>(1, static_cast<std::int64_t>(
                                                            std::floor(server.age_fraction * static_cast<double>(tick))));

    ModelSnapshot out;
    out.D = first.D;
    out.M = first.M;
    out.config = cfg;
    out.proto = first.proto;
    out.owner_id = server.owner_id;
    out.tick = tick;
    out.input_dim = first.input_dim;
    out.feature_mask = first.feature_mask;
    out.kappa_f = first.kappa_f;
    out.warmup = first.warmup;

    const int groups = std::max(first.M, 1);
    for (int g = 0; g < groups; ++g) {
        const std::optional<int> cls = first.is_classifier() ? std::optional<int>(g) : std::nullopt;
        EvolvingModel model(first.proto, cfg, cls);
        for (const auto& s : snapshots)
            for (const auto& c : s.clusters)
                if (c.class_id == cls) model.add_cluster(c);
        model.set_tick(tick);
        merge_step(model, candidate_pairs(model));
        model.set_config(prune_cfg);
        prune(model);
        // Survivors are renumbered in order so that re-aggregating a global model is a no-op.
        std::int64_t id = 0;
        for (Cluster c : model.clusters()) {
            c.id = id++;
            out.clusters.push_back(std::move(c));
        }
        out.next_id.push_back(id);
    }
    return out;
}

RoundResult run_round(const Eigen::Ref<const Matrix>& X, const std::vector<int>* labels, int n_classes,
                      const RoundOptions& options) {
    const auto n = static_cast<std::size_t>(X.rows());
    if (labels && labels->size() != n) throw DimensionMismatch("label count differs from sample count");
    if (labels && n_classes < 1) throw InvalidArgument("classification needs n_classes >= 1");
    if (labels)
        for (int y : *labels)
            if (y < 0 || y >= n_classes) throw InvalidArgument("label outside [0, n_classes)");

    RoundResult result;
    result.partition = partition_data(n, options.n_owners, options.seed);
    const std::size_t owners = options.n_owners;

    // Owner side: private shards never leave this block except as summaries/snapshots.
    std::vector<Matrix> shard_x(owners);
    std::vector<std::vector<int>> shard_y(owners);
    std::vector<StatsSummary> local(owners);
    std::vector<FisherStats> local_fisher(owners);
    for (std::size_t k = 0; k < owners; ++k) {
        const auto& idx = result.partition.shards[k];
        shard_x[k].resize(static_cast<Eigen::Index>(idx.size()), X.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            shard_x[k].row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx[i]));
            if (labels) shard_y[k].push_back((*labels)[idx[i]]);
        }
        local[k] = local_stats(shard_x[k]);
        if (labels) {
            local_fisher[k] = FisherStats(n_classes, X.cols());
            for (std::size_t i = 0; i < idx.size(); ++i)
                local_fisher[k].push(shard_x[k].row(static_cast<Eigen::Index>(i)).transpose(), shard_y[k][i]);
        }
    }

    // Server side, round 0: combine summaries into the shared normalization, sigma^2 and mask.
    StatsSummary global;
    for (const auto& s : local) global = combine_stats(global, s);
    RoundZero& rz = result.round_zero;
    rz.standardizer = fit_standardizer(global);
    rz.sigma2 = rz.standardizer.transform(global).variance();
    rz.mask = all_features(rz.standardizer.output_dim());
    if (labels && options.owner.kappa_f > 0.0) {
        FisherStats combined = local_fisher.front();
        for (std::size_t k = 1; k < owners; ++k) combined = combine_fisher(combined, local_fisher[k]);
        FisherStats standardized;
        for (const auto& pc : combined.per_class) standardized.per_class.push_back(rz.standardizer.transform(pc));
        standardized.global = rz.standardizer.transform(combined.global);
        if (const auto scores = fisher_scores(standardized)) rz.mask = select_features(*scores, options.owner.kappa_f);
    }

    // Owner side: local single-pass training, then upload.
    result.owners.resize(owners);
    result.owner_bytes.resize(owners);
    auto train_owner = [&](std::size_t k) {
        const Matrix z = rz.standardizer.apply(shard_x[k]);
        const std::string owner_id = "owner-" + std::to_string(k);
        ModelSnapshot snap;
        if (labels) {
            ClassifierConfig cfg = options.owner;
            EvolvingClassifier clf(n_classes, z.cols(), cfg, rz.sigma2, rz.mask);
            for (Eigen::Index i = 0; i < z.rows(); ++i)
                clf.train_sample(z.row(i).transpose(), shard_y[k][static_cast<std::size_t>(i)]);
            snap = snapshot_of(clf, owner_id);
        } else {
            EvolvingModel model(Prototype{rz.sigma2, options.owner.evolve.n_r}, options.owner.evolve);
            fit_stream(model, z);
            snap = snapshot_of(model, owner_id);
        }
        result.owner_bytes[k] = serialize(snap);
        result.owners[k] = std::move(snap);
    };
    if (options.parallel_owners)
        parallel_for(owners, train_owner, 2);
    else
        for (std::size_t k = 0; k < owners; ++k) train_owner(k);

    // Server side: only the uploaded bytes are visible here.
    std::vector<ModelSnapshot> received;
    received.reserve(owners);
    for (const auto& bytes : result.owner_bytes) received.push_back(deserialize(bytes));
    result.global = aggregate(received, options.server);
    return result;
}

}  // namespace fedevo
