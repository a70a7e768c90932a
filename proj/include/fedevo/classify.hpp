#pragma once

// One-vs-all evolving fuzzy classifier: one evolving model per class, each
// rule carrying its class's one-hot consequent, with Fisher-score feature gating.

#include <optional>
#include <utility>
#include <vector>

#include "fedevo/evolve.hpp"
#include "fedevo/stats.hpp"

namespace fedevo {

using FeatureMask = std::vector<bool>;

/// One-hot consequent theta of length M.
struct ClassEncoding {
    std::vector<int> theta;

    static ClassEncoding one_hot(int cls, int n_classes);
    [[nodiscard]] int decode() const;
};

/// Per-class and global streaming feature statistics.
struct FisherStats {
    std::vector<StatsSummary> per_class;
    StatsSummary global;

    FisherStats() = default;
    FisherStats(int n_classes, Eigen::Index dim);

    void push(const Vector& x, int cls);
    [[nodiscard]] int n_classes() const { return static_cast<int>(per_class.size()); }
};

FisherStats combine_fisher(const FisherStats& a, const FisherStats& b);

/// score_j = sum_m n_m (mu_mj - mu_j)^2 / sum_m n_m var_mj over classes with at
/// least two samples. nullopt when fewer than two classes qualify.
[[nodiscard]] std::optional<Vector> fisher_scores(const FisherStats& fs);

/// mask_j = score_j >= kappa_f * max(score); keeps the top feature if nothing survives.
[[nodiscard]] FeatureMask select_features(const Vector& scores, double kappa_f);

[[nodiscard]] FeatureMask all_features(Eigen::Index dim);

struct ClassifierConfig {
    EvolveConfig evolve;
    double kappa_f = 0.0;
    std::size_t warmup = 50;  // samples buffered before the feature mask freezes (kappa_f > 0 only)

    bool operator==(const ClassifierConfig&) const = default;
};

class EvolvingClassifier {
public:
    /// `sigma2` fixes the global per-feature variance (input space); without it the
    /// classifier tracks the running variance of everything it has seen.
    /// `mask` fixes the feature mask up front; otherwise it is chosen by Fisher
    /// score after the warm-up (or immediately, when kappa_f == 0).
    EvolvingClassifier(int n_classes, Eigen::Index input_dim, ClassifierConfig config,
                       std::optional<Vector> sigma2 = std::nullopt, std::optional<FeatureMask> mask = std::nullopt);

    /// Reassembles a trained classifier from its per-class models.
    static EvolvingClassifier from_models(Eigen::Index input_dim, ClassifierConfig config, FeatureMask mask,
                                          std::vector<EvolvingModel> models);

    void train_sample(const Vector& x, int y);

    [[nodiscard]] int predict(const Vector& x) const;
    /// Per class, the largest membership among its rules (0 for a class without rules).
    [[nodiscard]] Vector predict_scores(const Vector& x) const;
    /// ln of predict_scores, computed without underflow.
    [[nodiscard]] Vector predict_log_scores(const Vector& x) const;

    [[nodiscard]] int n_classes() const { return n_classes_; }
    [[nodiscard]] Eigen::Index input_dim() const { return input_dim_; }
    [[nodiscard]] const ClassifierConfig& config() const { return config_; }
    [[nodiscard]] const FisherStats& fisher() const { return fisher_; }
    [[nodiscard]] const std::optional<FeatureMask>& mask() const { return mask_; }
    [[nodiscard]] const std::vector<EvolvingModel>& models() const { return models_; }
    [[nodiscard]] const ClassEncoding& encoding(int cls) const { return encodings_.at(static_cast<std::size_t>(cls)); }
    [[nodiscard]] std::size_t cluster_count() const;
    [[nodiscard]] std::int64_t tick() const { return tick_; }

    /// Projects an input-space vector onto the active features.
    [[nodiscard]] Vector masked(const Vector& x) const;

    /// Flushes the warm-up buffer, freezing the mask with whatever statistics exist.
    void finish_warmup();

private:
    void freeze_mask(FeatureMask mask);
    void route(const Vector& x, int y);
    [[nodiscard]] Prototype masked_prototype() const;

    int n_classes_;
    Eigen::Index input_dim_;
    ClassifierConfig config_;
    std::optional<Vector> fixed_sigma2_;
    std::optional<FeatureMask> mask_;
    std::vector<ClassEncoding> encodings_;
    FisherStats fisher_;
    std::vector<EvolvingModel> models_;
    std::vector<std::pair<Vector, int>> warmup_buffer_;
    std::int64_t tick_ = 0;
};

}  // namespace fedevo
