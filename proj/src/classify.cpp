#include "fedevo/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fedevo {

ClassEncoding ClassEncoding::one_hot(int cls, int n_classes) {
    if (cls < 0 || cls >= n_classes) throw InvalidArgument("class index out of range");
    ClassEncoding e;
    e.theta.assign(static_cast<std::size_t>(n_classes), 0);
    e.theta[static_cast<std::size_t>(cls)] = 1;
    return e;
}

int ClassEncoding::decode() const {
    const auto it = std::find(theta.begin(), theta.end(), 1);
    return static_cast<int>(it - theta.begin());
}

FisherStats::FisherStats(int n_classes, Eigen::Index dim)
    : per_class(static_cast<std::size_t>(n_classes), StatsSummary(dim)), global(dim) {}

void FisherStats::push(const Vector& x, int cls) {
    per_class.at(static_cast<std::size_t>(cls)).push(x);
    global.push(x);
}

FisherStats combine_fisher(const FisherStats& a, const FisherStats& b) {
    if (a.per_class.size() != b.per_class.size()) throw DimensionMismatch("fisher stats: class count differs");
    FisherStats out;
    out.per_class.reserve(a.per_class.size());
    for (std::size_t m = 0; m < a.per_class.size(); ++m)
        out.per_class.push_back(combine_stats(a.per_class[m], b.per_class[m]));
    out.global = combine_stats(a.global, b.global);
    return out;
}

std::optional<Vector> fisher_scores(const FisherStats& fs) {
    std::vector<const StatsSummary*> usable;
    for (const auto& s : fs.per_class)
        if (s.count >= 2) usable.push_back(&s);
    if (usable.size() < 2) return std::nullopt;

    const Eigen::Index dim = usable.front()->dim();
    Vector grand = Vector::Zero(dim);
    double total = 0.0;
    for (const auto* s : usable) {
        grand += static_cast<double>(s->count) * s->mean;
        total += static_cast<double>(s->count);
    }
    grand /= total;

    Vector between = Vector::Zero(dim);
    Vector within = Vector::Zero(dim);
    for (const auto* s : usable) {
        const double n = static_cast<double>(s->count);
        between.array() += n * (s->mean - grand).array().square();
        within += n * s->variance();
    }
    return (between.array() / within.array().max(1e-12)).matrix();
}

FeatureMask select_features(const Vector& scores, double kappa_f) {
    if (scores.size() == 0) return {};
    if (kappa_f < 0.0) throw InvalidArgument("kappa_f must be non-negative");
    const double cutoff = kappa_f * scores.maxCoeff();
    FeatureMask mask(static_cast<std::size_t>(scores.size()));
    bool any = false;
    for (Eigen::Index j = 0; j < scores.size(); ++j) {
        mask[static_cast<std::size_t>(j)] = scores(j) >= cutoff;
        any = any || mask[static_cast<std::size_t>(j)];
    }
    if (!any) {
        Eigen::Index top = 0;
        scores.maxCoeff(&top);
        mask[static_cast<std::size_t>(top)] = true;
    }
    return mask;
}

FeatureMask all_features(Eigen::Index dim) { return FeatureMask(static_cast<std::size_t>(dim), true); }

EvolvingClassifier::EvolvingClassifier(int n_classes, Eigen::Index input_dim, ClassifierConfig config,
                                       std::optional<Vector> sigma2, std::optional<FeatureMask> mask)
    : n_classes_(n_classes),
      input_dim_(input_dim),
      config_(std::move(config)),
      fixed_sigma2_(std::move(sigma2)),
      fisher_(n_classes, input_dim) {
    if (n_classes < 1) throw InvalidArgument("classifier needs at least one class");
    if (input_dim < 1) throw InvalidArgument("classifier needs at least one feature");
    config_.evolve.validate();
    if (fixed_sigma2_) {
        if (fixed_sigma2_->size() != input_dim) throw DimensionMismatch("sigma2 length differs from input dimension");
        Prototype{*fixed_sigma2_, config_.evolve.n_r}.validate();
    }
    for (int m = 0; m < n_classes; ++m) encodings_.push_back(ClassEncoding::one_hot(m, n_classes));
    if (mask)
        freeze_mask(std::move(*mask));
    else if (config_.kappa_f == 0.0)
        freeze_mask(all_features(input_dim));
}

EvolvingClassifier EvolvingClassifier::from_models(Eigen::Index input_dim, ClassifierConfig config, FeatureMask mask,
                                                   std::vector<EvolvingModel> models) {
    if (models.empty()) throw InvalidArgument("classifier needs at least one class model");
    const auto n_classes = static_cast<int>(models.size());
    const Vector sigma2_in = [&] {
        // Input-space sigma2 is only needed for new training; unmasked entries are 1.
        Vector s = Vector::Ones(input_dim);
        Eigen::Index k = 0;
        for (Eigen::Index j = 0; j < input_dim; ++j)
            if (mask.at(static_cast<std::size_t>(j))) s(j) = models.front().prototype().sigma2(k++);
        return s;
    }();
    EvolvingClassifier clf(n_classes, input_dim, std::move(config), sigma2_in, mask);
    for (int m = 0; m < n_classes; ++m) {
        if (models[static_cast<std::size_t>(m)].class_id() != m)
            throw ClassMismatch("model " + std::to_string(m) + " carries the wrong class id");
        if (models[static_cast<std::size_t>(m)].dim() != clf.models_.front().dim())
            throw DimensionMismatch("class model dimension differs from feature mask");
        clf.tick_ = std::max(clf.tick_, models[static_cast<std::size_t>(m)].tick());
    }
    clf.models_ = std::move(models);
    return clf;
}

Vector EvolvingClassifier::masked(const Vector& x) const {
    if (!mask_) throw EmptyModel("feature mask not yet chosen");
    if (x.size() != input_dim_) throw DimensionMismatch("sample dimension differs from classifier input");
    const auto& mask = *mask_;
    const auto active = std::count(mask.begin(), mask.end(), true);
    Vector out(active);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < input_dim_; ++j)
        if (mask[static_cast<std::size_t>(j)]) out(k++) = x(j);
    return out;
}

Prototype EvolvingClassifier::masked_prototype() const {
    Vector sigma2;
    if (fixed_sigma2_) {
        sigma2 = masked(*fixed_sigma2_);
    } else {
        sigma2 = masked(fisher_.global.count >= 2 ? fisher_.global.variance() : Vector::Ones(input_dim_));
        for (Eigen::Index j = 0; j < sigma2.size(); ++j)
            if (!(sigma2(j) > 0.0)) sigma2(j) = 1.0;
    }
    return Prototype{std::move(sigma2), config_.evolve.n_r};
}

void EvolvingClassifier::freeze_mask(FeatureMask mask) {
    if (mask.size() != static_cast<std::size_t>(input_dim_)) throw DimensionMismatch("feature mask length mismatch");
    if (std::find(mask.begin(), mask.end(), true) == mask.end())
        throw InvalidArgument("feature mask must keep at least one feature");
    mask_ = std::move(mask);
    models_.clear();
    const Prototype proto = masked_prototype();
    for (int m = 0; m < n_classes_; ++m) models_.emplace_back(proto, config_.evolve, m);
}

void EvolvingClassifier::route(const Vector& x, int y) {
    ++tick_;
    if (!fixed_sigma2_) {
        const Prototype proto = masked_prototype();
        for (auto& model : models_) model.set_prototype(proto);
    }
    auto& model = models_[static_cast<std::size_t>(y)];
    model.set_tick(tick_ - 1);
    process_sample(model, masked(x));
    for (auto& other : models_) other.set_tick(tick_);
}

void EvolvingClassifier::finish_warmup() {
    if (mask_) return;
    const auto scores = fisher_scores(fisher_);
    freeze_mask(scores ? select_features(*scores, config_.kappa_f) : all_features(input_dim_));
    auto buffered = std::move(warmup_buffer_);
    warmup_buffer_.clear();
    for (const auto& [x, y] : buffered) route(x, y);
}

void EvolvingClassifier::train_sample(const Vector& x, int y) {
    if (y < 0 || y >= n_classes_) throw InvalidArgument("unknown class index " + std::to_string(y));
    check_sample(x, input_dim_);
    fisher_.push(x, y);
    if (!mask_) {
        warmup_buffer_.emplace_back(x, y);
        if (warmup_buffer_.size() >= config_.warmup) finish_warmup();
        return;
    }
    route(x, y);
}

std::size_t EvolvingClassifier::cluster_count() const {
    std::size_t total = 0;
    for (const auto& m : models_) total += m.size();
    return total;
}

Vector EvolvingClassifier::predict_log_scores(const Vector& x) const {
    if (cluster_count() == 0) throw EmptyModel("classifier has not been trained");
    const Vector z = masked(x);
    const double dim = static_cast<double>(z.size());
    Vector out = Vector::Constant(n_classes_, -std::numeric_limits<double>::infinity());
    for (int m = 0; m < n_classes_; ++m) {
        const auto& model = models_[static_cast<std::size_t>(m)];
        for (std::size_t i = 0; i < model.size(); ++i) {
            const double log_gamma = -model.factor(i).mahalanobis_sq(z - model.clusters()[i].mu) / dim;
            out(m) = std::max(out(m), log_gamma);
        }
    }
    return out;
}

Vector EvolvingClassifier::predict_scores(const Vector& x) const { return predict_log_scores(x).array().exp(); }

int EvolvingClassifier::predict(const Vector& x) const {
    const Vector s = predict_log_scores(x);
    Eigen::Index best = 0;
    for (Eigen::Index m = 1; m < s.size(); ++m)
        if (s(m) > s(best)) best = m;
    return encodings_[static_cast<std::size_t>(best)].decode();
}

}  // namespace fedevo
