#include "fedevo/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "fedevo/parallel.hpp"

namespace fedevo {

void EvolveConfig::validate() const {
    if (!(n_r > 0.0)) throw InvalidArgument("n_r must be positive");
    if (!(kappa_m > 0.0)) throw InvalidArgument("kappa_m must be positive");
    if (kappa_n < 1) throw InvalidArgument("kappa_n must be a positive integer");
    if (!(kappa_v > 0.0)) throw InvalidArgument("kappa_v must be positive");
    if (n_sigma && !(*n_sigma > 0.0)) throw InvalidArgument("n_sigma must be positive");
    if (age_limit && *age_limit < 1) throw InvalidArgument("age_limit must be a positive integer");
    // Births carry zero scatter, so a model needs the prior to keep them invertible.
    if (!(prior_weight > 0.0)) throw InvalidArgument("prior_weight must be positive for an evolving model");
}

double EvolveConfig::n_sigma_for(Eigen::Index dim) const {
    return n_sigma ? *n_sigma : std::sqrt(static_cast<double>(dim));
}

EvolvingModel::EvolvingModel(Prototype proto, EvolveConfig config, std::optional<int> class_id)
    : proto_(std::move(proto)), config_(std::move(config)), class_id_(class_id) {
    if (proto_.dim() < 1) throw InvalidArgument("model dimension must be at least 1");
    proto_.validate();
    config_.validate();
}

EvolvingModel EvolvingModel::with_running_variance(Eigen::Index dim, EvolveConfig config,
                                                   std::optional<int> class_id) {
    Prototype proto{Vector::Ones(dim), config.n_r};
    EvolvingModel m(std::move(proto), std::move(config), class_id);
    m.running_ = StatsSummary(dim);
    return m;
}

std::int64_t EvolvingModel::total_count() const {
    std::int64_t total = 0;
    for (const auto& c : clusters_) total += c.n;
    return total;
}

std::optional<std::size_t> EvolvingModel::index_of(std::int64_t id) const {
    for (std::size_t i = 0; i < clusters_.size(); ++i)
        if (clusters_[i].id == id) return i;
    return std::nullopt;
}

double EvolvingModel::activation_d2() const {
    // The default radius sqrt(D) squares to D exactly; going through sqrt would not.
    if (!config_.n_sigma) return static_cast<double>(dim());
    return *config_.n_sigma * *config_.n_sigma;
}

double EvolvingModel::activation_threshold() const { return std::exp(-activation_d2() / static_cast<double>(dim())); }

double EvolvingModel::log_prototype_volume() const {
    const double power = config_.det_mode == DetMode::SqrtDet ? 0.5 : 1.0;
    return log_unit_ball_volume(dim()) + power * (proto_.sigma2.array() / proto_.n_r).log().sum();
}

double EvolvingModel::log_merge_threshold() const {
    return static_cast<double>(dim()) * std::log(config_.kappa_m);
}

EvolvingModel::Cached EvolvingModel::compute_cache(const Cluster& c) const {
    Factor f(effective_covariance_unchecked(c, proto_, config_.prior_weight));
    const double lv = fedevo::log_volume(f, config_.det_mode);
    return Cached{std::move(f), lv};
}

void EvolvingModel::refresh_all() {
    cache_.clear();
    cache_.reserve(clusters_.size());
    for (const auto& c : clusters_) cache_.push_back(compute_cache(c));
}

void EvolvingModel::set_prototype(Prototype proto) {
    if (proto.dim() != dim()) throw DimensionMismatch("prototype dimension differs from model");
    proto.validate();
    proto_ = std::move(proto);
    refresh_all();
}

void EvolvingModel::set_config(EvolveConfig config) {
    config.validate();
    config_ = std::move(config);
    proto_.n_r = config_.n_r;
    refresh_all();
}

std::int64_t EvolvingModel::add_cluster(Cluster c) {
    if (c.dim() != dim()) throw DimensionMismatch("cluster dimension differs from model");
    if (class_id_ && c.class_id != class_id_) throw ClassMismatch("cluster class differs from model class");
    c.id = next_id_++;
    cache_.push_back(compute_cache(c));
    clusters_.push_back(std::move(c));
    return clusters_.back().id;
}

void EvolvingModel::replace_cluster(std::size_t index, Cluster c) {
    if (c.dim() != dim()) throw DimensionMismatch("cluster dimension differs from model");
    cache_[index] = compute_cache(c);
    clusters_[index] = std::move(c);
}

void EvolvingModel::erase_cluster(std::size_t index) {
    clusters_.erase(clusters_.begin() + static_cast<std::ptrdiff_t>(index));
    cache_.erase(cache_.begin() + static_cast<std::ptrdiff_t>(index));
}

void EvolvingModel::absorb_into(std::size_t index, const Vector& x) {
    Cluster updated = clusters_[index];
    absorb(updated, x, tick_);
    replace_cluster(index, std::move(updated));
}

void EvolvingModel::restore(std::vector<Cluster> clusters, std::int64_t tick, std::int64_t next_id) {
    std::set<std::int64_t> ids;
    for (const auto& c : clusters) {
        if (c.dim() != dim()) throw DimensionMismatch("restored cluster dimension differs from model");
        if (c.n < 1) throw InvalidArgument("restored cluster has non-positive count");
        if (!ids.insert(c.id).second) throw InvalidArgument("duplicate cluster id " + std::to_string(c.id));
        if (c.id >= next_id) next_id = c.id + 1;
    }
    clusters_ = std::move(clusters);
    tick_ = tick;
    next_id_ = next_id;
    refresh_all();
}

void EvolvingModel::observe_for_variance(const Vector& x) {
    if (!running_) return;
    running_->push(x);
    Vector var = running_->variance();
    // Until the spread is observable, fall back to the unit variance of standardized data.
    for (Eigen::Index j = 0; j < var.size(); ++j)
        if (!(var(j) > 0.0)) var(j) = 1.0;
    set_prototype(Prototype{std::move(var), config_.n_r});
}

Match best_match(const EvolvingModel& model, const Vector& x) {
    if (model.empty()) throw EmptyModel("best_match on a model without clusters");
    check_sample(x, model.dim());
    const auto& cs = model.clusters();
    Match best;
    bool found = false;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        const double d2 = model.factor(i).mahalanobis_sq(x - cs[i].mu);
        if (!found || d2 < best.mahalanobis_sq || (d2 == best.mahalanobis_sq && cs[i].id < best.id)) {
            best.id = cs[i].id;
            best.index = i;
            best.mahalanobis_sq = d2;
            found = true;
        }
    }
    best.membership = std::exp(-best.mahalanobis_sq / static_cast<double>(model.dim()));
    return best;
}

void process_sample(EvolvingModel& model, const Vector& x) {
    check_sample(x, model.dim());
    model.observe_for_variance(x);
    model.advance_tick();
    // gamma > exp(-N_sigma^2 / D)  <=>  d^2 < N_sigma^2
    if (model.empty()) {
        model.add_cluster(Cluster::born(0, x, model.tick(), model.class_id()));
        return;
    }
    const Match m = best_match(model, x);
    if (m.mahalanobis_sq >= model.activation_d2()) {
        // A newborn is the only cluster x activates, so there is nothing to merge.
        model.add_cluster(Cluster::born(0, x, model.tick(), model.class_id()));
        return;
    }
    model.absorb_into(m.index, x);
    if (model.size() < 2) return;
    merge_step(model, candidate_pairs(model, x), x);
}

namespace {

bool activates(const EvolvingModel& model, std::size_t index, const Vector& x) {
    return model.factor(index).mahalanobis_sq(x - model.clusters()[index].mu) < model.activation_d2();
}

bool mutually_close(const EvolvingModel& model, std::size_t i, std::size_t j) {
    const auto& cs = model.clusters();
    return activates(model, i, cs[j].mu) || activates(model, j, cs[i].mu);
}

ClusterPair ordered(std::int64_t a, std::int64_t b) { return a < b ? ClusterPair{a, b} : ClusterPair{b, a}; }

}  // namespace

std::vector<ClusterPair> candidate_pairs(const EvolvingModel& model, const std::optional<Vector>& focus) {
    std::vector<ClusterPair> out;
    const auto& cs = model.clusters();
    if (cs.size() < 2) return out;
    if (focus) {
        check_sample(*focus, model.dim());
        std::vector<std::size_t> active;
        for (std::size_t i = 0; i < cs.size(); ++i)
            if (activates(model, i, *focus)) active.push_back(i);
        for (std::size_t a = 0; a < active.size(); ++a)
            for (std::size_t b = a + 1; b < active.size(); ++b) {
                const auto& p = cs[active[a]];
                const auto& q = cs[active[b]];
                if (p.class_id == q.class_id) out.push_back(ordered(p.id, q.id));
            }
    } else {
        for (std::size_t i = 0; i < cs.size(); ++i)
            for (std::size_t j = i + 1; j < cs.size(); ++j)
                if (cs[i].class_id == cs[j].class_id && mutually_close(model, i, j))
                    out.push_back(ordered(cs[i].id, cs[j].id));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t merge_step(EvolvingModel& model, const std::vector<ClusterPair>& pairs, const std::optional<Vector>& focus) {
    struct Eval {
        OverlapEvaluation<double> ev;
        bool qualifies = false;
    };
    const double log_threshold = model.log_merge_threshold();
    const double log_cap = std::log(model.config().kappa_v) + model.log_prototype_volume();

    std::map<ClusterPair, std::optional<Eval>> evaluated;  // nullopt: merged covariance degenerate
    std::map<ClusterPair, bool> closeness;                 // global-mode candidate memo
    std::vector<ClusterPair> current = pairs;
    std::size_t merges = 0;

    while (!current.empty()) {
        std::vector<ClusterPair> todo;
        for (const auto& pr : current)
            if (!evaluated.count(pr)) todo.push_back(pr);

        std::vector<std::optional<Eval>> results(todo.size());
        parallel_for(todo.size(), [&](std::size_t k) {
            const auto ip = model.index_of(todo[k].p);
            const auto iq = model.index_of(todo[k].q);
            if (!ip || !iq) return;
            try {
                Eval e{evaluate_overlap(model.clusters()[*ip], model.log_volume(*ip), model.clusters()[*iq],
                                        model.log_volume(*iq), model.prototype(), model.config().prior_weight,
                                        model.config().det_mode),
                       false};
                e.qualifies = e.ev.log_ratio < log_threshold && e.ev.log_volume_merged <= log_cap;
                results[k] = std::move(e);
            } catch (const DegenerateCovariance&) {
            } catch (const ClassMismatch&) {
            }
        });
        for (std::size_t k = 0; k < todo.size(); ++k) evaluated[todo[k]] = std::move(results[k]);

        const ClusterPair* best = nullptr;
        double best_ratio = 0.0;
        for (const auto& pr : current) {
            const auto& e = evaluated[pr];
            if (!e || !e->qualifies) continue;
            if (!best || e->ev.log_ratio < best_ratio) {
                best = &pr;
                best_ratio = e->ev.log_ratio;
            }
        }
        if (!best) break;

        const ClusterPair chosen = *best;
        Cluster merged = std::move(evaluated[chosen]->ev.merged);
        const std::size_t keep = *model.index_of(chosen.p);
        model.replace_cluster(keep, std::move(merged));
        model.erase_cluster(*model.index_of(chosen.q));
        ++merges;

        for (auto it = evaluated.begin(); it != evaluated.end();) {
            const auto& k = it->first;
            if (k.p == chosen.p || k.q == chosen.p || k.p == chosen.q || k.q == chosen.q)
                it = evaluated.erase(it);
            else
                ++it;
        }

        if (focus) {
            current = candidate_pairs(model, focus);
        } else {
            for (auto it = closeness.begin(); it != closeness.end();) {
                const auto& k = it->first;
                if (k.p == chosen.p || k.q == chosen.p || k.p == chosen.q || k.q == chosen.q)
                    it = closeness.erase(it);
                else
                    ++it;
            }
            current.clear();
            const auto& cs = model.clusters();
            for (std::size_t i = 0; i < cs.size(); ++i)
                for (std::size_t j = i + 1; j < cs.size(); ++j) {
                    if (cs[i].class_id != cs[j].class_id) continue;
                    const ClusterPair key = ordered(cs[i].id, cs[j].id);
                    auto it = closeness.find(key);
                    if (it == closeness.end()) it = closeness.emplace(key, mutually_close(model, i, j)).first;
                    if (it->second) current.push_back(key);
                }
            std::sort(current.begin(), current.end());
        }
    }
    return merges;
}

std::size_t prune(EvolvingModel& model) {
    const auto& cfg = model.config();
    const auto& cs = model.clusters();
    if (cs.empty()) return 0;
    std::vector<bool> drop(cs.size(), false);
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        const bool too_small = cs[i].n < cfg.kappa_n;
        const bool too_old = cfg.age_limit && (model.tick() - cs[i].last_activation) > *cfg.age_limit;
        if (too_small || too_old) {
            drop[i] = true;
            ++dropped;
        }
    }
    if (dropped == cs.size()) {
        // Keep the best-supported cluster: largest n, then most recent, then lowest id.
        std::size_t keep = 0;
        for (std::size_t i = 1; i < cs.size(); ++i) {
            const auto& a = cs[i];
            const auto& b = cs[keep];
            if (a.n > b.n || (a.n == b.n && a.last_activation > b.last_activation)) keep = i;
        }
        drop[keep] = false;
        --dropped;
    }
    for (std::size_t i = cs.size(); i-- > 0;)
        if (drop[i]) model.erase_cluster(i);
    return dropped;
}

void fit_stream(EvolvingModel& model, const Eigen::Ref<const Matrix>& X) {
    if (X.rows() > 0 && X.cols() != model.dim())
        throw DimensionMismatch("sample matrix has " + std::to_string(X.cols()) + " columns, model expects " +
                                std::to_string(model.dim()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) process_sample(model, Vector(X.row(i).transpose()));
}

}  // namespace fedevo
