#include "fedevo/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "fedevo/parallel.hpp"

namespace fedevo {

using nlohmann::ordered_json;

void RunManifest::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries)
        if (k == key) {
            v = value;
            return;
        }
    entries.emplace_back(key, value);
}

std::string RunManifest::to_json() const {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : entries) j[k] = v;
    return j.dump();
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
    // splitmix64 finalizer over a simple combination
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1) + 0xBF58476D1CE4E5B9ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

FoldResult evaluate_fold(const Dataset& data, const Fold& fold, const BenchmarkOptions& options,
                         std::uint64_t round_seed) {
    if (!data.y) throw InvalidArgument("classification needs a labelled dataset");
    const Dataset train = data.subset(fold.train);
    const Dataset test = data.subset(fold.test);
    const int n_classes = data.n_classes();

    RoundOptions ro;
    ro.n_owners = options.owners;
    ro.seed = round_seed;
    ro.owner = options.owner;
    ro.server = options.server;
    ro.parallel_owners = false;

    const auto t0 = std::chrono::steady_clock::now();
    const RoundResult round = run_round(train.X, &*train.y, n_classes, ro);
    const auto t1 = std::chrono::steady_clock::now();

    const EvolvingClassifier clf = restore_classifier(round.global);
    const Matrix z = round.round_zero.standardizer.apply(test.X);
    std::vector<int> pred(test.size());
    Matrix scores(z.rows(), n_classes);
    constexpr double floor = -std::numeric_limits<double>::max();
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const Vector x = z.row(i).transpose();
        pred[static_cast<std::size_t>(i)] = clf.predict(x);
        // One-vs-rest ranking uses memberships normalized across classes, computed
        // in log space so that distant samples do not underflow to ties.
        const Vector log_s = clf.predict_log_scores(x);
        const double top = log_s.maxCoeff();
        const double norm = top + std::log((log_s.array() - top).exp().sum());
        scores.row(i) = (log_s.array() - norm).matrix().cwiseMax(floor).transpose();
    }

    FoldResult r;
    r.accuracy = accuracy(*test.y, pred);
    r.macro_f1 = macro_f1(*test.y, pred, n_classes);
    r.roc_auc = roc_auc_ovr(*test.y, scores, n_classes);
    r.train_time_per_sample_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(train.size());
    r.n_clusters_global = round.global.clusters.size();
    return r;
}

EvalReport run_classification_benchmark(const Dataset& data, const std::string& name, const BenchmarkOptions& options) {
    if (!data.y) throw InvalidArgument("classification needs a labelled dataset");
    if (options.repeats < 1) throw InvalidArgument("repeats must be at least 1");
    std::vector<std::vector<Fold>> splits;
    for (std::size_t r = 0; r < options.repeats; ++r)
        splits.push_back(kfold_split(data.size(), options.folds, derive_seed(options.seed, 0, r), &*data.y));

    std::vector<FoldResult> results(options.repeats * options.folds);
    auto job = [&](std::size_t k) {
        const std::size_t r = k / options.folds, f = k % options.folds;
        FoldResult fr = evaluate_fold(data, splits[r][f], options, derive_seed(options.seed, 1 + r, f));
        fr.repeat = r;
        fr.fold = f;
        results[k] = fr;
    };
    if (options.parallel)
        parallel_for(results.size(), job, 2);
    else
        for (std::size_t k = 0; k < results.size(); ++k) job(k);
    return summarize(name, std::move(results));
}

ClusteringRun run_federated_clustering(const Eigen::Ref<const Matrix>& X, const RoundOptions& options) {
    RoundResult round = run_round(X, nullptr, 0, options);
    EvolvingModel global = restore_model(round.global);
    Matrix z = round.round_zero.standardizer.apply(X);
    std::vector<int> assignment(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        assignment[static_cast<std::size_t>(i)] = static_cast<int>(best_match(global, z.row(i).transpose()).index);
    return ClusteringRun{std::move(round), std::move(global), std::move(z), std::move(assignment)};
}

namespace {

struct RawEllipse {
    Vector center;
    Matrix cov;
};

RawEllipse to_raw(const Cluster& c, const EvolvingModel& model, const Standardizer& s) {
    const Matrix sigma = effective_covariance_unchecked(c, model.prototype(), model.config().prior_weight);
    RawEllipse e;
    e.center = c.mu.cwiseProduct(s.scale) + s.mean;
    e.cov = s.scale.asDiagonal() * sigma * s.scale.asDiagonal();
    return e;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string escape_xml_comment(std::string s) {
    for (std::size_t p = s.find("--"); p != std::string::npos; p = s.find("--", p)) s.replace(p, 2, "- -");
    return s;
}

}  // namespace

std::string render_cluster_svg(const Eigen::Ref<const Matrix>& X, const EvolvingModel& model,
                               const Standardizer& standardizer, const RunManifest& manifest) {
    if (X.cols() != 2 || standardizer.output_dim() != 2) throw InvalidArgument("plotting needs 2-D data");
    constexpr double size = 640.0, margin = 20.0;
    const Eigen::RowVector2d lo = X.colwise().minCoeff(), hi = X.colwise().maxCoeff();
    const double span = std::max({hi(0) - lo(0), hi(1) - lo(1), 1e-12});
    const double scale = (size - 2 * margin) / span;
    auto px = [&](double x) { return margin + (x - lo(0)) * scale; };
    auto py = [&](double y) { return size - margin - (y - lo(1)) * scale; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
        << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
    out << "<!-- manifest: " << escape_xml_comment(manifest.to_json()) << " -->\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<g fill=\"#1f4fb4\" fill-opacity=\"0.6\">\n";
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        out << "<circle cx=\"" << fmt(px(X(i, 0))) << "\" cy=\"" << fmt(py(X(i, 1))) << "\" r=\"1.6\"/>\n";
    out << "</g>\n<g fill=\"none\" stroke=\"#d62020\" stroke-width=\"1.5\">\n";
    for (const auto& c : model.clusters()) {
        const RawEllipse e = to_raw(c, model, standardizer);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(e.cov);
        const Vector lambda = eig.eigenvalues().cwiseMax(0.0);
        const Vector major = eig.eigenvectors().col(1);
        // y is flipped on screen, so the rotation angle changes sign.
        const double angle = -std::atan2(major(1), major(0)) * 180.0 / M_PI;
        out << "<ellipse cx=\"" << fmt(px(e.center(0))) << "\" cy=\"" << fmt(py(e.center(1))) << "\" rx=\""
            << fmt(2.0 * std::sqrt(lambda(1)) * scale) << "\" ry=\"" << fmt(2.0 * std::sqrt(lambda(0)) * scale)
            << "\" transform=\"rotate(" << fmt(angle) << ' ' << fmt(px(e.center(0))) << ' '
            << fmt(py(e.center(1))) << ")\"/>\n";
    }
    out << "</g>\n</svg>\n";
    return out.str();
}

std::string cluster_summary_json(const EvolvingModel& model, const Standardizer& standardizer,
                                 const RunManifest& manifest, double ari) {
    ordered_json j;
    j["manifest"] = ordered_json::parse(manifest.to_json());
    j["n_clusters"] = model.size();
    if (std::isfinite(ari)) j["adjusted_rand_index"] = ari;
    ordered_json clusters = ordered_json::array();
    for (const auto& c : model.clusters()) {
        const RawEllipse e = to_raw(c, model, standardizer);
        ordered_json jc;
        jc["id"] = c.id;
        jc["n"] = c.n;
        jc["mu"] = std::vector<double>(e.center.data(), e.center.data() + e.center.size());
        std::vector<double> cov;
        for (Eigen::Index r = 0; r < e.cov.rows(); ++r)
            for (Eigen::Index k = 0; k < e.cov.cols(); ++k) cov.push_back(e.cov(r, k));
        jc["sigma"] = cov;
        clusters.push_back(std::move(jc));
    }
    j["clusters"] = std::move(clusters);
    return j.dump(2) + "\n";
}

namespace {

ordered_json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

std::string pct(const MeanStd& m) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%5.1f +- %4.1f", 100.0 * m.mean, 100.0 * m.std);
    return buf;
}

}  // namespace

std::string report_json(const EvalReport& report, const RunManifest& manifest) {
    ordered_json j;
    j["manifest"] = ordered_json::parse(manifest.to_json());
    j["dataset"] = report.dataset;
    j["accuracy"] = mean_std_json(report.accuracy);
    j["macro_f1"] = mean_std_json(report.macro_f1);
    j["roc_auc_ovr_macro"] = mean_std_json(report.roc_auc_ovr_macro);
    j["n_clusters_global"] = mean_std_json(report.n_clusters_global);
    ordered_json folds = ordered_json::array();
    for (const auto& f : report.folds)
        folds.push_back({{"repeat", f.repeat},
                         {"fold", f.fold},
                         {"accuracy", f.accuracy},
                         {"macro_f1", f.macro_f1},
                         {"roc_auc", f.roc_auc},
                         {"n_clusters_global", f.n_clusters_global}});
    j["folds"] = std::move(folds);
    return j.dump(2) + "\n";
}

std::string report_text(const EvalReport& report, const RunManifest& manifest) {
    std::ostringstream out;
    out << "# manifest " << manifest.to_json() << "\n";
    out << "dataset: " << report.dataset << "\n";
    out << "measure          mean +- std [%]\n";
    out << "accuracy         " << pct(report.accuracy) << "\n";
    out << "F1 (macro)       " << pct(report.macro_f1) << "\n";
    out << "ROC AUC (ovr)    " << pct(report.roc_auc_ovr_macro) << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f +- %.1f", report.n_clusters_global.mean, report.n_clusters_global.std);
    out << "global clusters  " << buf << "\n";
    return out.str();
}

std::string timing_json(const EvalReport& report) {
    ordered_json j;
    j["dataset"] = report.dataset;
    j["train_time_per_sample_ms"] = mean_std_json(report.train_time_per_sample_ms);
    return j.dump(2) + "\n";
}

}  // namespace fedevo
