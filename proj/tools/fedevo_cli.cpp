// fedevo: clustering runs, classification benchmarks and federated rounds.
//
//   fedevo cluster  <dataset> --out DIR [--nr ..] [--owners 3] [--seed 42]
//   fedevo classify <dataset> --out DIR [--folds 3] [--repeats 10] [--kf 0]
//   fedevo federate <dataset> --out DIR
//   fedevo federate --aggregate-only --out DIR owner_0.fedevo.json ...
//
// <dataset> is either a bundled dataset name (see data/manifest.json) or a
// path to a CSV file. Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedevo/experiment.hpp"
#include "fedevo/parallel.hpp"
#include "fedevo/snapshot.hpp"

namespace fs = std::filesystem;
using namespace fedevo;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Flags {
    std::string dataset;
    std::string out;
    std::string data_dir = FEDEVO_DEFAULT_DATA_DIR;
    std::string label;
    bool no_header = false;
    std::optional<double> nr, km, kv, nsigma, kf;
    std::optional<std::int64_t> kn;
    std::optional<std::int64_t> age_limit;
    double prior_weight = 1.0;
    std::string det_mode = "sqrt-det";
    double age_fraction = 0.95;
    std::size_t owners = 3;
    std::size_t folds = 3;
    std::size_t repeats = 10;
    std::size_t warmup = 50;
    std::uint64_t seed = 42;
    std::size_t threads = 0;
    bool aggregate_only = false;
    std::vector<std::string> snapshots;
};

std::string num(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

struct LoadedData {
    Dataset data;
    std::string name;  // bundled name, or the file stem for paths
    bool bundled = false;
};

std::optional<std::string> header_has(const fs::path& path, const std::string& column) {
    std::ifstream in(path);
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ' || cell.back() == '"')) cell.pop_back();
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '"')) cell.erase(0, 1);
        if (cell == column) return cell;
    }
    return std::nullopt;
}

LoadedData load_dataset(const Flags& f) {
    const fs::path as_path(f.dataset);
    if (fs::is_regular_file(as_path)) {
        std::optional<ColumnRef> label;
        if (!f.label.empty())
            label = ColumnRef(f.label);
        else if (!f.no_header && header_has(as_path, "label"))
            label = ColumnRef(std::string("label"));
        return {load_csv(as_path, !f.no_header, label), as_path.stem().string(), false};
    }
    const fs::path manifest = fs::path(f.data_dir) / "manifest.json";
    if (fs::exists(manifest))
        for (const auto& e : read_manifest(manifest))
            if (e.name == f.dataset) return {load_bundled(f.data_dir, f.dataset), f.dataset, true};
    throw UsageError("no such dataset or file: " + f.dataset);
}

/// Fills flags left unset from the per-dataset table in the data directory.
void apply_defaults(Flags& f, const std::string& name) {
    const auto t = read_tuned_defaults(f.data_dir, name);
    if (!t) return;
    if (!f.nr) f.nr = t->n_r;
    if (!f.km) f.km = t->kappa_m;
    if (!f.kn) f.kn = t->kappa_n;
    if (!f.kv) f.kv = t->kappa_v;
    if (!f.kf) f.kf = t->kappa_f;
}

EvolveConfig evolve_config(const Flags& f) {
    EvolveConfig c;
    if (f.nr) c.n_r = *f.nr;
    if (f.km) c.kappa_m = *f.km;
    if (f.kn) c.kappa_n = *f.kn;
    if (f.kv) c.kappa_v = *f.kv;
    c.n_sigma = f.nsigma;
    c.age_limit = f.age_limit;
    c.prior_weight = f.prior_weight;
    c.det_mode = det_mode_from_string(f.det_mode);
    c.validate();
    return c;
}

RunManifest manifest_for(const std::string& cmd, const Flags& f, const EvolveConfig& c) {
    RunManifest m;
    m.set("subcommand", cmd);
    m.set("dataset", f.dataset);
    m.set("n_r", num(c.n_r));
    m.set("kappa_m", num(c.kappa_m));
    m.set("kappa_n", std::to_string(c.kappa_n));
    m.set("kappa_v", num(c.kappa_v));
    m.set("n_sigma", c.n_sigma ? num(*c.n_sigma) : "sqrt(D)");
    m.set("age_limit", c.age_limit ? std::to_string(*c.age_limit) : "none");
    m.set("age_fraction", num(f.age_fraction));
    m.set("prior_weight", num(c.prior_weight));
    m.set("det_mode", to_string(c.det_mode));
    m.set("owners", std::to_string(f.owners));
    m.set("seed", std::to_string(f.seed));
    return m;
}

ServerOptions server_options(const Flags& f, const EvolveConfig& c) {
    ServerOptions s;
    s.config = c;
    s.age_fraction = f.age_fraction;
    return s;
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << bytes;
    if (!out) throw Error("write failed: " + path.string());
}

fs::path prepare_out(const std::string& out) {
    fs::path p(out);
    fs::create_directories(p);
    return p;
}

int cmd_cluster(Flags f) {
    LoadedData ld = load_dataset(f);
    apply_defaults(f, ld.name);
    const EvolveConfig cfg = evolve_config(f);
    RunManifest manifest = manifest_for("cluster", f, cfg);

    RoundOptions ro;
    ro.n_owners = f.owners;
    ro.seed = f.seed;
    ro.owner.evolve = cfg;
    ro.server = server_options(f, cfg);
    const ClusteringRun run = run_federated_clustering(ld.data.X, ro);
    const double ari = ld.data.y ? adjusted_rand_index(*ld.data.y, run.assignment)
                                 : std::numeric_limits<double>::quiet_NaN();

    const fs::path out = prepare_out(f.out);
    write_file(out / "summary.json",
               cluster_summary_json(run.global, run.round.round_zero.standardizer, manifest, ari));
    if (ld.data.dim() == 2 && run.round.round_zero.standardizer.output_dim() == 2)
        write_file(out / "clusters.svg",
                   render_cluster_svg(ld.data.X, run.global, run.round.round_zero.standardizer, manifest));
    std::cout << "clusters: " << run.global.size() << "\n";
    if (ld.data.y) std::cout << "adjusted rand index: " << ari << "\n";
    return 0;
}

int cmd_classify(Flags f) {
    LoadedData ld = load_dataset(f);
    if (!ld.data.y) throw UsageError("classify needs a labelled dataset (use --label)");
    apply_defaults(f, ld.name);
    const EvolveConfig cfg = evolve_config(f);
    RunManifest manifest = manifest_for("classify", f, cfg);
    manifest.set("kappa_f", num(f.kf.value_or(0.0)));
    manifest.set("warmup", std::to_string(f.warmup));
    manifest.set("folds", std::to_string(f.folds));
    manifest.set("repeats", std::to_string(f.repeats));
    if (f.folds < 2) throw UsageError("--folds must be at least 2");

    BenchmarkOptions bo;
    bo.folds = f.folds;
    bo.repeats = f.repeats;
    bo.owners = f.owners;
    bo.seed = f.seed;
    bo.owner.evolve = cfg;
    bo.owner.kappa_f = f.kf.value_or(0.0);
    bo.owner.warmup = f.warmup;
    bo.server = server_options(f, cfg);
    const EvalReport report = run_classification_benchmark(ld.data, ld.name, bo);

    const fs::path out = prepare_out(f.out);
    write_file(out / "report.json", report_json(report, manifest));
    const std::string text = report_text(report, manifest);
    write_file(out / "report.txt", text);
    write_file(out / "timing.json", timing_json(report));
    std::cout << text;
    return 0;
}

int aggregate_files(const Flags& f) {
    if (f.snapshots.empty()) throw UsageError("--aggregate-only needs snapshot files");
    std::vector<ModelSnapshot> snaps;
    for (const auto& path : f.snapshots) {
        if (!fs::is_regular_file(path)) throw UsageError("no such snapshot file: " + path);
        try {
            snaps.push_back(read_snapshot(path));
        } catch (const Error& e) {
            throw Error(path + ": " + e.what());
        }
    }
    EvolveConfig cfg = snaps.front().config;
    if (f.km) cfg.kappa_m = *f.km;
    if (f.kn) cfg.kappa_n = *f.kn;
    if (f.kv) cfg.kappa_v = *f.kv;
    if (f.age_limit) cfg.age_limit = f.age_limit;
    ModelSnapshot global;
    try {
        global = aggregate(snaps, server_options(f, cfg));
    } catch (const SnapshotMismatch& e) {
        std::string names;
        for (auto i : e.offending()) names += (names.empty() ? "" : ", ") + f.snapshots[i];
        throw Error(std::string(e.what()) + "; offending file(s): " + names);
    }
    const fs::path out = prepare_out(f.out);
    write_snapshot(out / "global.fedevo.json", global);
    std::cout << "global clusters: " << global.clusters.size() << "\n";
    return 0;
}

int cmd_federate(Flags f) {
    if (f.aggregate_only) return aggregate_files(f);
    if (f.dataset.empty()) throw UsageError("federate needs a dataset");
    LoadedData ld = load_dataset(f);
    apply_defaults(f, ld.name);
    const EvolveConfig cfg = evolve_config(f);
    RunManifest manifest = manifest_for("federate", f, cfg);

    RoundOptions ro;
    ro.n_owners = f.owners;
    ro.seed = f.seed;
    ro.owner.evolve = cfg;
    ro.owner.kappa_f = f.kf.value_or(0.0);
    ro.owner.warmup = f.warmup;
    ro.server = server_options(f, cfg);
    const RoundResult round = ld.data.y ? run_round(ld.data.X, &*ld.data.y, ld.data.n_classes(), ro)
                                        : run_round(ld.data.X, nullptr, 0, ro);

    const fs::path out = prepare_out(f.out);
    for (std::size_t k = 0; k < round.owner_bytes.size(); ++k)
        write_file(out / ("owner_" + std::to_string(k) + ".fedevo.json"), round.owner_bytes[k]);
    write_snapshot(out / "global.fedevo.json", round.global);
    // Snapshots keep a strict schema, so the manifest travels alongside them.
    write_file(out / "manifest.json", manifest.to_json() + "\n");
    std::cout << "owners: " << round.owner_bytes.size() << ", global clusters: " << round.global.clusters.size()
              << "\n";
    return 0;
}

void add_model_flags(CLI::App* sc, Flags& f) {
    sc->add_option("--out", f.out, "Output directory")->required();
    sc->add_option("--data-dir", f.data_dir, "Directory with manifest.json and defaults.json");
    sc->add_option("--label", f.label, "Label column name for CSV paths");
    sc->add_flag("--no-header", f.no_header, "CSV has no header row");
    sc->add_option("--nr", f.nr, "Quantization number N_r")->check(CLI::PositiveNumber);
    sc->add_option("--km", f.km, "Merge threshold base kappa_m")->check(CLI::PositiveNumber);
    sc->add_option("--kn", f.kn, "Minimum cluster support kappa_n")->check(CLI::PositiveNumber);
    sc->add_option("--kv", f.kv, "Merged volume cap kappa_v")->check(CLI::PositiveNumber);
    sc->add_option("--nsigma", f.nsigma, "Activation radius N_sigma (default sqrt(D))")->check(CLI::PositiveNumber);
    sc->add_option("--age-limit", f.age_limit, "Absolute age limit for pruning")->check(CLI::NonNegativeNumber);
    sc->add_option("--age-fraction", f.age_fraction, "Server age limit as a fraction of the global tick")
        ->check(CLI::Range(0.0, 1.0));
    sc->add_option("--prior-weight", f.prior_weight, "Weight of the prototype prior")->check(CLI::PositiveNumber);
    sc->add_option("--det-mode", f.det_mode, "Volume mode")->check(CLI::IsMember({"sqrt-det", "literal-det"}));
    sc->add_option("--owners", f.owners, "Number of data owners")->check(CLI::PositiveNumber);
    sc->add_option("--seed", f.seed, "Random seed");
    sc->add_option("--threads", f.threads, "Worker threads (0 = hardware concurrency)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated evolving Gaussian clustering and classification"};
    app.require_subcommand(1);
    Flags f;

    auto* cluster = app.add_subcommand("cluster", "Federated clustering with summary and 2-D ellipse plot");
    cluster->add_option("dataset", f.dataset, "Bundled dataset name or CSV path")->required();
    add_model_flags(cluster, f);

    auto* classify = app.add_subcommand("classify", "Cross-validated federated classification benchmark");
    classify->add_option("dataset", f.dataset, "Bundled dataset name or CSV path")->required();
    add_model_flags(classify, f);
    classify->add_option("--kf", f.kf, "Fisher feature selection threshold kappa_f")->check(CLI::Range(0.0, 1.0));
    classify->add_option("--warmup", f.warmup, "Samples buffered before the feature mask freezes");
    classify->add_option("--folds", f.folds, "Cross-validation folds");
    classify->add_option("--repeats", f.repeats, "Cross-validation repeats")->check(CLI::PositiveNumber);

    auto* federate = app.add_subcommand("federate", "One federated round, writing owner and global snapshots");
    federate->add_option("inputs", f.snapshots, "Dataset (normal mode) or snapshot files (--aggregate-only)");
    add_model_flags(federate, f);
    federate->add_option("--kf", f.kf, "Fisher feature selection threshold kappa_f")->check(CLI::Range(0.0, 1.0));
    federate->add_option("--warmup", f.warmup, "Samples buffered before the feature mask freezes");
    federate->add_flag("--aggregate-only", f.aggregate_only, "Aggregate existing snapshot files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (f.threads > 0) set_max_threads(f.threads);
        if (*cluster) return cmd_cluster(f);
        if (*classify) return cmd_classify(f);
        if (!f.aggregate_only) {
            if (f.snapshots.size() != 1) throw UsageError("federate takes exactly one dataset");
            f.dataset = f.snapshots.front();
        }
        return cmd_federate(f);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
