#include "fedevo/snapshot.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fedevo {

using nlohmann::json;

namespace {

json vector_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json matrix_json(const Matrix& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
    return a;
}

[[noreturn]] void schema(const std::string& what) { throw SchemaError("snapshot: " + what); }

const json& field(const json& obj, const char* key) {
    if (!obj.is_object()) schema("expected an object around '" + std::string(key) + "'");
    const auto it = obj.find(key);
    if (it == obj.end()) schema("missing field '" + std::string(key) + "'");
    return *it;
}

double real(const json& j, const char* what) {
    if (!j.is_number()) schema(std::string(what) + " must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) schema(std::string(what) + " must be finite");
    return v;
}

std::int64_t integer(const json& j, const char* what) {
    if (!j.is_number_integer()) schema(std::string(what) + " must be an integer");
    return j.get<std::int64_t>();
}

Vector read_vector(const json& j, Eigen::Index n, const char* what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
        schema(std::string(what) + " must be an array of length " + std::to_string(n));
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = real(j[static_cast<std::size_t>(i)], what);
    return v;
}

Matrix read_matrix(const json& j, Eigen::Index d, const char* what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != d * d)
        schema(std::string(what) + " must be a row-major array of length " + std::to_string(d * d));
    Matrix m(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) m(r, c) = real(j[static_cast<std::size_t>(r * d + c)], what);
    const double scale = m.cwiseAbs().maxCoeff();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) schema(std::string(what) + " is not symmetric");
    return m;
}

json config_json(const EvolveConfig& c) {
    json j;
    j["n_r"] = c.n_r;
    j["kappa_m"] = c.kappa_m;
    j["kappa_n"] = c.kappa_n;
    j["kappa_v"] = c.kappa_v;
    j["n_sigma"] = c.n_sigma ? json(*c.n_sigma) : json(nullptr);
    j["age_limit"] = c.age_limit ? json(*c.age_limit) : json(nullptr);
    j["prior_weight"] = c.prior_weight;
    j["det_mode"] = to_string(c.det_mode);
    return j;
}

EvolveConfig read_config(const json& j) {
    EvolveConfig c;
    c.n_r = real(field(j, "n_r"), "config.n_r");
    c.kappa_m = real(field(j, "kappa_m"), "config.kappa_m");
    c.kappa_n = integer(field(j, "kappa_n"), "config.kappa_n");
    c.kappa_v = real(field(j, "kappa_v"), "config.kappa_v");
    if (const auto& ns = field(j, "n_sigma"); !ns.is_null()) c.n_sigma = real(ns, "config.n_sigma");
    if (const auto& al = field(j, "age_limit"); !al.is_null()) c.age_limit = integer(al, "config.age_limit");
    c.prior_weight = real(field(j, "prior_weight"), "config.prior_weight");
    const auto& dm = field(j, "det_mode");
    if (!dm.is_string()) schema("config.det_mode must be a string");
    try {
        c.det_mode = det_mode_from_string(dm.get<std::string>());
    } catch (const InvalidArgument& e) {
        schema(e.what());
    }
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        schema(std::string("config: ") + e.what());
    }
    return c;
}

void append_model(ModelSnapshot& snap, const EvolvingModel& model) {
    for (const auto& c : model.clusters()) snap.clusters.push_back(c);
    snap.next_id.push_back(model.next_id());
    snap.tick = std::max(snap.tick, model.tick());
}

}  // namespace

std::int64_t ModelSnapshot::total_count() const {
    std::int64_t total = 0;
    for (const auto& c : clusters) total += c.n;
    return total;
}

ModelSnapshot snapshot_of(const EvolvingModel& model, std::string owner_id) {
    ModelSnapshot snap;
    snap.D = model.dim();
    snap.M = 0;
    snap.config = model.config();
    snap.proto = model.prototype();
    snap.owner_id = std::move(owner_id);
    snap.input_dim = model.dim();
    append_model(snap, model);
    return snap;
}

ModelSnapshot snapshot_of(const EvolvingClassifier& clf, std::string owner_id) {
    if (!clf.mask()) throw EmptyModel("classifier is still in warm-up; no feature mask yet");
    ModelSnapshot snap;
    snap.M = clf.n_classes();
    snap.D = clf.models().front().dim();
    snap.config = clf.config().evolve;
    snap.proto = clf.models().front().prototype();
    snap.owner_id = std::move(owner_id);
    snap.input_dim = clf.input_dim();
    snap.feature_mask = *clf.mask();
    snap.kappa_f = clf.config().kappa_f;
    snap.warmup = clf.config().warmup;
    for (const auto& m : clf.models()) append_model(snap, m);
    snap.tick = std::max(snap.tick, clf.tick());
    return snap;
}

EvolvingModel restore_model(const ModelSnapshot& snap) {
    if (snap.is_classifier()) throw InvalidArgument("snapshot holds a classifier, not a single model");
    EvolvingModel model(snap.proto, snap.config);
    model.restore(snap.clusters, snap.tick, snap.next_id.empty() ? 0 : snap.next_id.front());
    return model;
}

EvolvingClassifier restore_classifier(const ModelSnapshot& snap) {
    if (!snap.is_classifier()) throw InvalidArgument("snapshot holds a clustering model, not a classifier");
    std::vector<EvolvingModel> models;
    for (int m = 0; m < snap.M; ++m) {
        std::vector<Cluster> mine;
        for (const auto& c : snap.clusters)
            if (c.class_id == m) mine.push_back(c);
        EvolvingModel model(snap.proto, snap.config, m);
        model.restore(std::move(mine), snap.tick, snap.next_id.at(static_cast<std::size_t>(m)));
        models.push_back(std::move(model));
    }
    ClassifierConfig cfg{snap.config, snap.kappa_f, snap.warmup};
    return EvolvingClassifier::from_models(snap.input_dim, std::move(cfg), snap.feature_mask, std::move(models));
}

std::string serialize(const ModelSnapshot& snap) {
    json j;
    j["format_version"] = snap.format_version;
    j["D"] = snap.D;
    j["M"] = snap.M;
    j["config"] = config_json(snap.config);
    j["proto"] = {{"sigma2", vector_json(snap.proto.sigma2)}, {"n_r", snap.proto.n_r}};
    j["owner_id"] = snap.owner_id;
    j["tick"] = snap.tick;
    j["next_id"] = snap.next_id;
    json clusters = json::array();
    for (const auto& c : snap.clusters) {
        json jc;
        jc["id"] = c.id;
        jc["mu"] = vector_json(c.mu);
        jc["sigma_eff"] = matrix_json(effective_covariance_unchecked(c, snap.proto, snap.config.prior_weight));
        jc["scatter"] = matrix_json(c.scatter);
        jc["n"] = c.n;
        jc["last_activation"] = c.last_activation;
        jc["class_id"] = c.class_id ? json(*c.class_id) : json(nullptr);
        clusters.push_back(std::move(jc));
    }
    j["clusters"] = std::move(clusters);
    if (snap.is_classifier()) {
        json mask = json::array();
        for (bool b : snap.feature_mask) mask.push_back(b ? 1 : 0);
        j["classifier"] = {{"input_dim", snap.input_dim},
                           {"feature_mask", std::move(mask)},
                           {"kappa_f", snap.kappa_f},
                           {"warmup", snap.warmup}};
    }
    return j.dump() + "\n";
}

ModelSnapshot deserialize(std::string_view bytes) {
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        schema(std::string("not valid JSON: ") + e.what());
    }
    ModelSnapshot s;
    s.format_version = static_cast<int>(integer(field(j, "format_version"), "format_version"));
    if (s.format_version != ModelSnapshot::kFormatVersion)
        schema("unsupported format_version " + std::to_string(s.format_version));
    s.D = integer(field(j, "D"), "D");
    s.M = static_cast<int>(integer(field(j, "M"), "M"));
    if (s.D < 1) schema("D must be positive");
    if (s.M < 0) schema("M must be non-negative");
    s.config = read_config(field(j, "config"));
    const auto& proto = field(j, "proto");
    s.proto.sigma2 = read_vector(field(proto, "sigma2"), s.D, "proto.sigma2");
    s.proto.n_r = real(field(proto, "n_r"), "proto.n_r");
    try {
        s.proto.validate();
    } catch (const InvalidArgument& e) {
        schema(e.what());
    }
    const auto& owner = field(j, "owner_id");
    if (!owner.is_string()) schema("owner_id must be a string");
    s.owner_id = owner.get<std::string>();
    s.tick = integer(field(j, "tick"), "tick");
    const auto& next = field(j, "next_id");
    if (!next.is_array() || next.size() != static_cast<std::size_t>(std::max(s.M, 1)))
        schema("next_id must have one entry per class model");
    for (const auto& v : next) s.next_id.push_back(integer(v, "next_id"));

    const auto& clusters = field(j, "clusters");
    if (!clusters.is_array()) schema("clusters must be an array");
    std::set<std::pair<int, std::int64_t>> seen;
    for (const auto& jc : clusters) {
        Cluster c;
        c.id = integer(field(jc, "id"), "cluster.id");
        c.mu = read_vector(field(jc, "mu"), s.D, "cluster.mu");
        c.scatter = read_matrix(field(jc, "scatter"), s.D, "cluster.scatter");
        read_matrix(field(jc, "sigma_eff"), s.D, "cluster.sigma_eff");
        c.n = integer(field(jc, "n"), "cluster.n");
        if (c.n < 1) schema("cluster.n must be positive");
        c.last_activation = integer(field(jc, "last_activation"), "cluster.last_activation");
        const auto& cls = field(jc, "class_id");
        if (!cls.is_null()) c.class_id = static_cast<int>(integer(cls, "cluster.class_id"));
        if (s.M > 0 && (!c.class_id || *c.class_id < 0 || *c.class_id >= s.M))
            schema("classifier cluster needs class_id in [0, M)");
        if (s.M == 0 && c.class_id) schema("clustering snapshot cluster must not carry a class_id");
        if (!seen.insert({c.class_id.value_or(-1), c.id}).second)
            schema("duplicate cluster id " + std::to_string(c.id));
        s.clusters.push_back(std::move(c));
    }

    if (s.M > 0) {
        const auto& cl = field(j, "classifier");
        s.input_dim = integer(field(cl, "input_dim"), "classifier.input_dim");
        const auto& mask = field(cl, "feature_mask");
        if (!mask.is_array() || static_cast<Eigen::Index>(mask.size()) != s.input_dim)
            schema("classifier.feature_mask must have input_dim entries");
        Eigen::Index active = 0;
        for (const auto& b : mask) {
            const auto v = integer(b, "classifier.feature_mask");
            if (v != 0 && v != 1) schema("classifier.feature_mask entries must be 0 or 1");
            s.feature_mask.push_back(v == 1);
            active += v;
        }
        if (active != s.D) schema("classifier.feature_mask must keep exactly D features");
        s.kappa_f = real(field(cl, "kappa_f"), "classifier.kappa_f");
        const auto warm = integer(field(cl, "warmup"), "classifier.warmup");
        if (warm < 0) schema("classifier.warmup must be non-negative");
        s.warmup = static_cast<std::size_t>(warm);
    } else {
        s.input_dim = s.D;
    }
    return s;
}

void write_snapshot(const std::filesystem::path& path, const ModelSnapshot& snap) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << serialize(snap);
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

ModelSnapshot read_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return deserialize(buf.str());
}

}  // namespace fedevo
