#include "fedevo/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"

#include "fedevo/error.hpp"
#include "fedevo/log.hpp"

namespace fedevo {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\"");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "?" || cell == "NA"; }

std::optional<double> parse_number(const std::string& cell) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.X.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    if (y) {
        out.y.emplace();
        for (auto r : rows) out.y->push_back((*y)[r]);
    }
    out.feature_names = feature_names;
    out.class_names = class_names;
    return out;
}

Dataset parse_csv(const std::string& text, bool has_header, std::optional<ColumnRef> label_column) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto cells = split_row(line);
        if (first && has_header) {
            header = std::move(cells);
            first = false;
            continue;
        }
        first = false;
        rows.push_back(std::move(cells));
    }
    const std::size_t width = has_header ? header.size() : (rows.empty() ? 0 : rows.front().size());
    if (width == 0) throw SchemaError("csv: no columns");
    for (std::size_t r = 0; r < rows.size(); ++r)
        if (rows[r].size() != width)
            throw SchemaError("csv: ragged row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                              " cells, expected " + std::to_string(width));
    if (!has_header)
        for (std::size_t c = 0; c < width; ++c) header.push_back("x" + std::to_string(c));

    std::optional<std::size_t> label_idx;
    if (label_column) {
        if (const auto* name = std::get_if<std::string>(&*label_column)) {
            const auto it = std::find(header.begin(), header.end(), *name);
            if (it == header.end()) throw SchemaError("csv: label column '" + *name + "' not found");
            label_idx = static_cast<std::size_t>(it - header.begin());
        } else {
            label_idx = std::get<std::size_t>(*label_column);
            if (*label_idx >= width) throw SchemaError("csv: label column index out of range");
        }
    }

    std::vector<std::vector<std::string>> kept;
    std::size_t dropped = 0;
    for (auto& r : rows) {
        if (std::any_of(r.begin(), r.end(), is_missing))
            ++dropped;
        else
            kept.push_back(std::move(r));
    }
    if (dropped > 0) warn("csv: dropped " + std::to_string(dropped) + " row(s) with missing values");
    if (kept.empty()) throw SchemaError("csv: no complete rows");

    // Column plan: numeric -> 1 output, categorical -> one output per level.
    struct Plan {
        std::size_t column;
        bool numeric;
        std::vector<std::string> levels;
    };
    std::vector<Plan> plans;
    for (std::size_t c = 0; c < width; ++c) {
        if (label_idx && c == *label_idx) continue;
        Plan p{c, true, {}};
        for (const auto& r : kept)
            if (!parse_number(r[c])) {
                p.numeric = false;
                break;
            }
        if (!p.numeric)
            for (const auto& r : kept)
                if (std::find(p.levels.begin(), p.levels.end(), r[c]) == p.levels.end()) p.levels.push_back(r[c]);
        plans.push_back(std::move(p));
    }

    Dataset ds;
    ds.dropped_rows = dropped;
    Eigen::Index dim = 0;
    for (const auto& p : plans) {
        if (p.numeric) {
            ds.feature_names.push_back(header[p.column]);
            ++dim;
        } else {
            for (const auto& lvl : p.levels) ds.feature_names.push_back(header[p.column] + "=" + lvl);
            dim += static_cast<Eigen::Index>(p.levels.size());
        }
    }
    if (dim == 0) throw SchemaError("csv: no feature columns");
    ds.X.resize(static_cast<Eigen::Index>(kept.size()), dim);
    for (std::size_t r = 0; r < kept.size(); ++r) {
        Eigen::Index j = 0;
        for (const auto& p : plans) {
            if (p.numeric) {
                ds.X(static_cast<Eigen::Index>(r), j++) = *parse_number(kept[r][p.column]);
            } else {
                for (const auto& lvl : p.levels) ds.X(static_cast<Eigen::Index>(r), j++) = kept[r][p.column] == lvl ? 1.0 : 0.0;
            }
        }
    }
    if (label_idx) {
        ds.y.emplace();
        std::map<std::string, int> codes;
        for (const auto& r : kept) {
            const auto& v = r[*label_idx];
            auto it = codes.find(v);
            if (it == codes.end()) {
                it = codes.emplace(v, static_cast<int>(ds.class_names.size())).first;
                ds.class_names.push_back(v);
            }
            ds.y->push_back(it->second);
        }
    }
    return ds;
}

Dataset load_csv(const std::filesystem::path& path, bool has_header, std::optional<ColumnRef> label_column) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), has_header, std::move(label_column));
}

Matrix Standardizer::apply(const Eigen::Ref<const Matrix>& X) const {
    if (X.cols() != input_dim) throw DimensionMismatch("standardizer: column count differs from fit");
    Matrix out(X.rows(), output_dim());
    for (Eigen::Index k = 0; k < output_dim(); ++k)
        out.col(k) = (X.col(kept[static_cast<std::size_t>(k)]).array() - mean(k)) / scale(k);
    return out;
}

Vector Standardizer::apply_one(const Vector& x) const {
    if (x.size() != input_dim) throw DimensionMismatch("standardizer: sample dimension differs from fit");
    Vector out(output_dim());
    for (Eigen::Index k = 0; k < output_dim(); ++k) out(k) = (x(kept[static_cast<std::size_t>(k)]) - mean(k)) / scale(k);
    return out;
}

StatsSummary Standardizer::transform(const StatsSummary& s) const {
    StatsSummary out(output_dim());
    out.count = s.count;
    for (Eigen::Index k = 0; k < output_dim(); ++k) {
        const auto j = kept[static_cast<std::size_t>(k)];
        out.mean(k) = (s.mean(j) - mean(k)) / scale(k);
        out.m2(k) = s.m2(j) / (scale(k) * scale(k));
    }
    return out;
}

Standardizer fit_standardizer(const StatsSummary& stats) {
    if (stats.count < 2) throw InvalidArgument("standardizer needs at least two samples");
    const Vector var = stats.variance();
    Standardizer s;
    s.input_dim = stats.dim();
    std::vector<double> means, scales;
    for (Eigen::Index j = 0; j < var.size(); ++j) {
        if (var(j) > 0.0) {
            s.kept.push_back(j);
            means.push_back(stats.mean(j));
            scales.push_back(std::sqrt(var(j)));
        } else {
            warn("feature " + std::to_string(j) + " is constant and was dropped");
        }
    }
    if (s.kept.empty()) throw InvalidArgument("every feature is constant");
    s.mean = Eigen::Map<Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
    s.scale = Eigen::Map<Vector>(scales.data(), static_cast<Eigen::Index>(scales.size()));
    return s;
}

Matrix zscore(const Eigen::Ref<const Matrix>& X, const StatsSummary& stats) { return fit_standardizer(stats).apply(X); }

std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed, const std::vector<int>* labels) {
    if (k < 2) throw InvalidArgument("kfold: K must be at least 2");
    if (n < k) throw InvalidArgument("kfold: fewer samples than folds");
    if (labels && labels->size() != n) throw DimensionMismatch("kfold: label count differs from n");
    std::mt19937_64 rng(seed);

    std::vector<std::size_t> order;
    bool stratified = false;
    if (labels) {
        std::map<int, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < n; ++i) groups[(*labels)[i]].push_back(i);
        stratified = std::all_of(groups.begin(), groups.end(), [&](const auto& g) { return g.second.size() >= k; });
        if (stratified) {
            for (auto& [cls, idx] : groups) {
                std::shuffle(idx.begin(), idx.end(), rng);
                order.insert(order.end(), idx.begin(), idx.end());
            }
        } else {
            warn("kfold: a class has fewer than K samples; falling back to unstratified folds");
        }
    }
    if (!stratified) {
        order.resize(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
    }

    std::vector<Fold> folds(k);
    std::vector<std::size_t> assignment(n);
    for (std::size_t pos = 0; pos < n; ++pos) assignment[order[pos]] = pos % k;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < k; ++f) (assignment[i] == f ? folds[f].test : folds[f].train).push_back(i);
    return folds;
}

std::string fnv1a64_hex(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error("cannot open manifest '" + manifest_path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("manifest: ") + e.what());
    }
    std::vector<ManifestEntry> out;
    for (const auto& [name, entry] : j.items()) {
        if (!entry.contains("path") || entry["path"].is_null()) continue;
        ManifestEntry m;
        m.name = name;
        m.path = manifest_path.parent_path() / entry.at("path").get<std::string>();
        m.label_column = entry.value("label_column", "");
        m.checksum = entry.value("checksum_fnv1a64", "");
        m.kind = entry.value("kind", "");
        out.push_back(std::move(m));
    }
    return out;
}

Dataset load_bundled(const std::filesystem::path& data_dir, const std::string& name) {
    for (const auto& e : read_manifest(data_dir / "manifest.json")) {
        if (e.name != name) continue;
        std::ifstream in(e.path, std::ios::binary);
        if (!in) throw Error("cannot open '" + e.path.string() + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string text = buf.str();
        if (!e.checksum.empty() && fnv1a64_hex(text) != e.checksum)
            throw SchemaError("dataset '" + name + "' checksum mismatch");
        std::optional<ColumnRef> label;
        if (!e.label_column.empty()) label = ColumnRef{e.label_column};
        return parse_csv(text, true, label);
    }
    throw Error("dataset '" + name + "' is not in the manifest");
}

std::optional<TunedDefaults> read_tuned_defaults(const std::filesystem::path& data_dir, const std::string& name) {
    const auto table = data_dir / "defaults.json";
    if (!std::filesystem::exists(table)) return std::nullopt;
    std::ifstream in(table);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(table.string() + ": " + e.what());
    }
    if (!j.contains(name)) return std::nullopt;
    const auto& d = j.at(name);
    TunedDefaults t;
    auto pick = [&](std::optional<double>& slot, const char* key) {
        if (d.contains(key)) slot = d.at(key).get<double>();
    };
    pick(t.n_r, "n_r");
    pick(t.kappa_m, "kappa_m");
    pick(t.kappa_v, "kappa_v");
    pick(t.kappa_f, "kappa_f");
    if (d.contains("kappa_n")) t.kappa_n = d.at("kappa_n").get<std::int64_t>();
    return t;
}

}  // namespace fedevo
