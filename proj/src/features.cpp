#include "psm/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "psm/util.hpp"

namespace psm {

using nlohmann::json;

std::uint64_t FeatureMatrix::schema_fingerprint() const {
    std::vector<std::string> sorted = table.columns;
    std::sort(sorted.begin(), sorted.end());
    Fnv1a h;
    h.update("psm-schema-v1");
    for (const auto& c : sorted) {
        h.update(c);
        h.update("\x1f");
    }
    return h.digest();
}

namespace {

void check_unique_keys(const Table& t, const char* which) {
    std::unordered_set<std::string> seen;
    for (const auto& k : t.keys) {
        if (!seen.insert(k).second) {
            throw DataError(std::string("duplicate user row in ") + which + " input: " + k);
        }
    }
}

}  // namespace

FeatureMatrix assemble_tables(const Table& causal, const Table& bipartite, const Table& usergraph,
                              const std::string& fp_causal, const std::string& fp_bipartite,
                              const std::string& fp_usergraph) {
    if (fp_causal != fp_bipartite || fp_causal != fp_usergraph) {
        throw DataError("index fingerprint mismatch between feature sources");
    }
    check_unique_keys(causal, "causal");
    check_unique_keys(bipartite, "bipartite");
    check_unique_keys(usergraph, "usergraph");

    const Table* sources[3] = {&causal, &bipartite, &usergraph};
    const char* flags[3] = {"in_causal", "in_bipartite", "in_usergraph"};

    FeatureMatrix out;
    out.index_fingerprint = fp_causal;
    Table& t = out.table;
    t.key_name = "user_id";
    for (const Table* s : sources) {
        t.columns.insert(t.columns.end(), s->columns.begin(), s->columns.end());
    }
    for (const char* f : flags) t.columns.emplace_back(f);

    std::map<std::string, std::array<int, 3>> users;  // sorted union of keys
    for (int s = 0; s < 3; ++s) {
        for (std::size_t r = 0; r < sources[s]->size(); ++r) {
            auto [it, inserted] = users.try_emplace(sources[s]->keys[r],
                                                    std::array<int, 3>{-1, -1, -1});
            it->second[static_cast<std::size_t>(s)] = static_cast<int>(r);
        }
    }

    for (const auto& [user, rows] : users) {
        std::vector<double> row;
        row.reserve(t.columns.size());
        for (int s = 0; s < 3; ++s) {
            if (rows[static_cast<std::size_t>(s)] >= 0) {
                const auto& src =
                    sources[s]->rows[static_cast<std::size_t>(rows[static_cast<std::size_t>(s)])];
                row.insert(row.end(), src.begin(), src.end());
            } else {
                row.insert(row.end(), sources[s]->width(), 0.0);
            }
        }
        for (int s = 0; s < 3; ++s) {
            row.push_back(rows[static_cast<std::size_t>(s)] >= 0 ? 1.0 : 0.0);
        }
        for (double v : row) {
            if (!std::isfinite(v)) {
                throw DataError("non-finite feature value for user " + user);
            }
        }
        t.add_row(user, std::move(row));
    }
    return out;
}

FeatureMatrix assemble_files(const std::string& causal_path, const std::string& bipartite_path,
                             const std::string& usergraph_path) {
    auto fp_of = [](const std::string& path) -> std::string {
        auto meta = read_meta(path);
        if (!meta || meta->index_fingerprint.empty()) {
            throw DataError("missing index fingerprint sidecar for " + path);
        }
        return meta->index_fingerprint;
    };
    return assemble_tables(read_table(causal_path), read_table(bipartite_path),
                           read_table(usergraph_path), fp_of(causal_path), fp_of(bipartite_path),
                           fp_of(usergraph_path));
}

void write_features(const std::string& path, const FeatureMatrix& matrix) {
    write_table(path, matrix.table);
    json schema;
    schema["format_version"] = 1;
    schema["columns"] = matrix.table.columns;
    schema["schema_fingerprint"] = to_hex(matrix.schema_fingerprint());
    schema["index_fingerprint"] = matrix.index_fingerprint;
    std::ofstream out(path + ".schema.json", std::ios::binary);
    if (!out) throw DataError("cannot write schema sidecar for " + path);
    out << schema.dump(2) << '\n';

    ArtifactMeta meta;
    meta.kind = "feature_matrix";
    meta.index_fingerprint = matrix.index_fingerprint;
    meta.input_fingerprint = to_hex(matrix.schema_fingerprint());
    write_meta(path, meta);
}

FeatureMatrix read_features(const std::string& path) {
    FeatureMatrix m;
    m.table = read_table(path);
    if (auto meta = read_meta(path)) m.index_fingerprint = meta->index_fingerprint;
    return m;
}

std::vector<std::string> feature_selection(const std::string& name) {
    if (name == "all" || name.empty()) return {};
    if (name == "top10") {
        return {"eps_nb", "eps_wnb", "pagerank", "PS_med", "degree",
                "UvS_avg", "TS_med",  "TS_avg",  "CS_med", "COw"};
    }
    if (name == "causal") {
        return {"p_viral_given_key", "p_viral_given_key_defined",
                "eps_km",            "eps_km_defined",
                "eps_rel",           "eps_rel_defined",
                "eps_nb",            "eps_nb_defined",
                "eps_wnb",           "eps_wnb_defined",
                "related_count",     "prima_facie"};
    }
    throw UsageError("unknown feature selection: " + name + " (use all, top10 or causal)");
}

FeatureMatrix select_columns(const FeatureMatrix& matrix, const std::vector<std::string>& cols) {
    if (cols.empty()) return matrix;
    std::vector<int> idx;
    idx.reserve(cols.size());
    for (const auto& c : cols) {
        const int i = matrix.table.column_index(c);
        if (i < 0) throw DataError("selected column missing from feature matrix: " + c);
        idx.push_back(i);
    }
    FeatureMatrix out;
    out.index_fingerprint = matrix.index_fingerprint;
    out.table.key_name = matrix.table.key_name;
    out.table.columns = cols;
    out.table.keys = matrix.table.keys;
    out.table.rows.reserve(matrix.table.size());
    for (const auto& row : matrix.table.rows) {
        std::vector<double> r;
        r.reserve(idx.size());
        for (int i : idx) r.push_back(row[static_cast<std::size_t>(i)]);
        out.table.rows.push_back(std::move(r));
    }
    return out;
}

Table standardize(const Table& table, const StandardizeStats* given, StandardizeStats* out) {
    StandardizeStats local;
    const StandardizeStats* stats = given;
    if (!stats) {
        local.columns = table.columns;
        local.mean.assign(table.width(), 0.0);
        local.stddev.assign(table.width(), 0.0);
        const double n = static_cast<double>(table.size());
        if (table.size() > 0) {
            for (const auto& row : table.rows) {
                for (std::size_t c = 0; c < row.size(); ++c) local.mean[c] += row[c];
            }
            for (std::size_t c = 0; c < table.width(); ++c) local.mean[c] /= n;
            for (const auto& row : table.rows) {
                for (std::size_t c = 0; c < row.size(); ++c) {
                    const double d = row[c] - local.mean[c];
                    local.stddev[c] += d * d;
                }
            }
            for (std::size_t c = 0; c < table.width(); ++c) {
                local.stddev[c] = std::sqrt(local.stddev[c] / n);
            }
        }
        stats = &local;
    } else if (stats->columns != table.columns) {
        throw DataError("standardization stats do not match table columns");
    }

    Table z = table;
    for (auto& row : z.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            row[c] = stats->stddev[c] > 0.0 ? (row[c] - stats->mean[c]) / stats->stddev[c] : 0.0;
        }
    }
    if (out) *out = *stats;
    return z;
}

void save_standardize_stats(const std::string& path, const StandardizeStats& stats) {
    json j;
    j["format_version"] = 1;
    j["columns"] = stats.columns;
    j["mean"] = stats.mean;
    j["stddev"] = stats.stddev;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << '\n';
}

StandardizeStats load_standardize_stats(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("invalid stats file " + path);
    StandardizeStats s;
    s.columns = j.at("columns").get<std::vector<std::string>>();
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stddev = j.at("stddev").get<std::vector<double>>();
    return s;
}

}  // namespace psm
