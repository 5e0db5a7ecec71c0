#include "psm/csv.hpp"

#include <fstream>

#include <json.hpp>

#include "psm/util.hpp"

namespace psm {

using nlohmann::json;

int Table::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) return static_cast<int>(i);
    }
    return -1;
}

void Table::add_row(std::string key, std::vector<double> values) {
    if (values.size() != columns.size()) {
        throw DataError("row width mismatch for key " + key);
    }
    keys.push_back(std::move(key));
    rows.push_back(std::move(values));
}

void write_table(const std::string& path, const Table& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << table.key_name;
    for (const auto& c : table.columns) out << ',' << c;
    out << '\n';
    for (std::size_t r = 0; r < table.keys.size(); ++r) {
        out << table.keys[r];
        for (double v : table.rows[r]) out << ',' << format_double(v);
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

Table read_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty table: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split(line, ',');
    if (header.empty()) throw DataError("missing header: " + path);
    t.key_name = header[0];
    t.columns.assign(header.begin() + 1, header.end());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != header.size()) {
            throw DataError(path + ":" + format_int(static_cast<std::int64_t>(line_no)) +
                            ": expected " + format_int(static_cast<std::int64_t>(header.size())) +
                            " fields, got " + format_int(static_cast<std::int64_t>(fields.size())));
        }
        std::vector<double> vals(fields.size() - 1);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            if (!parse_double(fields[i], vals[i - 1])) {
                throw DataError(path + ":" + format_int(static_cast<std::int64_t>(line_no)) +
                                ": bad number '" + fields[i] + "'");
            }
        }
        t.keys.push_back(fields[0]);
        t.rows.push_back(std::move(vals));
    }
    return t;
}

void write_meta(const std::string& artifact_path, const ArtifactMeta& meta) {
    json j;
    j["format_version"] = meta.format_version;
    j["kind"] = meta.kind;
    if (!meta.index_fingerprint.empty()) j["index_fingerprint"] = meta.index_fingerprint;
    j["input_fingerprint"] = meta.input_fingerprint;
    j["params"] = meta.params;
    std::ofstream out(artifact_path + ".meta.json", std::ios::binary);
    if (!out) throw DataError("cannot write meta for " + artifact_path);
    out << j.dump(2) << '\n';
}

std::optional<ArtifactMeta> read_meta(const std::string& artifact_path) {
    std::ifstream in(artifact_path + ".meta.json", std::ios::binary);
    if (!in) return std::nullopt;
    json j;
    try {
        in >> j;
    } catch (const json::exception&) {
        return std::nullopt;
    }
    ArtifactMeta m;
    m.format_version = j.value("format_version", 0);
    m.kind = j.value("kind", "");
    m.index_fingerprint = j.value("index_fingerprint", "");
    m.input_fingerprint = j.value("input_fingerprint", "");
    if (j.contains("params")) {
        for (auto& [k, v] : j["params"].items()) m.params[k] = v.get<std::string>();
    }
    return m;
}

std::vector<LabeledUser> read_labels_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open labels file " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty labels file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split(line, ',');
    if (header.size() != 2 || trim(header[0]) != "user_id" || trim(header[1]) != "label") {
        throw DataError(path + ": expected header user_id,label");
    }
    std::vector<LabeledUser> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != 2) {
            throw DataError(path + ":" + format_int(static_cast<std::int64_t>(line_no)) +
                            ": expected user_id,label");
        }
        std::string label{trim(fields[1])};
        if (label != "psm" && label != "normal") {
            throw DataError(path + ":" + format_int(static_cast<std::int64_t>(line_no)) +
                            ": label must be psm or normal, got '" + label + "'");
        }
        out.push_back({std::string(trim(fields[0])), label == "psm"});
    }
    return out;
}

void write_labels_csv(const std::string& path, const std::vector<LabeledUser>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "user_id,label\n";
    for (const auto& l : labels) out << l.user << ',' << (l.positive ? "psm" : "normal") << '\n';
}

std::vector<std::pair<std::string, double>> read_scores_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open scores file " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty scores file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split(line, ',');
    if (header.size() < 2 || trim(header[0]) != "user_id") {
        throw DataError(path + ": expected header user_id,score");
    }
    std::vector<std::pair<std::string, double>> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split(line, ',');
        double v = 0.0;
        if (fields.size() < 2 || !parse_double(fields[1], v)) {
            throw DataError(path + ":" + format_int(static_cast<std::int64_t>(line_no)) +
                            ": bad score row");
        }
        out.emplace_back(std::string(trim(fields[0])), v);
    }
    return out;
}

void write_scores_csv(const std::string& path,
                      const std::vector<std::pair<std::string, double>>& scores) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "user_id,score\n";
    for (const auto& [u, s] : scores) out << u << ',' << format_double(s) << '\n';
}

}  // namespace psm
