#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psm/types.hpp"

namespace psm {

// Rectangular numeric table with one leading string key column. This is the
// shape of every metric CSV the toolkit reads and writes.
struct Table {
    std::string key_name = "user_id";
    std::vector<std::string> columns;
    std::vector<std::string> keys;
    std::vector<std::vector<double>> rows;

    std::size_t width() const { return columns.size(); }
    std::size_t size() const { return keys.size(); }

    int column_index(const std::string& name) const;
    void add_row(std::string key, std::vector<double> values);
};

void write_table(const std::string& path, const Table& table);
Table read_table(const std::string& path);

// Sidecar metadata written next to every artifact (<path>.meta.json).
// Carries the fingerprint of the inputs that produced the artifact so that
// downstream stages can detect mismatched or stale inputs.
struct ArtifactMeta {
    int format_version = 1;
    std::string kind;
    std::string index_fingerprint;  // fingerprint of the cascade index, when derived from one
    std::string input_fingerprint;  // combined fingerprint of inputs + parameters
    std::map<std::string, std::string> params;
};

void write_meta(const std::string& artifact_path, const ArtifactMeta& meta);
std::optional<ArtifactMeta> read_meta(const std::string& artifact_path);

// Binary labels file: CSV with header user_id,label and label in {psm,normal}.
struct LabeledUser {
    std::string user;
    bool positive;
};

std::vector<LabeledUser> read_labels_csv(const std::string& path);
void write_labels_csv(const std::string& path, const std::vector<LabeledUser>& labels);

// Scores file: CSV with header user_id,score.
std::vector<std::pair<std::string, double>> read_scores_csv(const std::string& path);
void write_scores_csv(const std::string& path,
                      const std::vector<std::pair<std::string, double>>& scores);

}  // namespace psm
