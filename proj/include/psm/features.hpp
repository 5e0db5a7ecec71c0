#pragma once

#include <string>
#include <vector>

#include "psm/csv.hpp"
#include "psm/types.hpp"

namespace psm {

// Assembled per-user feature matrix: the causal, bipartite and user-graph
// tables joined on user. Users missing from a source get zero-filled
// columns plus a cleared presence flag. Row order is sorted by user id, so
// the join is independent of input row order.
struct FeatureMatrix {
    Table table;
    std::string index_fingerprint;

    // Order-insensitive hash over the column-name set; models use it to
    // detect schema mismatches while tolerating column permutations.
    std::uint64_t schema_fingerprint() const;
};

FeatureMatrix assemble_tables(const Table& causal, const Table& bipartite, const Table& usergraph,
                              const std::string& fp_causal, const std::string& fp_bipartite,
                              const std::string& fp_usergraph);

// Reads the three CSVs plus their .meta.json sidecars and checks that all
// carry the same index fingerprint.
FeatureMatrix assemble_files(const std::string& causal_path, const std::string& bipartite_path,
                             const std::string& usergraph_path);

void write_features(const std::string& path, const FeatureMatrix& matrix);
FeatureMatrix read_features(const std::string& path);

// Named column subsets. "top10" is the strongest-feature shortlist; "causal"
// keeps only the causality block; "all" is the identity.
std::vector<std::string> feature_selection(const std::string& name);
FeatureMatrix select_columns(const FeatureMatrix& matrix, const std::vector<std::string>& cols);

struct StandardizeStats {
    std::vector<std::string> columns;
    std::vector<double> mean;
    std::vector<double> stddev;  // population
};

// Z-scores every column. When `given` is null the statistics are computed
// from the matrix itself (training set) and reported through `out`;
// zero-variance columns map to 0.
Table standardize(const Table& table, const StandardizeStats* given = nullptr,
                  StandardizeStats* out = nullptr);

void save_standardize_stats(const std::string& path, const StandardizeStats& stats);
StandardizeStats load_standardize_stats(const std::string& path);

}  // namespace psm
