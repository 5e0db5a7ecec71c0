#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "psm/csv.hpp"
#include "psm/types.hpp"

namespace psm {

// Per-class multipliers applied on top of per-sample weights.
struct ClassWeights {
    double neg = 1.0;
    double pos = 1.0;
};

// Inverse class frequency: n / (2 * n_c).
ClassWeights balanced_class_weights(const std::vector<int>& labels);

// Feature rows mapped to the canonical (name-sorted) column order. Training
// always happens in this view, so column permutations of the input never
// change a model.
struct CanonicalView {
    std::vector<std::string> columns;
    Eigen::MatrixXd x;  // n x d
};

// expected == nullptr sorts the table's own columns; otherwise the table
// must contain exactly the expected columns (any order).
CanonicalView canonicalize(const Table& features, const std::vector<std::string>* expected);

// In-place per-column z-scoring (population std; zero-variance columns map
// to 0), reporting the statistics for reuse at prediction time. Weighted by
// the effective sample weights so that integer-weighted rows behave exactly
// like duplicated rows; pass an empty span for unit weights.
void standardize_columns_inplace(Eigen::MatrixXd& x, const std::vector<double>& weights,
                                 std::vector<double>& mean, std::vector<double>& stddev);

class Model {
public:
    virtual ~Model() = default;
    virtual std::string kind() const = 0;
    virtual const std::vector<std::string>& schema() const = 0;

    // P(positive) per row; columns are matched by name against the training
    // schema and a mismatch throws.
    virtual std::vector<double> predict_positive(const Table& features) const = 0;

    virtual void save(std::ostream& out) const = 0;
};

// [p(negative), p(positive)] per row; the two always sum to 1.
std::vector<std::array<double, 2>> predict_confidence(const Model& model, const Table& features);

void save_model(const std::string& path, const Model& model);
std::unique_ptr<Model> load_model(const std::string& path);
std::unique_ptr<Model> load_model_stream(std::istream& in);

// Factory over the three model kinds (lr | rf | dnn). config_json may be
// empty for defaults; the explicit seed wins over any seed in the config.
std::unique_ptr<Model> train_model(const std::string& kind, const std::string& config_json,
                                   const Table& features, const std::vector<int>& labels,
                                   const std::vector<double>& sample_weights,
                                   const ClassWeights& class_weights, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Binary container primitives (versioned, little-endian, byte-stable)
// ---------------------------------------------------------------------------

class BinWriter {
public:
    explicit BinWriter(std::ostream& out) : out_(out) {}
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i64(std::int64_t v);
    void f64(double v);
    void str(const std::string& s);
    void f64_vec(const std::vector<double>& v);
    void str_vec(const std::vector<std::string>& v);

private:
    std::ostream& out_;
};

class BinReader {
public:
    explicit BinReader(std::istream& in) : in_(in) {}
    std::uint32_t u32();
    std::uint64_t u64();
    std::int64_t i64();
    double f64();
    std::string str();
    std::vector<double> f64_vec();
    std::vector<std::string> str_vec();

private:
    std::istream& in_;
};

}  // namespace psm
