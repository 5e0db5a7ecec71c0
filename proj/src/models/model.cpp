#include "psm/models/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>

#include "psm/models/densenet.hpp"
#include "psm/models/forest.hpp"
#include "psm/models/logistic.hpp"
#include "psm/util.hpp"

namespace psm {

ClassWeights balanced_class_weights(const std::vector<int>& labels) {
    double npos = 0.0, nneg = 0.0;
    for (int y : labels) (y ? npos : nneg) += 1.0;
    if (npos == 0.0 || nneg == 0.0) throw DataError("training requires both classes");
    const double n = npos + nneg;
    return {n / (2.0 * nneg), n / (2.0 * npos)};
}

CanonicalView canonicalize(const Table& features, const std::vector<std::string>* expected) {
    CanonicalView v;
    if (expected) {
        v.columns = *expected;
    } else {
        v.columns = features.columns;
        std::sort(v.columns.begin(), v.columns.end());
    }
    std::vector<int> src(v.columns.size());
    for (std::size_t c = 0; c < v.columns.size(); ++c) {
        const int i = features.column_index(v.columns[c]);
        if (i < 0) throw DataError("schema mismatch: missing feature column " + v.columns[c]);
        src[c] = i;
    }
    if (expected && features.width() != expected->size()) {
        throw DataError("schema mismatch: unexpected extra feature columns");
    }
    v.x.resize(static_cast<Eigen::Index>(features.size()),
               static_cast<Eigen::Index>(v.columns.size()));
    for (std::size_t r = 0; r < features.size(); ++r) {
        for (std::size_t c = 0; c < v.columns.size(); ++c) {
            const double val = features.rows[r][static_cast<std::size_t>(src[c])];
            if (!std::isfinite(val)) {
                throw DataError("non-finite feature value in column " + v.columns[c] +
                                " for user " + features.keys[r]);
            }
            v.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = val;
        }
    }
    return v;
}

void standardize_columns_inplace(Eigen::MatrixXd& x, const std::vector<double>& weights,
                                 std::vector<double>& mean, std::vector<double>& stddev) {
    const auto n = x.rows();
    const auto d = x.cols();
    mean.assign(static_cast<std::size_t>(d), 0.0);
    stddev.assign(static_cast<std::size_t>(d), 0.0);
    if (n == 0) return;
    auto w_of = [&](Eigen::Index r) {
        return weights.empty() ? 1.0 : weights[static_cast<std::size_t>(r)];
    };
    double wsum = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) wsum += w_of(r);
    for (Eigen::Index c = 0; c < d; ++c) {
        double m = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) m += w_of(r) * x(r, c);
        m /= wsum;
        double ss = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            const double dd = x(r, c) - m;
            ss += w_of(r) * dd * dd;
        }
        const double sd = std::sqrt(ss / wsum);
        mean[static_cast<std::size_t>(c)] = m;
        stddev[static_cast<std::size_t>(c)] = sd;
        for (Eigen::Index r = 0; r < n; ++r) {
            x(r, c) = sd > 0.0 ? (x(r, c) - m) / sd : 0.0;
        }
    }
}

std::vector<std::array<double, 2>> predict_confidence(const Model& model, const Table& features) {
    const auto pos = model.predict_positive(features);
    std::vector<std::array<double, 2>> out(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) out[i] = {1.0 - pos[i], pos[i]};
    return out;
}

// ---------------------------------------------------------------------------
// Container
// ---------------------------------------------------------------------------

namespace {
constexpr char kMagic[4] = {'P', 'S', 'M', 'M'};
constexpr std::uint32_t kFormatVersion = 1;
}  // namespace

void save_model(const std::string& path, const Model& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model " + path);
    out.write(kMagic, 4);
    BinWriter w(out);
    w.u32(kFormatVersion);
    w.str(model.kind());
    model.save(out);
    if (!out) throw DataError("model write failed: " + path);
}

std::unique_ptr<Model> load_model_stream(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a psm model file");
    BinReader r(in);
    const auto version = r.u32();
    if (version != kFormatVersion) throw DataError("unsupported model format version");
    const std::string kind = r.str();
    if (kind == "lr") return LogisticModel::load(r);
    if (kind == "rf") return ForestModel::load(r);
    if (kind == "dnn") return DenseNetModel::load(r);
    throw DataError("unknown model kind: " + kind);
}

std::unique_ptr<Model> load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model " + path);
    return load_model_stream(in);
}

// ---------------------------------------------------------------------------
// Binary primitives
// ---------------------------------------------------------------------------

void BinWriter::u32(std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char*>(buf), 4);
}

void BinWriter::u64(std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char*>(buf), 8);
}

void BinWriter::i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

void BinWriter::f64(double v) {
    std::uint64_t bits;
    __builtin_memcpy(&bits, &v, 8);
    u64(bits);
}

void BinWriter::str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinWriter::f64_vec(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
}

void BinWriter::str_vec(const std::vector<std::string>& v) {
    u64(v.size());
    for (const auto& s : v) str(s);
}

std::uint32_t BinReader::u32() {
    unsigned char buf[4];
    in_.read(reinterpret_cast<char*>(buf), 4);
    if (!in_) throw DataError("truncated model file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    return v;
}

std::uint64_t BinReader::u64() {
    unsigned char buf[8];
    in_.read(reinterpret_cast<char*>(buf), 8);
    if (!in_) throw DataError("truncated model file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

std::int64_t BinReader::i64() { return static_cast<std::int64_t>(u64()); }

double BinReader::f64() {
    const std::uint64_t bits = u64();
    double v;
    __builtin_memcpy(&v, &bits, 8);
    return v;
}

std::string BinReader::str() {
    const auto n = u64();
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw DataError("truncated model file");
    return s;
}

std::vector<double> BinReader::f64_vec() {
    const auto n = u64();
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
}

std::vector<std::string> BinReader::str_vec() {
    const auto n = u64();
    std::vector<std::string> v(n);
    for (auto& s : v) s = str();
    return v;
}

}  // namespace psm
