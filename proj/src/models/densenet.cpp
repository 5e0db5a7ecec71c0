#include "psm/models/densenet.hpp"

#include <cmath>

#include "psm/rng.hpp"
#include "psm/util.hpp"

namespace psm {

namespace {

double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

double bce_from_logit(double s, int y) {
    return std::max(s, 0.0) - s * static_cast<double>(y) + std::log1p(std::exp(-std::abs(s)));
}

enum class Act { relu, logistic };

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Act act) {
    if (act == Act::relu) return z.cwiseMax(0.0);
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

Eigen::MatrixXd activate_grad(const Eigen::MatrixXd& z, const Eigen::MatrixXd& a, Act act) {
    if (act == Act::relu) {
        return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    }
    return a.cwiseProduct(Eigen::MatrixXd::Ones(a.rows(), a.cols()) - a);
}

struct LayerCache {
    Eigen::MatrixXd input;
    Eigen::MatrixXd z;
    Eigen::MatrixXd a;     // post-activation, post-dropout
    Eigen::MatrixXd grad;  // activation derivative at z
    Eigen::MatrixXd mask;  // empty when dropout off
};

// Number of layers in each block given the spec.
struct Layout {
    std::size_t side;  // per side stack
    std::size_t head;
    std::size_t relu_first() const { return 0; }
    std::size_t sig_first() const { return side; }
    std::size_t head_first() const { return 2 * side; }
    std::size_t output() const { return 2 * side + head; }
    std::size_t total() const { return 2 * side + head + 1; }
};

Layout layout_of(const DenseNetSpec& spec) {
    return {spec.side_widths.size(), spec.head_widths.size()};
}

Eigen::MatrixXd run_block(const DenseNetParams& p, std::size_t first, std::size_t count, Act act,
                          const Eigen::MatrixXd& input, std::vector<LayerCache>* caches,
                          bool dropout_on, double rate, Rng* rng) {
    Eigen::MatrixXd h = input;
    for (std::size_t l = 0; l < count; ++l) {
        const auto& w = p.w[first + l];
        const auto& b = p.b[first + l];
        LayerCache c;
        c.input = h;
        c.z = (h * w.transpose()).rowwise() + b.transpose();
        Eigen::MatrixXd a = activate(c.z, act);
        c.grad = activate_grad(c.z, a, act);
        if (dropout_on && rate > 0.0) {
            c.mask.resize(a.rows(), a.cols());
            const double keep = 1.0 - rate;
            for (Eigen::Index r = 0; r < a.rows(); ++r) {
                for (Eigen::Index cc = 0; cc < a.cols(); ++cc) {
                    c.mask(r, cc) = rng->next_double() >= rate ? 1.0 / keep : 0.0;
                }
            }
            a = a.cwiseProduct(c.mask);
        }
        c.a = a;
        h = a;
        if (caches) caches->push_back(std::move(c));
    }
    return h;
}

// Backward through one block; returns gradient w.r.t. the block input.
Eigen::MatrixXd back_block(const DenseNetParams& p, std::size_t first, std::size_t count,
                           const std::vector<LayerCache>& caches, std::size_t cache_first,
                           Eigen::MatrixXd dout, DenseNetParams& grad) {
    for (std::size_t l = count; l-- > 0;) {
        const auto& c = caches[cache_first + l];
        if (c.mask.size() > 0) dout = dout.cwiseProduct(c.mask);
        Eigen::MatrixXd dz = dout.cwiseProduct(c.grad);
        grad.w[first + l] += dz.transpose() * c.input;
        grad.b[first + l] += dz.colwise().sum().transpose();
        dout = dz * p.w[first + l];
    }
    return dout;
}

struct ForwardResult {
    Eigen::VectorXd logits;
    std::vector<LayerCache> relu_c, sig_c, head_c;
    Eigen::MatrixXd concat;
    Eigen::MatrixXd head_out;
};

ForwardResult forward(const DenseNetParams& p, const DenseNetSpec& spec, const Eigen::MatrixXd& x,
                      bool dropout_on, Rng* rng) {
    const Layout lay = layout_of(spec);
    ForwardResult f;
    const Eigen::MatrixXd ha = run_block(p, lay.relu_first(), lay.side, Act::relu, x, &f.relu_c,
                                         dropout_on, spec.dropout, rng);
    const Eigen::MatrixXd hb = run_block(p, lay.sig_first(), lay.side, Act::logistic, x, &f.sig_c,
                                         dropout_on, spec.dropout, rng);
    if (lay.side > 0) {
        f.concat.resize(x.rows(), x.cols() + ha.cols() + hb.cols());
        f.concat << x, ha, hb;
    } else {
        f.concat = x;
    }
    f.head_out = run_block(p, lay.head_first(), lay.head, Act::relu, f.concat, &f.head_c,
                           dropout_on, spec.dropout, rng);
    const auto& wo = p.w[lay.output()];
    f.logits = (f.head_out * wo.transpose()).col(0) + Eigen::VectorXd::Constant(x.rows(),
                                                                               p.b[lay.output()](0));
    return f;
}

double loss_and_backward(const DenseNetParams& p, const DenseNetSpec& spec,
                         const Eigen::MatrixXd& x, const std::vector<int>& y,
                         const std::vector<double>& w, bool dropout_on, Rng* rng,
                         DenseNetParams* grad) {
    const Layout lay = layout_of(spec);
    ForwardResult f = forward(p, spec, x, dropout_on, rng);

    double wsum = 0.0;
    for (double ww : w) wsum += ww;
    double loss = 0.0;
    Eigen::VectorXd dlogit(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto ii = static_cast<std::size_t>(i);
        loss += w[ii] * bce_from_logit(f.logits(i), y[ii]);
        dlogit(i) = w[ii] * (sigmoid(f.logits(i)) - static_cast<double>(y[ii])) / wsum;
    }
    loss /= wsum;
    if (!grad) return loss;

    grad->w.assign(p.w.size(), {});
    grad->b.assign(p.b.size(), {});
    for (std::size_t l = 0; l < p.w.size(); ++l) {
        grad->w[l] = Eigen::MatrixXd::Zero(p.w[l].rows(), p.w[l].cols());
        grad->b[l] = Eigen::VectorXd::Zero(p.b[l].size());
    }

    grad->w[lay.output()] += dlogit.transpose() * f.head_out;
    grad->b[lay.output()](0) += dlogit.sum();
    Eigen::MatrixXd dhead = dlogit * p.w[lay.output()];

    Eigen::MatrixXd dconcat =
        back_block(p, lay.head_first(), lay.head, f.head_c, 0, std::move(dhead), *grad);

    if (lay.side > 0) {
        const auto d = x.cols();
        const auto wa = f.relu_c.back().a.cols();
        Eigen::MatrixXd da = dconcat.middleCols(d, wa);
        Eigen::MatrixXd db = dconcat.middleCols(d + wa, dconcat.cols() - d - wa);
        back_block(p, lay.relu_first(), lay.side, f.relu_c, 0, std::move(da), *grad);
        back_block(p, lay.sig_first(), lay.side, f.sig_c, 0, std::move(db), *grad);
    }
    return loss;
}

struct AdamState {
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
    int t = 0;

    explicit AdamState(const DenseNetParams& p) {
        for (const auto& w : p.w) {
            mw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
            vw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
        }
        for (const auto& b : p.b) {
            mb.push_back(Eigen::VectorXd::Zero(b.size()));
            vb.push_back(Eigen::VectorXd::Zero(b.size()));
        }
    }
};

void optimizer_step(DenseNetParams& p, const DenseNetParams& g, AdamState& st, bool adagrad,
                    double lr) {
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++st.t;
    for (std::size_t l = 0; l < p.w.size(); ++l) {
        if (adagrad) {
            st.vw[l] += g.w[l].cwiseProduct(g.w[l]);
            st.vb[l] += g.b[l].cwiseProduct(g.b[l]);
            p.w[l] -= lr * g.w[l].cwiseQuotient(
                               (st.vw[l].array().sqrt() + eps).matrix());
            p.b[l] -= lr * g.b[l].cwiseQuotient(
                               (st.vb[l].array().sqrt() + eps).matrix());
            continue;
        }
        st.mw[l] = beta1 * st.mw[l] + (1.0 - beta1) * g.w[l];
        st.vw[l] = beta2 * st.vw[l] + (1.0 - beta2) * g.w[l].cwiseProduct(g.w[l]);
        st.mb[l] = beta1 * st.mb[l] + (1.0 - beta1) * g.b[l];
        st.vb[l] = beta2 * st.vb[l] + (1.0 - beta2) * g.b[l].cwiseProduct(g.b[l]);
        const double bc1 = 1.0 - std::pow(beta1, st.t);
        const double bc2 = 1.0 - std::pow(beta2, st.t);
        p.w[l] -= lr * (st.mw[l] / bc1)
                      .cwiseQuotient(((st.vw[l] / bc2).array().sqrt() + eps).matrix());
        p.b[l] -= lr * (st.mb[l] / bc1)
                      .cwiseQuotient(((st.vb[l] / bc2).array().sqrt() + eps).matrix());
    }
}

}  // namespace

std::size_t DenseNetParams::scalar_count() const {
    std::size_t n = 0;
    for (const auto& m : w) n += static_cast<std::size_t>(m.size());
    for (const auto& v : b) n += static_cast<std::size_t>(v.size());
    return n;
}

DenseNetParams densenet_init(const DenseNetSpec& spec, int input_dim) {
    if (spec.dropout < 0.0 || spec.dropout >= 1.0) {
        throw ParameterError("dropout must lie in [0,1)");
    }
    if (spec.optimizer != "adam" && spec.optimizer != "adagrad") {
        throw ParameterError("optimizer must be adam or adagrad");
    }
    Rng rng(spec.seed);
    DenseNetParams p;
    auto add_layer = [&](int in, int out) {
        Eigen::MatrixXd w(out, in);
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                w(r, c) = (2.0 * rng.next_double() - 1.0) * limit;
            }
        }
        p.w.push_back(std::move(w));
        p.b.push_back(Eigen::VectorXd::Zero(out));
    };

    for (int block = 0; block < 2; ++block) {
        int in = input_dim;
        for (int width : spec.side_widths) {
            add_layer(in, width);
            in = width;
        }
    }
    int concat = input_dim + (spec.side_widths.empty() ? 0 : 2 * spec.side_widths.back());
    int in = concat;
    for (int width : spec.head_widths) {
        add_layer(in, width);
        in = width;
    }
    add_layer(in, 1);
    return p;
}

double densenet_loss_grad(const DenseNetParams& params, const DenseNetSpec& spec,
                          const Eigen::MatrixXd& x, const std::vector<int>& y,
                          const std::vector<double>& w, DenseNetParams* grad) {
    return loss_and_backward(params, spec, x, y, w, /*dropout_on=*/false, nullptr, grad);
}

std::unique_ptr<Model> train_densenet(const Table& features, const std::vector<int>& labels,
                                      const std::vector<double>& sample_weights,
                                      const ClassWeights& class_weights, const DenseNetSpec& spec) {
    if (features.size() != labels.size()) throw DataError("features/labels size mismatch");
    bool has_pos = false, has_neg = false;
    for (int y : labels) (y ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) throw DataError("training requires both classes");
    if (spec.batch_size < 1 || spec.epochs < 0) throw ParameterError("bad densenet spec");

    auto model = std::make_unique<DenseNetModel>();
    auto view = canonicalize(features, nullptr);
    model->columns_ = view.columns;
    model->spec_ = spec;

    std::vector<double> w(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double sw = sample_weights.empty() ? 1.0 : sample_weights[i];
        w[i] = sw * (labels[i] ? class_weights.pos : class_weights.neg);
    }
    standardize_columns_inplace(view.x, w, model->mean_, model->stddev_);

    DenseNetParams params = densenet_init(spec, static_cast<int>(view.x.cols()));
    AdamState state(params);
    const bool adagrad = spec.optimizer == "adagrad";
    Rng rng(mix_seed(spec.seed, 0x5eed));

    const std::size_t n = labels.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    DenseNetParams grad;
    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(spec.batch_size)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(spec.batch_size));
            const auto m = static_cast<Eigen::Index>(stop - start);
            Eigen::MatrixXd xb(m, view.x.cols());
            std::vector<int> yb(static_cast<std::size_t>(m));
            std::vector<double> wb(static_cast<std::size_t>(m));
            for (Eigen::Index r = 0; r < m; ++r) {
                const std::size_t src = order[start + static_cast<std::size_t>(r)];
                xb.row(r) = view.x.row(static_cast<Eigen::Index>(src));
                yb[static_cast<std::size_t>(r)] = labels[src];
                wb[static_cast<std::size_t>(r)] = w[src];
            }
            const double loss =
                loss_and_backward(params, spec, xb, yb, wb, /*dropout_on=*/true, &rng, &grad);
            if (!std::isfinite(loss)) {
                throw DataError("densenet training diverged (non-finite loss at epoch " +
                                format_int(epoch) + ")");
            }
            optimizer_step(params, grad, state, adagrad, spec.lr);
        }
    }

    model->params_ = std::move(params);
    return model;
}

std::vector<double> DenseNetModel::predict_positive(const Table& features) const {
    auto view = canonicalize(features, &columns_);
    for (Eigen::Index c = 0; c < view.x.cols(); ++c) {
        const auto cc = static_cast<std::size_t>(c);
        for (Eigen::Index r = 0; r < view.x.rows(); ++r) {
            view.x(r, c) =
                stddev_[cc] > 0.0 ? (view.x(r, c) - mean_[cc]) / stddev_[cc] : 0.0;
        }
    }
    ForwardResult f = forward(params_, spec_, view.x, /*dropout_on=*/false, nullptr);
    std::vector<double> out(static_cast<std::size_t>(f.logits.size()));
    for (Eigen::Index i = 0; i < f.logits.size(); ++i) {
        out[static_cast<std::size_t>(i)] = sigmoid(f.logits(i));
    }
    return out;
}

void DenseNetModel::save(std::ostream& out) const {
    BinWriter w(out);
    w.str_vec(columns_);
    w.u64(spec_.side_widths.size());
    for (int v : spec_.side_widths) w.i64(v);
    w.u64(spec_.head_widths.size());
    for (int v : spec_.head_widths) w.i64(v);
    w.f64(spec_.dropout);
    w.str(spec_.optimizer);
    w.f64(spec_.lr);
    w.i64(spec_.epochs);
    w.i64(spec_.batch_size);
    w.u64(spec_.seed);
    w.f64_vec(mean_);
    w.f64_vec(stddev_);
    w.u64(params_.w.size());
    for (std::size_t l = 0; l < params_.w.size(); ++l) {
        w.u64(static_cast<std::uint64_t>(params_.w[l].rows()));
        w.u64(static_cast<std::uint64_t>(params_.w[l].cols()));
        for (Eigen::Index r = 0; r < params_.w[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < params_.w[l].cols(); ++c) w.f64(params_.w[l](r, c));
        }
        for (Eigen::Index r = 0; r < params_.b[l].size(); ++r) w.f64(params_.b[l](r));
    }
}

std::unique_ptr<DenseNetModel> DenseNetModel::load(BinReader& r) {
    auto m = std::make_unique<DenseNetModel>();
    m->columns_ = r.str_vec();
    m->spec_.side_widths.resize(r.u64());
    for (auto& v : m->spec_.side_widths) v = static_cast<int>(r.i64());
    m->spec_.head_widths.resize(r.u64());
    for (auto& v : m->spec_.head_widths) v = static_cast<int>(r.i64());
    m->spec_.dropout = r.f64();
    m->spec_.optimizer = r.str();
    m->spec_.lr = r.f64();
    m->spec_.epochs = static_cast<int>(r.i64());
    m->spec_.batch_size = static_cast<int>(r.i64());
    m->spec_.seed = r.u64();
    m->mean_ = r.f64_vec();
    m->stddev_ = r.f64_vec();
    const auto layers = r.u64();
    m->params_.w.resize(layers);
    m->params_.b.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        const auto rows = static_cast<Eigen::Index>(r.u64());
        const auto cols = static_cast<Eigen::Index>(r.u64());
        m->params_.w[l].resize(rows, cols);
        for (Eigen::Index rr = 0; rr < rows; ++rr) {
            for (Eigen::Index cc = 0; cc < cols; ++cc) m->params_.w[l](rr, cc) = r.f64();
        }
        m->params_.b[l].resize(rows);
        for (Eigen::Index rr = 0; rr < rows; ++rr) m->params_.b[l](rr) = r.f64();
    }
    return m;
}

}  // namespace psm
