#include "psm/models/logistic.hpp"

#include <cmath>

#include "psm/util.hpp"

namespace psm {

namespace {

double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

// Numerically stable BCE from the logit.
double bce_from_logit(double s, int y) {
    return std::max(s, 0.0) - s * static_cast<double>(y) + std::log1p(std::exp(-std::abs(s)));
}

}  // namespace

double logistic_loss_grad(const Eigen::VectorXd& theta, const Eigen::MatrixXd& x,
                          const std::vector<int>& y, const std::vector<double>& w, double l2,
                          Eigen::VectorXd* grad) {
    const auto n = x.rows();
    const auto d = x.cols();
    const Eigen::VectorXd wv = theta.head(d);
    const double b = theta(d);

    double wsum = 0.0;
    for (double ww : w) wsum += ww;

    double loss = 0.0;
    if (grad) grad->setZero(d + 1);
    // explicit row loop: left-to-right accumulation keeps integer-weighted
    // runs bit-identical to their duplicated-row equivalents
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = x.row(i).dot(wv) + b;
        loss += w[static_cast<std::size_t>(i)] * bce_from_logit(s, y[static_cast<std::size_t>(i)]);
        if (grad) {
            const double dloss = w[static_cast<std::size_t>(i)] *
                                 (sigmoid(s) - static_cast<double>(y[static_cast<std::size_t>(i)])) /
                                 wsum;
            for (Eigen::Index c = 0; c < d; ++c) (*grad)(c) += dloss * x(i, c);
            (*grad)(d) += dloss;
        }
    }
    loss /= wsum;
    loss += 0.5 * l2 * wv.squaredNorm();
    if (grad) grad->head(d) += l2 * wv;
    return loss;
}

std::unique_ptr<Model> train_logistic(const Table& features, const std::vector<int>& labels,
                                      const std::vector<double>& sample_weights,
                                      const ClassWeights& class_weights,
                                      const LogisticConfig& config) {
    if (features.size() != labels.size()) throw DataError("features/labels size mismatch");
    bool has_pos = false, has_neg = false;
    for (int y : labels) (y ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) throw DataError("training requires both classes");

    auto model = std::make_unique<LogisticModel>();
    auto view = canonicalize(features, nullptr);
    model->columns_ = view.columns;

    std::vector<double> w(labels.size(), 1.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double sw = sample_weights.empty() ? 1.0 : sample_weights[i];
        w[i] = sw * (labels[i] ? class_weights.pos : class_weights.neg);
    }
    standardize_columns_inplace(view.x, w, model->mean_, model->stddev_);

    const auto d = view.x.cols();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
    Eigen::VectorXd grad(d + 1);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(d + 1);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d + 1);
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    for (int it = 1; it <= config.max_iter; ++it) {
        const double loss = logistic_loss_grad(theta, view.x, labels, w, config.l2, &grad);
        if (!std::isfinite(loss)) throw DataError("logistic training diverged");
        if (grad.cwiseAbs().maxCoeff() < config.tol) break;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
        const double bc1 = 1.0 - std::pow(beta1, it);
        const double bc2 = 1.0 - std::pow(beta2, it);
        for (Eigen::Index k = 0; k < theta.size(); ++k) {
            theta(k) -= config.lr * (m(k) / bc1) / (std::sqrt(v(k) / bc2) + eps);
        }
    }

    model->w_ = theta.head(d);
    model->b_ = theta(d);
    return model;
}

std::vector<double> LogisticModel::predict_positive(const Table& features) const {
    auto view = canonicalize(features, &columns_);
    std::vector<double> out(features.size());
    for (Eigen::Index i = 0; i < view.x.rows(); ++i) {
        double s = b_;
        for (Eigen::Index c = 0; c < view.x.cols(); ++c) {
            const auto cc = static_cast<std::size_t>(c);
            const double z =
                stddev_[cc] > 0.0 ? (view.x(i, c) - mean_[cc]) / stddev_[cc] : 0.0;
            s += w_(c) * z;
        }
        out[static_cast<std::size_t>(i)] = sigmoid(s);
    }
    return out;
}

void LogisticModel::save(std::ostream& out) const {
    BinWriter w(out);
    w.str_vec(columns_);
    w.f64_vec(std::vector<double>(w_.data(), w_.data() + w_.size()));
    w.f64(b_);
    w.f64_vec(mean_);
    w.f64_vec(stddev_);
}

std::unique_ptr<LogisticModel> LogisticModel::load(BinReader& r) {
    auto m = std::make_unique<LogisticModel>();
    m->columns_ = r.str_vec();
    const auto wv = r.f64_vec();
    m->w_ = Eigen::Map<const Eigen::VectorXd>(wv.data(), static_cast<Eigen::Index>(wv.size()));
    m->b_ = r.f64();
    m->mean_ = r.f64_vec();
    m->stddev_ = r.f64_vec();
    return m;
}

}  // namespace psm
