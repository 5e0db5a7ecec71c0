#pragma once

#include "psm/models/model.hpp"

namespace psm {

struct LogisticConfig {
    double l2 = 1e-4;      // ridge strength on weights (bias excluded)
    double lr = 0.05;      // full-batch adaptive-moment step size
    int max_iter = 2000;
    double tol = 1e-8;     // stop when the max-abs gradient entry drops below
};

class LogisticModel final : public Model {
public:
    std::string kind() const override { return "lr"; }
    const std::vector<std::string>& schema() const override { return columns_; }
    std::vector<double> predict_positive(const Table& features) const override;
    void save(std::ostream& out) const override;

    static std::unique_ptr<LogisticModel> load(BinReader& r);

    const Eigen::VectorXd& weights() const { return w_; }
    double bias() const { return b_; }

    friend std::unique_ptr<Model> train_logistic(const Table& features,
                                                 const std::vector<int>& labels,
                                                 const std::vector<double>& sample_weights,
                                                 const ClassWeights& class_weights,
                                                 const LogisticConfig& config);

private:
    std::vector<std::string> columns_;
    Eigen::VectorXd w_;
    double b_ = 0.0;
    std::vector<double> mean_, stddev_;  // internal standardization
};

// Weighted binary cross-entropy loss with L2 penalty, plus its gradient.
// theta packs [w0..wd-1, b]. Exposed for finite-difference checks.
double logistic_loss_grad(const Eigen::VectorXd& theta, const Eigen::MatrixXd& x,
                          const std::vector<int>& y, const std::vector<double>& w, double l2,
                          Eigen::VectorXd* grad);

std::unique_ptr<Model> train_logistic(const Table& features, const std::vector<int>& labels,
                                      const std::vector<double>& sample_weights,
                                      const ClassWeights& class_weights,
                                      const LogisticConfig& config);

}  // namespace psm
