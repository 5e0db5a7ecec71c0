#pragma once

#include "psm/models/model.hpp"

namespace psm {

// Three-branch dense network: two parallel stacks over the standardized
// input (rectifier and logistic activations respectively), concatenation of
// [input, stack outputs], a rectifier head stack and one logistic output
// unit. Loss is weighted binary cross-entropy; dropout is active only
// during training.
struct DenseNetSpec {
    std::vector<int> side_widths = {64, 64};  // layer widths shared by both side stacks
    std::vector<int> head_widths = {64, 64};
    double dropout = 0.2;
    std::string optimizer = "adam";  // adam | adagrad
    double lr = 1e-3;
    int epochs = 50;
    int batch_size = 128;
    std::uint64_t seed = 7;
};

// All weights/biases in a fixed flat order:
// [relu stack layers..., sigmoid stack layers..., head layers..., output].
struct DenseNetParams {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;

    std::size_t scalar_count() const;
};

DenseNetParams densenet_init(const DenseNetSpec& spec, int input_dim);

// Weighted BCE loss over a batch plus, optionally, gradients of every
// parameter. No dropout; exposed for finite-difference checks.
double densenet_loss_grad(const DenseNetParams& params, const DenseNetSpec& spec,
                          const Eigen::MatrixXd& x, const std::vector<int>& y,
                          const std::vector<double>& w, DenseNetParams* grad);

class DenseNetModel final : public Model {
public:
    std::string kind() const override { return "dnn"; }
    const std::vector<std::string>& schema() const override { return columns_; }
    std::vector<double> predict_positive(const Table& features) const override;
    void save(std::ostream& out) const override;

    static std::unique_ptr<DenseNetModel> load(BinReader& r);

    const DenseNetParams& params() const { return params_; }

    friend std::unique_ptr<Model> train_densenet(const Table& features,
                                                 const std::vector<int>& labels,
                                                 const std::vector<double>& sample_weights,
                                                 const ClassWeights& class_weights,
                                                 const DenseNetSpec& spec);

private:
    std::vector<std::string> columns_;
    DenseNetSpec spec_;
    DenseNetParams params_;
    std::vector<double> mean_, stddev_;  // internal standardization
};

std::unique_ptr<Model> train_densenet(const Table& features, const std::vector<int>& labels,
                                      const std::vector<double>& sample_weights,
                                      const ClassWeights& class_weights,
                                      const DenseNetSpec& spec);

}  // namespace psm
