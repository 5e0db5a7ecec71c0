#pragma once

#include "psm/models/model.hpp"

namespace psm {

struct ForestConfig {
    int n_trees = 100;
    int max_depth = 0;         // 0 = unlimited
    int min_samples_leaf = 1;  // in drawn units
    int mtry = 0;              // features tried per split; 0 = floor(sqrt(d)), min 1
    bool bootstrap = true;     // weight-proportional resampling
    std::uint64_t seed = 1;
};

class ForestModel final : public Model {
public:
    struct Node {
        std::int32_t feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        std::uint32_t left = 0;
        std::uint32_t right = 0;
        std::uint8_t vote = 0;  // leaf majority label
    };

    std::string kind() const override { return "rf"; }
    const std::vector<std::string>& schema() const override { return columns_; }
    std::vector<double> predict_positive(const Table& features) const override;
    void save(std::ostream& out) const override;

    static std::unique_ptr<ForestModel> load(BinReader& r);

    std::size_t tree_count() const { return trees_.size(); }

    friend std::unique_ptr<Model> train_forest(const Table& features,
                                               const std::vector<int>& labels,
                                               const std::vector<double>& sample_weights,
                                               const ClassWeights& class_weights,
                                               const ForestConfig& config);

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<Node>> trees_;
};

std::unique_ptr<Model> train_forest(const Table& features, const std::vector<int>& labels,
                                    const std::vector<double>& sample_weights,
                                    const ClassWeights& class_weights,
                                    const ForestConfig& config);

}  // namespace psm
