#include <json.hpp>

#include "psm/models/densenet.hpp"
#include "psm/models/forest.hpp"
#include "psm/models/logistic.hpp"
#include "psm/models/model.hpp"
#include "psm/types.hpp"

namespace psm {

using nlohmann::json;

std::unique_ptr<Model> train_model(const std::string& kind, const std::string& config_json,
                                   const Table& features, const std::vector<int>& labels,
                                   const std::vector<double>& sample_weights,
                                   const ClassWeights& class_weights, std::uint64_t seed) {
    json j = json::object();
    if (!config_json.empty()) {
        j = json::parse(config_json, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw DataError("invalid model config JSON");
    }
    if (kind == "lr") {
        LogisticConfig c;
        c.l2 = j.value("l2", c.l2);
        c.lr = j.value("lr", c.lr);
        c.max_iter = j.value("max_iter", c.max_iter);
        c.tol = j.value("tol", c.tol);
        return train_logistic(features, labels, sample_weights, class_weights, c);
    }
    if (kind == "rf") {
        ForestConfig c;
        c.n_trees = j.value("n_trees", c.n_trees);
        c.max_depth = j.value("max_depth", c.max_depth);
        c.min_samples_leaf = j.value("min_samples_leaf", c.min_samples_leaf);
        c.mtry = j.value("mtry", c.mtry);
        c.bootstrap = j.value("bootstrap", c.bootstrap);
        c.seed = seed;
        return train_forest(features, labels, sample_weights, class_weights, c);
    }
    if (kind == "dnn") {
        DenseNetSpec c;
        if (j.contains("side_widths")) c.side_widths = j["side_widths"].get<std::vector<int>>();
        if (j.contains("head_widths")) c.head_widths = j["head_widths"].get<std::vector<int>>();
        c.dropout = j.value("dropout", c.dropout);
        c.optimizer = j.value("optimizer", c.optimizer);
        c.lr = j.value("lr", c.lr);
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.seed = seed;
        return train_densenet(features, labels, sample_weights, class_weights, c);
    }
    throw UsageError("unknown model kind: " + kind + " (use lr, rf or dnn)");
}

}  // namespace psm
