#include "psm/models/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "psm/rng.hpp"
#include "psm/util.hpp"

namespace psm {

namespace {

struct Entry {
    std::uint32_t row;
    double weight;
};

double gini(double pos, double neg) {
    const double w = pos + neg;
    if (w <= 0.0) return 0.0;
    const double pp = pos / w;
    const double pn = neg / w;
    return 1.0 - (pp * pp + pn * pn);
}

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, const std::vector<int>& y, const ForestConfig& cfg,
                std::uint64_t seed)
        : x_(x), y_(y), cfg_(cfg), rng_(seed) {}

    std::vector<ForestModel::Node> build(std::vector<Entry> entries) {
        entries_ = std::move(entries);
        nodes_.clear();
        nodes_.push_back({});
        struct Work {
            std::size_t begin, end;
            std::uint32_t node;
            int depth;
        };
        std::vector<Work> stack{{0, entries_.size(), 0, 0}};
        std::vector<std::size_t> scratch(static_cast<std::size_t>(x_.cols()));
        while (!stack.empty()) {
            const Work w = stack.back();
            stack.pop_back();
            grow(w.begin, w.end, w.node, w.depth, scratch, stack);
        }
        return std::move(nodes_);
    }

private:
    struct Split {
        bool found = false;
        std::size_t feature = 0;
        double threshold = 0.0;
        double impurity = 0.0;  // weighted child impurity
    };

    void make_leaf(std::uint32_t node, double wpos, double wneg) {
        nodes_[node].feature = -1;
        nodes_[node].vote = wpos > wneg ? 1 : 0;
    }

    template <typename WorkStack>
    void grow(std::size_t begin, std::size_t end, std::uint32_t node, int depth,
              std::vector<std::size_t>& scratch, WorkStack& stack) {
        double wpos = 0.0, wneg = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            (y_[entries_[i].row] ? wpos : wneg) += entries_[i].weight;
        }
        const std::size_t count = end - begin;
        const bool depth_stop = cfg_.max_depth > 0 && depth >= cfg_.max_depth;
        if (wpos == 0.0 || wneg == 0.0 || depth_stop ||
            count < 2 * static_cast<std::size_t>(cfg_.min_samples_leaf)) {
            make_leaf(node, wpos, wneg);
            return;
        }

        const Split split = best_split(begin, end, gini(wpos, wneg), scratch);
        if (!split.found) {
            make_leaf(node, wpos, wneg);
            return;
        }

        auto mid_it = std::partition(
            entries_.begin() + static_cast<std::ptrdiff_t>(begin),
            entries_.begin() + static_cast<std::ptrdiff_t>(end), [&](const Entry& e) {
                return x_(e.row, static_cast<Eigen::Index>(split.feature)) <= split.threshold;
            });
        const std::size_t mid = static_cast<std::size_t>(mid_it - entries_.begin());

        nodes_[node].feature = static_cast<std::int32_t>(split.feature);
        nodes_[node].threshold = split.threshold;
        const auto left = static_cast<std::uint32_t>(nodes_.size());
        nodes_.push_back({});
        const auto right = static_cast<std::uint32_t>(nodes_.size());
        nodes_.push_back({});
        nodes_[node].left = left;
        nodes_[node].right = right;
        stack.push_back({begin, mid, left, depth + 1});
        stack.push_back({mid, end, right, depth + 1});
    }

    Split best_split(std::size_t begin, std::size_t end, double parent_impurity,
                     std::vector<std::size_t>& scratch) {
        const auto d = static_cast<std::size_t>(x_.cols());
        std::size_t mtry = cfg_.mtry > 0 ? static_cast<std::size_t>(cfg_.mtry)
                                         : static_cast<std::size_t>(
                                               std::floor(std::sqrt(static_cast<double>(d))));
        mtry = std::clamp<std::size_t>(mtry, 1, d);

        std::iota(scratch.begin(), scratch.end(), 0);
        for (std::size_t k = 0; k < mtry; ++k) {
            const std::size_t j = k + static_cast<std::size_t>(rng_.next_below(d - k));
            std::swap(scratch[k], scratch[j]);
        }

        const std::size_t min_leaf = static_cast<std::size_t>(cfg_.min_samples_leaf);
        Split best;
        std::vector<std::pair<double, std::size_t>> vals;  // (value, entry index)
        for (std::size_t k = 0; k < mtry; ++k) {
            const std::size_t f = scratch[k];
            vals.clear();
            for (std::size_t i = begin; i < end; ++i) {
                vals.emplace_back(x_(entries_[i].row, static_cast<Eigen::Index>(f)), i);
            }
            std::sort(vals.begin(), vals.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            double lpos = 0.0, lneg = 0.0, rpos = 0.0, rneg = 0.0;
            for (std::size_t i = begin; i < end; ++i) {
                (y_[entries_[i].row] ? rpos : rneg) += entries_[i].weight;
            }
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                const auto& e = entries_[vals[i].second];
                const double w = e.weight;
                if (y_[e.row]) {
                    lpos += w;
                    rpos -= w;
                } else {
                    lneg += w;
                    rneg -= w;
                }
                if (vals[i].first == vals[i + 1].first) continue;  // no boundary inside ties
                const std::size_t left_n = i + 1;
                const std::size_t right_n = vals.size() - left_n;
                if (left_n < min_leaf || right_n < min_leaf) continue;
                const double wl = lpos + lneg, wr = rpos + rneg;
                const double child =
                    (wl * gini(lpos, lneg) + wr * gini(rpos, rneg)) / (wl + wr);
                if (child >= parent_impurity) continue;
                const double thr = vals[i].first + (vals[i + 1].first - vals[i].first) / 2.0;
                const bool improves =
                    !best.found || child < best.impurity ||
                    (child == best.impurity &&
                     (f < best.feature || (f == best.feature && thr < best.threshold)));
                if (improves) {
                    best.found = true;
                    best.feature = f;
                    best.threshold = thr;
                    best.impurity = child;
                }
            }
        }
        return best;
    }

    const Eigen::MatrixXd& x_;
    const std::vector<int>& y_;
    ForestConfig cfg_;
    Rng rng_;
    std::vector<Entry> entries_;
    std::vector<ForestModel::Node> nodes_;
};

std::vector<Entry> bootstrap_draw(const std::vector<double>& weights, Rng& rng) {
    std::vector<double> cum(weights.size());
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        total += weights[i];
        cum[i] = total;
    }
    const auto draws = static_cast<std::size_t>(std::max<std::int64_t>(1, std::llround(total)));
    std::vector<Entry> out;
    out.reserve(draws);
    for (std::size_t k = 0; k < draws; ++k) {
        const double u = rng.next_double() * total;
        const auto it = std::upper_bound(cum.begin(), cum.end(), u);
        const auto idx = static_cast<std::uint32_t>(
            std::min<std::ptrdiff_t>(it - cum.begin(), static_cast<std::ptrdiff_t>(cum.size()) - 1));
        out.push_back({idx, 1.0});
    }
    return out;
}

}  // namespace

std::unique_ptr<Model> train_forest(const Table& features, const std::vector<int>& labels,
                                    const std::vector<double>& sample_weights,
                                    const ClassWeights& class_weights, const ForestConfig& config) {
    if (features.size() != labels.size()) throw DataError("features/labels size mismatch");
    bool has_pos = false, has_neg = false;
    for (int y : labels) (y ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) throw DataError("training requires both classes");
    if (config.n_trees < 1) throw ParameterError("n_trees must be >= 1");

    auto model = std::make_unique<ForestModel>();
    const auto view = canonicalize(features, nullptr);
    model->columns_ = view.columns;

    std::vector<double> w(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double sw = sample_weights.empty() ? 1.0 : sample_weights[i];
        w[i] = sw * (labels[i] ? class_weights.pos : class_weights.neg);
    }

    model->trees_.resize(static_cast<std::size_t>(config.n_trees));
    parallel_for(static_cast<std::size_t>(config.n_trees), [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            Rng rng(mix_seed(config.seed, t));
            std::vector<Entry> entries;
            if (config.bootstrap) {
                entries = bootstrap_draw(w, rng);
            } else {
                entries.reserve(w.size());
                for (std::size_t i = 0; i < w.size(); ++i) {
                    entries.push_back({static_cast<std::uint32_t>(i), w[i]});
                }
            }
            TreeBuilder builder(view.x, labels, config, rng.next_u64());
            model->trees_[t] = builder.build(std::move(entries));
        }
    });
    return model;
}

std::vector<double> ForestModel::predict_positive(const Table& features) const {
    const auto view = canonicalize(features, &columns_);
    std::vector<double> out(features.size(), 0.0);
    for (Eigen::Index r = 0; r < view.x.rows(); ++r) {
        int votes = 0;
        for (const auto& tree : trees_) {
            std::uint32_t node = 0;
            while (tree[node].feature >= 0) {
                node = view.x(r, tree[node].feature) <= tree[node].threshold ? tree[node].left
                                                                             : tree[node].right;
            }
            votes += tree[node].vote;
        }
        out[static_cast<std::size_t>(r)] =
            static_cast<double>(votes) / static_cast<double>(trees_.size());
    }
    return out;
}

void ForestModel::save(std::ostream& out) const {
    BinWriter w(out);
    w.str_vec(columns_);
    w.u64(trees_.size());
    for (const auto& tree : trees_) {
        w.u64(tree.size());
        for (const auto& n : tree) {
            w.i64(n.feature);
            w.f64(n.threshold);
            w.u32(n.left);
            w.u32(n.right);
            w.u32(n.vote);
        }
    }
}

std::unique_ptr<ForestModel> ForestModel::load(BinReader& r) {
    auto m = std::make_unique<ForestModel>();
    m->columns_ = r.str_vec();
    m->trees_.resize(r.u64());
    for (auto& tree : m->trees_) {
        tree.resize(r.u64());
        for (auto& n : tree) {
            n.feature = static_cast<std::int32_t>(r.i64());
            n.threshold = r.f64();
            n.left = r.u32();
            n.right = r.u32();
            n.vote = static_cast<std::uint8_t>(r.u32());
        }
    }
    return m;
}

}  // namespace psm
