#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "ted/errors.hpp"
#include "ted/interpret.hpp"
#include "ted/parallel.hpp"

namespace ted {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// mt19937_64's output sequence is fixed by the standard; the bounded draw
// below avoids the implementation-defined std::uniform_int_distribution.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::size_t below(std::size_t n) {
        const std::uint64_t bound = n;
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = gen_();
            if (r >= threshold) return static_cast<std::size_t>(r % bound);
        }
    }

private:
    std::mt19937_64 gen_;
};

struct Candidate {
    int feature = -1;
    double threshold = 0.0;
    double score = -1.0;  // sum over children of (sum of squared class counts) / size; larger is purer
};

class TreeBuilder {
public:
    TreeBuilder(const std::vector<std::vector<double>>& x, const std::vector<PainClass>& y,
                const ForestParams& params, int max_features, Rng& rng)
        : x_(x), y_(y), params_(params), max_features_(max_features), rng_(rng),
          n_features_(x.empty() ? 0 : static_cast<int>(x.front().size())) {}

    DecisionTree build(std::vector<std::size_t> sample) {
        grow(sample, 0);
        return std::move(tree_);
    }

private:
    int grow(std::vector<std::size_t>& sample, int depth) {
        TreeNode node;
        for (std::size_t i : sample) ++node.counts[static_cast<std::size_t>(y_[i])];
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back(node);

        const bool pure = node.counts[0] == 0 || node.counts[1] == 0;
        const bool depth_capped = params_.max_depth > 0 && depth >= params_.max_depth;
        const auto min_leaf = static_cast<std::size_t>(std::max(params_.min_samples_leaf, 1));
        if (pure || depth_capped || sample.size() < 2 * min_leaf) return id;

        const Candidate best = find_split(sample, min_leaf);
        if (best.feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (std::size_t i : sample) {
            (x_[i][static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(i);
        }
        sample.clear();
        sample.shrink_to_fit();

        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        TreeNode& n = tree_.nodes[static_cast<std::size_t>(id)];
        n.feature = best.feature;
        n.threshold = best.threshold;
        n.left = l;
        n.right = r;
        return id;
    }

    // Visits features in random order until max_features non-constant ones
    // have been scored.
    Candidate find_split(const std::vector<std::size_t>& sample, std::size_t min_leaf) {
        std::vector<int> order(static_cast<std::size_t>(n_features_));
        for (int f = 0; f < n_features_; ++f) order[static_cast<std::size_t>(f)] = f;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_.below(i)]);

        Candidate best;
        int evaluated = 0;
        std::vector<std::pair<double, int>> column(sample.size());
        for (int f : order) {
            if (evaluated >= max_features_) break;
            for (std::size_t k = 0; k < sample.size(); ++k) {
                column[k] = {x_[sample[k]][static_cast<std::size_t>(f)], static_cast<int>(y_[sample[k]])};
            }
            std::sort(column.begin(), column.end());
            if (column.front().first == column.back().first) continue;
            ++evaluated;

            std::array<double, 2> total{};
            for (const auto& c : column) total[static_cast<std::size_t>(c.second)] += 1.0;
            std::array<double, 2> left{};
            const std::size_t n = column.size();
            for (std::size_t i = 1; i < n; ++i) {
                left[static_cast<std::size_t>(column[i - 1].second)] += 1.0;
                if (column[i - 1].first == column[i].first) continue;
                if (i < min_leaf || n - i < min_leaf) continue;
                const double nl = static_cast<double>(i);
                const double nr = static_cast<double>(n - i);
                const double r0 = total[0] - left[0];
                const double r1 = total[1] - left[1];
                const double score = (left[0] * left[0] + left[1] * left[1]) / nl + (r0 * r0 + r1 * r1) / nr;
                if (score > best.score) {
                    double t = 0.5 * (column[i - 1].first + column[i].first);
                    if (!(t < column[i].first)) t = column[i - 1].first;
                    best = Candidate{f, t, score};
                }
            }
        }
        return best;
    }

    const std::vector<std::vector<double>>& x_;
    const std::vector<PainClass>& y_;
    const ForestParams& params_;
    int max_features_;
    Rng& rng_;
    int n_features_;
    DecisionTree tree_;
};

std::vector<std::size_t> bootstrap(const std::vector<PainClass>& y, bool balanced, Rng& rng) {
    const std::size_t n = y.size();
    std::vector<std::size_t> sample;
    sample.reserve(n);
    if (!balanced) {
        for (std::size_t i = 0; i < n; ++i) sample.push_back(rng.below(n));
        return sample;
    }
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(y[i])].push_back(i);
    const std::array<std::size_t, 2> draws{n / 2, n - n / 2};
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t k = 0; k < draws[c]; ++k) sample.push_back(by_class[c][rng.below(by_class[c].size())]);
    }
    return sample;
}

}  // namespace

PainClass DecisionTree::vote(std::span<const double> row) const {
    if (nodes.empty()) throw Error(ErrorKind::shape, "empty decision tree");
    std::size_t at = 0;
    for (;;) {
        const TreeNode& n = nodes[at];
        if (n.is_leaf()) return n.counts[1] >= n.counts[0] ? PainClass::pain : PainClass::neutral;
        const auto f = static_cast<std::size_t>(n.feature);
        if (f >= row.size()) throw Error(ErrorKind::schema, "row lacks feature " + std::to_string(f));
        at = static_cast<std::size_t>(row[f] <= n.threshold ? n.left : n.right);
    }
}

ForestModel train_forest(const std::vector<std::vector<double>>& features, const std::vector<PainClass>& labels,
                         std::vector<int> feature_au_ids, const ForestParams& params, std::uint64_t seed,
                         int jobs) {
    if (features.size() != labels.size()) throw Error(ErrorKind::shape, "feature and label counts differ");
    if (params.n_trees < 1) throw Error(ErrorKind::config, "forest needs at least one tree");
    for (const auto& row : features) {
        if (row.size() != feature_au_ids.size()) throw Error(ErrorKind::shape, "feature row has the wrong width");
    }
    const bool has_pain = std::find(labels.begin(), labels.end(), PainClass::pain) != labels.end();
    const bool has_neutral = std::find(labels.begin(), labels.end(), PainClass::neutral) != labels.end();
    if (!has_pain || !has_neutral) {
        throw Error(ErrorKind::degenerate_labels, "training labels contain a single class");
    }

    const int n_features = static_cast<int>(feature_au_ids.size());
    const int max_features =
        params.max_features > 0
            ? std::min(params.max_features, n_features)
            : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(n_features)))));

    ForestModel model;
    model.feature_au_ids = std::move(feature_au_ids);
    model.params = params;
    model.seed = seed;
    model.trees.resize(static_cast<std::size_t>(params.n_trees));
    parallel_for(model.trees.size(), jobs, [&](std::size_t t) {
        Rng rng(splitmix64(seed ^ splitmix64(t)));
        auto sample = bootstrap(labels, params.balanced_bootstrap, rng);
        model.trees[t] = TreeBuilder(features, labels, params, max_features, rng).build(std::move(sample));
    });
    return model;
}

ForestModel train_forest(const std::vector<LabeledRow>& rows, std::vector<int> feature_au_ids,
                         const ForestParams& params, std::uint64_t seed, int jobs) {
    std::vector<std::vector<double>> x;
    std::vector<PainClass> y;
    x.reserve(rows.size());
    y.reserve(rows.size());
    for (const auto& r : rows) {
        x.push_back(r.features);
        y.push_back(r.label);
    }
    return train_forest(x, y, std::move(feature_au_ids), params, seed, jobs);
}

double forest_confidence(const ForestModel& model, std::span<const double> row) {
    if (model.trees.empty()) throw Error(ErrorKind::shape, "forest has no trees");
    if (row.size() != model.feature_au_ids.size()) throw Error(ErrorKind::schema, "row has the wrong number of features");
    std::size_t pain = 0;
    for (const auto& tree : model.trees) pain += tree.vote(row) == PainClass::pain ? 1 : 0;
    return static_cast<double>(pain) / static_cast<double>(model.trees.size());
}

Prediction make_prediction(FrameKey key, double confidence_pain) {
    Prediction p;
    p.key = std::move(key);
    p.confidence_pain = confidence_pain;
    p.predicted = confidence_pain >= kDecisionThreshold ? PainClass::pain : PainClass::neutral;
    return p;
}

Prediction predict(const ForestModel& model, const FrameKey& key, const AuLevels& row) {
    std::vector<double> features;
    features.reserve(model.feature_au_ids.size());
    for (int id : model.feature_au_ids) {
        auto it = row.find(id);
        if (it == row.end()) throw Error(ErrorKind::schema, "row lacks model feature AU" + std::to_string(id));
        features.push_back(it->second);
    }
    return make_prediction(key, forest_confidence(model, features));
}

// ---------------------------------------------------------------------------
// Persistence

namespace {
constexpr const char* kModelFormat = "ted-random-forest";
constexpr int kModelVersion = 1;
}  // namespace

std::string serialize_model_json(const ForestModel& model) {
    nlohmann::ordered_json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["feature_au_ids"] = model.feature_au_ids;
    j["params"] = {{"n_trees", model.params.n_trees},
                   {"max_depth", model.params.max_depth},
                   {"min_samples_leaf", model.params.min_samples_leaf},
                   {"max_features", model.params.max_features},
                   {"balanced_bootstrap", model.params.balanced_bootstrap}};
    j["seed"] = model.seed;
    auto trees = nlohmann::ordered_json::array();
    for (const auto& t : model.trees) {
        // node: [feature, threshold, left, right, neutral_count, pain_count]
        auto nodes = nlohmann::ordered_json::array();
        for (const auto& n : t.nodes) {
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.counts[0], n.counts[1]});
        }
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    return j.dump() + "\n";
}

ForestModel parse_model_json(std::string_view json_text, const std::string& source) {
    try {
        const auto j = nlohmann::json::parse(json_text);
        if (j.at("format").get<std::string>() != kModelFormat) {
            throw Error(ErrorKind::parse, source + ": not a forest model file");
        }
        if (j.at("version").get<int>() != kModelVersion) {
            throw Error(ErrorKind::parse, source + ": unsupported model version");
        }
        ForestModel m;
        m.feature_au_ids = j.at("feature_au_ids").get<std::vector<int>>();
        const auto& p = j.at("params");
        m.params.n_trees = p.at("n_trees").get<int>();
        m.params.max_depth = p.at("max_depth").get<int>();
        m.params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
        m.params.max_features = p.at("max_features").get<int>();
        m.params.balanced_bootstrap = p.at("balanced_bootstrap").get<bool>();
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& t : j.at("trees")) {
            DecisionTree tree;
            for (const auto& n : t) {
                TreeNode node;
                node.feature = n.at(0).get<int>();
                node.threshold = n.at(1).get<double>();
                node.left = n.at(2).get<int>();
                node.right = n.at(3).get<int>();
                node.counts = {n.at(4).get<std::uint32_t>(), n.at(5).get<std::uint32_t>()};
                // children always follow their parent, which rules out cycles
                const auto size = static_cast<int>(t.size());
                const auto self = static_cast<int>(tree.nodes.size());
                const bool bad_feature = !node.is_leaf() && node.feature >= static_cast<int>(m.feature_au_ids.size());
                const bool bad_child = !node.is_leaf() && (node.left <= self || node.right <= self ||
                                                           node.left >= size || node.right >= size);
                if (bad_feature || bad_child) throw Error(ErrorKind::parse, source + ": malformed tree node");
                tree.nodes.push_back(node);
            }
            if (tree.nodes.empty()) throw Error(ErrorKind::parse, source + ": empty tree");
            m.trees.push_back(std::move(tree));
        }
        if (m.trees.empty()) throw Error(ErrorKind::parse, source + ": model has no trees");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse, source + ": invalid model JSON: " + e.what());
    }
}

}  // namespace ted
