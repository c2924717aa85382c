#include "kwfp/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "kwfp/error.hpp"

namespace kwfp {

SplitCriterion split_criterion_from_string(const std::string& s) {
    if (s == "gini") return SplitCriterion::Gini;
    if (s == "info_gain") return SplitCriterion::InfoGain;
    throw UsageError("unknown split criterion \"" + s + "\", expected gini|info_gain");
}

const char* split_criterion_string(SplitCriterion c) {
    return c == SplitCriterion::Gini ? "gini" : "info_gain";
}

nlohmann::ordered_json TrainConfig::to_json() const {
    nlohmann::ordered_json j;
    j["n_trees"] = n_trees;
    j["criterion"] = split_criterion_string(criterion);
    j["bootstrap"] = bootstrap;
    j["k_candidate_features"] = k_candidate_features;
    j["min_samples_split"] = min_samples_split;
    j["max_depth"] = max_depth;
    j["rng_seed"] = rng_seed;
    j["n_jobs"] = n_jobs;
    return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.n_trees = j.value("n_trees", c.n_trees);
    if (j.contains("criterion"))
        c.criterion = split_criterion_from_string(j["criterion"].get<std::string>());
    c.bootstrap = j.value("bootstrap", c.bootstrap);
    c.k_candidate_features = j.value("k_candidate_features", c.k_candidate_features);
    c.min_samples_split = j.value("min_samples_split", c.min_samples_split);
    c.max_depth = j.value("max_depth", c.max_depth);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    c.n_jobs = j.value("n_jobs", c.n_jobs);
    return c;
}

double gini_impurity(std::span<const uint32_t> class_counts) {
    uint64_t n = 0;
    for (uint32_t c : class_counts) n += c;
    if (n == 0) throw ValidationError("gini_impurity: all class counts are zero");
    double sum_sq = 0;
    for (uint32_t c : class_counts) {
        double p = static_cast<double>(c) / static_cast<double>(n);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

double entropy_impurity(std::span<const uint32_t> class_counts) {
    uint64_t n = 0;
    for (uint32_t c : class_counts) n += c;
    if (n == 0) throw ValidationError("entropy_impurity: all class counts are zero");
    double h = 0;
    for (uint32_t c : class_counts) {
        if (c == 0) continue;
        double p = static_cast<double>(c) / static_cast<double>(n);
        h -= p * std::log2(p);
    }
    return h;
}

const TreeNode& Tree::leaf_for(std::span<const double> x) const {
    uint32_t idx = 0;
    for (;;) {
        const TreeNode& node = nodes[idx];
        if (node.is_leaf()) return node;
        idx = x[static_cast<size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
}

namespace {

struct NodeTask {
    uint32_t node_index;
    size_t begin, end;  // range into the sample-index array
    int depth;
};

double impurity_of(std::span<const uint32_t> counts, SplitCriterion crit) {
    return crit == SplitCriterion::Gini ? gini_impurity(counts) : entropy_impurity(counts);
}

}  // namespace

Tree train_tree(const Matrix& X, std::span<const int> y, size_t n_classes,
                const TrainConfig& config, Rng& rng,
                std::vector<double>* importance_accumulator) {
    const size_t n = X.rows;
    const size_t d = X.cols;
    if (n == 0) throw ValidationError("train_tree: no samples");

    size_t k = config.k_candidate_features > 0
                   ? static_cast<size_t>(config.k_candidate_features)
                   : static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
    k = std::clamp<size_t>(k, 1, std::max<size_t>(d, 1));

    std::vector<size_t> samples(n);
    if (config.bootstrap) {
        for (size_t i = 0; i < n; ++i) samples[i] = rng.uniform_below(n);
    } else {
        for (size_t i = 0; i < n; ++i) samples[i] = i;
    }

    Tree tree;
    tree.nodes.emplace_back();
    std::vector<size_t> feature_perm(d);
    for (size_t f = 0; f < d; ++f) feature_perm[f] = f;

    std::vector<uint32_t> node_counts(n_classes), left_counts(n_classes), tmp_counts(n_classes);

    std::vector<NodeTask> stack{{0, 0, n, 0}};
    while (!stack.empty()) {
        NodeTask task = stack.back();
        stack.pop_back();
        const size_t n_node = task.end - task.begin;

        std::fill(node_counts.begin(), node_counts.end(), 0);
        for (size_t i = task.begin; i < task.end; ++i)
            ++node_counts[static_cast<size_t>(y[samples[i]])];

        bool pure = false;
        for (uint32_t c : node_counts)
            if (c == n_node) { pure = true; break; }

        auto make_leaf = [&] { tree.nodes[task.node_index].counts = node_counts; };

        if (pure || n_node < static_cast<size_t>(config.min_samples_split) ||
            (config.max_depth > 0 && task.depth >= config.max_depth)) {
            make_leaf();
            continue;
        }

        // Draw candidate features without replacement, skipping the
        // ones that are constant over this node, until k usable
        // candidates were examined or the pool is exhausted.
        double best_decrease = -1.0;
        int best_feature = -1;
        double best_threshold = 0;

        const double node_impurity = impurity_of(node_counts, config.criterion);
        size_t examined = 0;
        for (size_t drawn = 0; drawn < d && examined < k; ++drawn) {
            size_t swap_with = drawn + rng.uniform_below(d - drawn);
            std::swap(feature_perm[drawn], feature_perm[swap_with]);
            const size_t f = feature_perm[drawn];

            double lo = X.at(samples[task.begin], f), hi = lo;
            for (size_t i = task.begin + 1; i < task.end; ++i) {
                double v = X.at(samples[i], f);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (lo >= hi) continue;  // constant here
            ++examined;

            double threshold = rng.uniform_open(lo, hi);
            std::fill(left_counts.begin(), left_counts.end(), 0);
            size_t left_size = 0;
            for (size_t i = task.begin; i < task.end; ++i) {
                if (X.at(samples[i], f) <= threshold) {
                    ++left_counts[static_cast<size_t>(y[samples[i]])];
                    ++left_size;
                }
            }
            if (left_size == 0 || left_size == n_node) continue;  // fp edge

            for (size_t c = 0; c < n_classes; ++c)
                tmp_counts[c] = node_counts[c] - left_counts[c];
            double wl = static_cast<double>(left_size) / static_cast<double>(n_node);
            double decrease = node_impurity - wl * impurity_of(left_counts, config.criterion) -
                              (1.0 - wl) * impurity_of(tmp_counts, config.criterion);
            if (decrease > best_decrease) {
                best_decrease = decrease;
                best_feature = static_cast<int>(f);
                best_threshold = threshold;
            }
        }

        if (best_feature < 0) {  // every candidate constant
            make_leaf();
            continue;
        }

        // Partition this node's samples around the chosen threshold.
        size_t mid = task.begin;
        for (size_t i = task.begin; i < task.end; ++i) {
            if (X.at(samples[i], static_cast<size_t>(best_feature)) <= best_threshold) {
                std::swap(samples[i], samples[mid]);
                ++mid;
            }
        }

        if (importance_accumulator) {
            double node_weight = static_cast<double>(n_node) / static_cast<double>(n);
            (*importance_accumulator)[static_cast<size_t>(best_feature)] +=
                node_weight * std::max(0.0, best_decrease);
        }

        uint32_t left_index = static_cast<uint32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        TreeNode& parent = tree.nodes[task.node_index];
        parent.feature = best_feature;
        parent.threshold = best_threshold;
        parent.left = left_index;
        parent.right = left_index + 1;

        stack.push_back({left_index + 1, mid, task.end, task.depth + 1});
        stack.push_back({left_index, task.begin, mid, task.depth + 1});
    }
    return tree;
}

Forest train_forest(const Matrix& X, std::span<const int> y,
                    std::vector<std::string> class_labels, TrainConfig config) {
    if (X.rows != y.size())
        throw ValidationError("train_forest: X and y row counts differ");
    if (config.n_trees < 1) throw UsageError("train_forest: n_trees must be >= 1");

    std::set<int> distinct(y.begin(), y.end());
    if (distinct.size() < 2)
        throw ValidationError("train_forest: degenerate labels, need at least 2 classes");

    const size_t n_classes = class_labels.size();
    Forest forest;
    forest.class_labels = std::move(class_labels);
    forest.config = config;
    forest.n_features = X.cols;
    forest.trees.resize(static_cast<size_t>(config.n_trees));

    Rng master(config.rng_seed);
    std::vector<std::vector<double>> per_tree_importance(
        static_cast<size_t>(config.n_trees), std::vector<double>(X.cols, 0.0));

    parallel_for(static_cast<size_t>(config.n_trees), config.n_jobs, [&](size_t t) {
        Rng tree_rng = master.derive({0x7265650ULL, t});
        forest.trees[t] =
            train_tree(X, y, n_classes, config, tree_rng, &per_tree_importance[t]);
    });

    forest.importance.assign(X.cols, 0.0);
    for (const auto& imp : per_tree_importance)
        for (size_t f = 0; f < X.cols; ++f) forest.importance[f] += imp[f];
    for (double& v : forest.importance) v /= static_cast<double>(config.n_trees);
    double total = 0;
    for (double v : forest.importance) total += v;
    if (total > 0)
        for (double& v : forest.importance) v /= total;
    return forest;
}

std::vector<double> predict_proba(const Forest& forest, std::span<const double> x) {
    if (x.size() != forest.n_features)
        throw ValidationError("predict_proba: expected " + std::to_string(forest.n_features) +
                              " features, got " + std::to_string(x.size()));
    std::vector<double> proba(forest.class_labels.size(), 0.0);
    for (const Tree& tree : forest.trees) {
        const TreeNode& leaf = tree.leaf_for(x);
        uint64_t total = 0;
        for (uint32_t c : leaf.counts) total += c;
        if (total == 0) continue;
        for (size_t c = 0; c < proba.size(); ++c)
            proba[c] += static_cast<double>(leaf.counts[c]) / static_cast<double>(total);
    }
    for (double& p : proba) p /= static_cast<double>(forest.trees.size());
    return proba;
}

int predict_index(const Forest& forest, std::span<const double> x) {
    auto proba = predict_proba(forest, x);
    size_t best = 0;
    for (size_t c = 1; c < proba.size(); ++c)
        if (proba[c] > proba[best]) best = c;
    return static_cast<int>(best);
}

const std::string& predict(const Forest& forest, std::span<const double> x) {
    return forest.class_labels[static_cast<size_t>(predict_index(forest, x))];
}

std::vector<std::pair<std::string, double>> rank_categories(
    const Forest& forest, std::span<const std::string> catalog) {
    if (catalog.size() != forest.importance.size())
        throw ValidationError("rank_categories: catalog covers " + std::to_string(catalog.size()) +
                              " features, forest has " + std::to_string(forest.importance.size()));
    std::map<std::string, double> sums;
    for (size_t f = 0; f < catalog.size(); ++f) {
        if (catalog[f].empty())
            throw ValidationError("rank_categories: feature " + std::to_string(f) +
                                  " has no category");
        sums[catalog[f]] += forest.importance[f];
    }
    std::vector<std::pair<std::string, double>> ranked(sums.begin(), sums.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return ranked;
}

ForwardSelectResult forward_select(const Matrix& X_train, std::span<const int> y_train,
                                   const Matrix& X_val, std::span<const int> y_val,
                                   std::span<const std::string> catalog,
                                   std::vector<std::string> class_labels,
                                   const TrainConfig& config, std::span<const int> grid) {
    if (grid.empty()) throw UsageError("forward_select: empty grid");

    Forest ranker = train_forest(X_train, y_train, class_labels, config);
    auto ranked = rank_categories(ranker, catalog);

    ForwardSelectResult result;
    for (const auto& [cat, imp] : ranked) result.ranked_categories.push_back(cat);

    for (int n : grid) {
        if (n < 1) throw UsageError("forward_select: grid entries must be >= 1");
        size_t take = std::min<size_t>(static_cast<size_t>(n), ranked.size());
        std::set<std::string> keep(result.ranked_categories.begin(),
                                   result.ranked_categories.begin() + static_cast<long>(take));
        std::vector<size_t> cols;
        for (size_t f = 0; f < catalog.size(); ++f)
            if (keep.count(catalog[f])) cols.push_back(f);

        Matrix Xtr(X_train.rows, cols.size()), Xva(X_val.rows, cols.size());
        for (size_t r = 0; r < X_train.rows; ++r)
            for (size_t j = 0; j < cols.size(); ++j) Xtr.at(r, j) = X_train.at(r, cols[j]);
        for (size_t r = 0; r < X_val.rows; ++r)
            for (size_t j = 0; j < cols.size(); ++j) Xva.at(r, j) = X_val.at(r, cols[j]);

        TrainConfig sub = config;
        sub.rng_seed = mix_seed(config.rng_seed, static_cast<uint64_t>(n));
        Forest f = train_forest(Xtr, y_train, class_labels, sub);
        size_t correct = 0;
        for (size_t r = 0; r < Xva.rows; ++r)
            if (predict_index(f, Xva.row(r)) == y_val[r]) ++correct;
        double acc = Xva.rows == 0 ? 0.0
                                   : static_cast<double>(correct) / static_cast<double>(Xva.rows);
        result.accuracy_by_n.push_back({n, acc});

        bool better = result.accuracy_by_n.size() == 1 || acc > result.best_accuracy ||
                      (acc == result.best_accuracy && n < result.best_n);
        if (better) {
            result.best_n = n;
            result.best_accuracy = acc;
            result.selected_features = cols;
        }
    }
    return result;
}

namespace {

constexpr char kForestMagic[8] = {'K', 'W', 'F', 'P', 'F', 'R', 'S', 'T'};
constexpr uint32_t kForestVersion = 1;

template <class T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

void put_string(std::ofstream& out, const std::string& s) {
    put<uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& in) {
    uint64_t n = get<uint64_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}

}  // namespace

void save_forest(const Forest& forest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kForestMagic, sizeof(kForestMagic));
    put(out, kForestVersion);
    put<int32_t>(out, forest.config.n_trees);
    put<uint8_t>(out, static_cast<uint8_t>(forest.config.criterion));
    put<uint8_t>(out, forest.config.bootstrap ? 1 : 0);
    put<int32_t>(out, forest.config.k_candidate_features);
    put<int32_t>(out, forest.config.min_samples_split);
    put<int32_t>(out, forest.config.max_depth);
    put<uint64_t>(out, forest.config.rng_seed);
    put<uint64_t>(out, forest.n_features);

    put<uint64_t>(out, forest.class_labels.size());
    for (const auto& l : forest.class_labels) put_string(out, l);
    put<uint64_t>(out, forest.importance.size());
    for (double v : forest.importance) put(out, v);

    put<uint64_t>(out, forest.trees.size());
    for (const Tree& tree : forest.trees) {
        put<uint64_t>(out, tree.nodes.size());
        for (const TreeNode& node : tree.nodes) {
            put<int32_t>(out, node.feature);
            put(out, node.threshold);
            put(out, node.left);
            put(out, node.right);
            put<uint64_t>(out, node.counts.size());
            for (uint32_t c : node.counts) put(out, c);
        }
    }
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

Forest load_forest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kForestMagic, sizeof(magic)) != 0)
        throw ParseError("not a forest file: " + path.string());
    uint32_t version = get<uint32_t>(in);
    if (version != kForestVersion)
        throw ParseError("unsupported forest version " + std::to_string(version));

    Forest forest;
    forest.config.n_trees = get<int32_t>(in);
    forest.config.criterion = static_cast<SplitCriterion>(get<uint8_t>(in));
    forest.config.bootstrap = get<uint8_t>(in) != 0;
    forest.config.k_candidate_features = get<int32_t>(in);
    forest.config.min_samples_split = get<int32_t>(in);
    forest.config.max_depth = get<int32_t>(in);
    forest.config.rng_seed = get<uint64_t>(in);
    forest.n_features = get<uint64_t>(in);

    uint64_t n_labels = get<uint64_t>(in);
    forest.class_labels.reserve(n_labels);
    for (uint64_t i = 0; i < n_labels; ++i) forest.class_labels.push_back(get_string(in));
    uint64_t n_imp = get<uint64_t>(in);
    forest.importance.resize(n_imp);
    for (auto& v : forest.importance) v = get<double>(in);

    uint64_t n_trees = get<uint64_t>(in);
    forest.trees.resize(n_trees);
    for (Tree& tree : forest.trees) {
        uint64_t n_nodes = get<uint64_t>(in);
        tree.nodes.resize(n_nodes);
        for (TreeNode& node : tree.nodes) {
            node.feature = get<int32_t>(in);
            node.threshold = get<double>(in);
            node.left = get<uint32_t>(in);
            node.right = get<uint32_t>(in);
            uint64_t nc = get<uint64_t>(in);
            node.counts.resize(nc);
            for (auto& c : node.counts) c = get<uint32_t>(in);
        }
    }
    if (!in) throw ParseError("truncated forest file: " + path.string());
    return forest;
}

}  // namespace kwfp
