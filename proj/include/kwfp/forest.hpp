#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kwfp/error.hpp"
#include "kwfp/rng.hpp"
#include "kwfp/util.hpp"

#include "json.hpp"

namespace kwfp {

enum class SplitCriterion : uint8_t { Gini, InfoGain };

SplitCriterion split_criterion_from_string(const std::string& s);
const char* split_criterion_string(SplitCriterion c);

struct TrainConfig {
    int n_trees = 700;
    SplitCriterion criterion = SplitCriterion::Gini;
    bool bootstrap = false;          // whole learning sample by default
    int k_candidate_features = 0;    // 0 -> ceil(sqrt(d))
    int min_samples_split = 2;
    int max_depth = 0;               // 0 -> unlimited
    uint64_t rng_seed = 0;
    int n_jobs = 0;  // 0 -> all cores

    nlohmann::ordered_json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

// 1 - sum((n_c / n)^2); counts must not be all zero.
double gini_impurity(std::span<const uint32_t> class_counts);
// Shannon entropy in bits.
double entropy_impurity(std::span<const uint32_t> class_counts);

// Index-linked node storage; feature < 0 marks a leaf holding class
// counts.
struct TreeNode {
    int32_t feature = -1;
    double threshold = 0.0;
    uint32_t left = 0;
    uint32_t right = 0;
    std::vector<uint32_t> counts;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct Tree {
    std::vector<TreeNode> nodes;  // root at index 0

    const TreeNode& leaf_for(std::span<const double> x) const;
    bool operator==(const Tree&) const = default;
};

struct Forest {
    std::vector<Tree> trees;
    std::vector<std::string> class_labels;
    std::vector<double> importance;  // per feature, sums to 1 when any split exists
    TrainConfig config;
    uint64_t n_features = 0;
};

Tree train_tree(const Matrix& X, std::span<const int> y, size_t n_classes,
                const TrainConfig& config, Rng& rng,
                std::vector<double>* importance_accumulator = nullptr);

Forest train_forest(const Matrix& X, std::span<const int> y,
                    std::vector<std::string> class_labels, TrainConfig config);

std::vector<double> predict_proba(const Forest& forest, std::span<const double> x);
// Argmax of predict_proba; ties go to the lowest class index.
int predict_index(const Forest& forest, std::span<const double> x);
const std::string& predict(const Forest& forest, std::span<const double> x);

// Categories ordered by descending summed importance; ties break on
// the category id. catalog[i] names feature i's category.
std::vector<std::pair<std::string, double>> rank_categories(
    const Forest& forest, std::span<const std::string> catalog);

struct ForwardSelectResult {
    int best_n = 0;
    std::vector<size_t> selected_features;       // column indices into X
    std::vector<std::string> ranked_categories;  // full ranking used
    std::vector<std::pair<int, double>> accuracy_by_n;
    double best_accuracy = 0.0;
};

// Restricts features to the top-N ranked categories for each N in the
// grid, retrains, and keeps the N with the best validation accuracy
// (smallest N wins ties).
ForwardSelectResult forward_select(const Matrix& X_train, std::span<const int> y_train,
                                   const Matrix& X_val, std::span<const int> y_val,
                                   std::span<const std::string> catalog,
                                   std::vector<std::string> class_labels,
                                   const TrainConfig& config, std::span<const int> grid);

void save_forest(const Forest& forest, const std::filesystem::path& path);
Forest load_forest(const std::filesystem::path& path);

}  // namespace kwfp
