#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kwfp/features.hpp"
#include "kwfp/forest.hpp"
#include "kwfp/trace.hpp"

#include "json.hpp"

namespace kwfp {

struct SplitSpec {
    int train = 4;
    int val = 1;
    int test = 1;
};

struct SplitResult {
    Dataset train, val, test;
};

// Per keyword, visits ordered by visit_index are cut into consecutive
// blocks of (train+val+test); the first `train` of each block go to
// training, the next `val` to validation, the rest to testing.
// Leftover visits beyond full blocks are dropped.
SplitResult interleaved_split(const Dataset& dataset, const SplitSpec& spec);

struct ConfusionCounts {
    uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
    uint64_t fm = 0;  // multi-class only: wrong targeted keyword

    nlohmann::ordered_json to_json() const;
};

struct PRPoint {
    double threshold = 0, precision = 0, recall = 0;
};

struct PRCurve {
    std::vector<PRPoint> points;  // thresholds descending
};

// Thresholds are the distinct observed scores, descending; AP is the
// recall-weighted sum of precisions.
std::pair<PRCurve, double> prc_and_ap(std::span<const double> scores,
                                      const std::vector<bool>& is_targeted);

struct AccuracyStat {
    double mean = 0, stddev = 0;
    std::vector<double> per_seed;
};

struct EvalOptions {
    FeatureSetId features = FeatureSetId::Psc;
    FeatureParams params;
    TrainConfig train_config;
    int repetitions = 5;
};

AccuracyStat closed_world_eval(const Dataset& train, const Dataset& test,
                               const EvalOptions& options);

struct EvalReport {
    std::string experiment_id;
    std::map<std::string, double> metrics;
    std::optional<ConfusionCounts> counts;
    std::optional<PRCurve> prc;
    nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
    nlohmann::ordered_json config_snapshot = nlohmann::ordered_json::object();

    nlohmann::ordered_json to_json() const;
    std::string metrics_csv() const;
};

// Space + forest trained together; the unit every evaluation consumes.
struct TrainedModel {
    VectorSpace space;
    Forest forest;
    FeatureSetId features = FeatureSetId::Psc;
    FeatureParams params;
};

TrainedModel train_model(const Dataset& train, FeatureSetId id, const FeatureParams& params,
                         TrainConfig config);
// Same, with labels collapsed to targeted / non-targeted.
TrainedModel train_binary_model(const Dataset& train, FeatureSetId id,
                                const FeatureParams& params, TrainConfig config);

constexpr const char* kTargetedLabel = "targeted";
constexpr const char* kBinaryNonTargetedLabel = "non-targeted";

// Probability mass the binary model assigns to the targeted class.
double targeted_score(const TrainedModel& binary, const TraceSample& sample);

EvalReport binary_eval(const Dataset& train, const Dataset& test, const EvalOptions& options);
EvalReport multilevel_eval(const TrainedModel& binary, const TrainedModel& keyword,
                           const Dataset& test);
EvalReport multiclass_eval(const TrainedModel& model, const Dataset& test);

struct CrossCell {
    std::string train_id, test_id;
    AccuracyStat accuracy;
};

// One closed-world evaluation per (train, test) pair.
std::vector<CrossCell> cross_platform_eval(
    const std::vector<std::pair<std::string, const Dataset*>>& trains,
    const std::vector<std::pair<std::string, const Dataset*>>& tests, const EvalOptions& options);

struct GapResult {
    std::string gap;
    AccuracyStat accuracy;
};

// Model fixed on `train`, evaluated against each annotated test set in
// the given order.
std::vector<GapResult> time_gap_eval(const Dataset& train,
                                     const std::vector<std::pair<std::string, const Dataset*>>& tests,
                                     const EvalOptions& options);

// Fisher projection onto the dominant generalized eigenvectors of the
// within/between scatter pencil; axes canonicalized so the first
// nonzero loading is positive.
Matrix lda_project(const Matrix& X, std::span<const int> y, int out_dims);

// Domain-census features, binary forest, repeated stratified 50/50
// holdout.
AccuracyStat page_vs_query_eval(const Dataset& pages, const Dataset& queries,
                                const TrainConfig& config, int repetitions = 5);

}  // namespace kwfp
