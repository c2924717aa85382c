#include "kwfp/eval.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "kwfp/preprocess.hpp"

namespace kwfp {

namespace {

// Class ids assigned by sorted label order so they are stable across
// runs and platforms.
struct LabelIndex {
    std::vector<std::string> labels;
    std::map<std::string, int> index;

    static LabelIndex over(const Dataset& ds) {
        LabelIndex li;
        li.labels = dataset_labels(ds);
        for (size_t i = 0; i < li.labels.size(); ++i)
            li.index[li.labels[i]] = static_cast<int>(i);
        return li;
    }

    std::vector<int> encode(const Dataset& ds) const {
        std::vector<int> y;
        y.reserve(ds.samples.size());
        for (const auto& s : ds.samples) {
            auto it = index.find(s.meta.keyword_label);
            if (it == index.end())
                throw ValidationError("label \"" + s.meta.keyword_label +
                                      "\" not present in training labels");
            y.push_back(it->second);
        }
        return y;
    }
};

AccuracyStat finish_stat(std::vector<double> per_seed) {
    AccuracyStat st;
    st.mean = mean_of(per_seed);
    st.stddev = stddev_pop(per_seed);
    st.per_seed = std::move(per_seed);
    return st;
}

void require_same_labels(const Dataset& train, const Dataset& test) {
    auto lt = dataset_labels(train);
    auto le = dataset_labels(test);
    if (lt == le) return;
    std::vector<std::string> missing, extra;
    std::set_difference(le.begin(), le.end(), lt.begin(), lt.end(), std::back_inserter(missing));
    std::set_difference(lt.begin(), lt.end(), le.begin(), le.end(), std::back_inserter(extra));
    std::string msg = "train/test label sets differ;";
    if (!missing.empty()) {
        msg += " only in test:";
        for (const auto& k : missing) msg += " " + k;
        msg += ";";
    }
    if (!extra.empty()) {
        msg += " only in train:";
        for (const auto& k : extra) msg += " " + k;
    }
    throw ValidationError(msg);
}

}  // namespace

SplitResult interleaved_split(const Dataset& dataset, const SplitSpec& spec) {
    if (spec.train < 0 || spec.val < 0 || spec.test < 0 ||
        spec.train + spec.val + spec.test < 1)
        throw UsageError("interleaved_split: ratio parts must be non-negative and sum to >= 1");
    const size_t block = static_cast<size_t>(spec.train + spec.val + spec.test);

    std::vector<std::string> keyword_order;
    std::map<std::string, std::vector<size_t>> by_keyword;
    for (size_t i = 0; i < dataset.samples.size(); ++i) {
        const std::string& kw = dataset.samples[i].meta.keyword_label;
        if (!by_keyword.count(kw)) keyword_order.push_back(kw);
        by_keyword[kw].push_back(i);
    }

    SplitResult out;
    out.train.provenance = dataset.provenance + " [train]";
    out.val.provenance = dataset.provenance + " [val]";
    out.test.provenance = dataset.provenance + " [test]";

    for (const std::string& kw : keyword_order) {
        auto& idx = by_keyword[kw];
        std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
            return dataset.samples[a].meta.visit_index < dataset.samples[b].meta.visit_index;
        });
        if (idx.size() < block)
            throw ValidationError("interleaved_split: keyword \"" + kw + "\" has only " +
                                  std::to_string(idx.size()) + " samples, needs " +
                                  std::to_string(block));
        size_t full_blocks = idx.size() / block;
        for (size_t b = 0; b < full_blocks; ++b) {
            size_t base = b * block;
            for (size_t j = 0; j < block; ++j) {
                const TraceSample& s = dataset.samples[idx[base + j]];
                if (j < static_cast<size_t>(spec.train))
                    out.train.samples.push_back(s);
                else if (j < static_cast<size_t>(spec.train + spec.val))
                    out.val.samples.push_back(s);
                else
                    out.test.samples.push_back(s);
            }
        }
    }
    return out;
}

nlohmann::ordered_json ConfusionCounts::to_json() const {
    nlohmann::ordered_json j;
    j["tp"] = tp;
    j["fp"] = fp;
    j["tn"] = tn;
    j["fn"] = fn;
    j["fm"] = fm;
    return j;
}

std::pair<PRCurve, double> prc_and_ap(std::span<const double> scores,
                                      const std::vector<bool>& is_targeted) {
    if (scores.size() != is_targeted.size())
        throw UsageError("prc_and_ap: scores and flags differ in length");
    uint64_t total_targeted = 0;
    for (bool t : is_targeted) total_targeted += t ? 1 : 0;
    if (total_targeted == 0)
        throw ValidationError("prc_and_ap: no targeted samples, recall undefined");

    // Sort samples by score descending; sweep distinct scores as
    // thresholds, classifying score >= threshold as targeted.
    std::vector<size_t> order(scores.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    PRCurve curve;
    double ap = 0, prev_recall = 0;
    uint64_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        double threshold = scores[order[i]];
        while (i < order.size() && scores[order[i]] == threshold) {
            if (is_targeted[order[i]]) ++tp; else ++fp;
            ++i;
        }
        double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        double recall = static_cast<double>(tp) / static_cast<double>(total_targeted);
        curve.points.push_back({threshold, precision, recall});
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return {curve, ap};
}

nlohmann::ordered_json EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["experiment_id"] = experiment_id;
    nlohmann::ordered_json jm = nlohmann::ordered_json::object();
    for (const auto& [k, v] : metrics) jm[k] = v;
    j["metrics"] = jm;
    if (counts) j["counts"] = counts->to_json();
    if (prc) {
        nlohmann::ordered_json jp = nlohmann::ordered_json::array();
        for (const auto& p : prc->points)
            jp.push_back({{"threshold", p.threshold},
                          {"precision", p.precision},
                          {"recall", p.recall}});
        j["prc"] = jp;
    }
    if (!per_class.empty()) j["per_class"] = per_class;
    j["config"] = config_snapshot;
    return j;
}

std::string EvalReport::metrics_csv() const {
    std::string out = "metric,value\n";
    for (const auto& [k, v] : metrics) out += k + "," + std::to_string(v) + "\n";
    return out;
}

TrainedModel train_model(const Dataset& train, FeatureSetId id, const FeatureParams& params,
                         TrainConfig config) {
    TrainedModel model;
    model.features = id;
    model.params = params;
    model.space = fit_vector_space(train, id, params);
    Matrix X = featurize(model.space, train, id, params, config.n_jobs);
    LabelIndex li = LabelIndex::over(train);
    model.forest = train_forest(X, li.encode(train), li.labels, config);
    return model;
}

TrainedModel train_binary_model(const Dataset& train, FeatureSetId id,
                                const FeatureParams& params, TrainConfig config) {
    Dataset relabeled = train;
    for (auto& s : relabeled.samples)
        s.meta.keyword_label = s.is_targeted() ? kTargetedLabel : kBinaryNonTargetedLabel;
    auto labels = dataset_labels(relabeled);
    if (labels.size() != 2)
        throw ValidationError(
            "binary training needs both targeted and non-targeted samples");
    return train_model(relabeled, id, params, config);
}

double targeted_score(const TrainedModel& binary, const TraceSample& sample) {
    auto x = vectorize(binary.space, sample, binary.features, binary.params);
    auto proba = predict_proba(binary.forest, x);
    for (size_t c = 0; c < binary.forest.class_labels.size(); ++c)
        if (binary.forest.class_labels[c] == kTargetedLabel) return proba[c];
    throw ValidationError("model has no targeted class");
}

AccuracyStat closed_world_eval(const Dataset& train, const Dataset& test,
                               const EvalOptions& options) {
    require_same_labels(train, test);
    VectorSpace space = fit_vector_space(train, options.features, options.params);
    Matrix Xtr = featurize(space, train, options.features, options.params,
                           options.train_config.n_jobs);
    Matrix Xte = featurize(space, test, options.features, options.params,
                           options.train_config.n_jobs);
    LabelIndex li = LabelIndex::over(train);
    auto ytr = li.encode(train);
    auto yte = li.encode(test);

    std::vector<double> per_seed;
    for (int r = 0; r < options.repetitions; ++r) {
        TrainConfig cfg = options.train_config;
        cfg.rng_seed = mix_seed(options.train_config.rng_seed, static_cast<uint64_t>(r));
        Forest forest = train_forest(Xtr, ytr, li.labels, cfg);
        size_t correct = 0;
        for (size_t i = 0; i < Xte.rows; ++i)
            if (predict_index(forest, Xte.row(i)) == yte[i]) ++correct;
        per_seed.push_back(Xte.rows == 0 ? 0.0
                                         : static_cast<double>(correct) /
                                               static_cast<double>(Xte.rows));
    }
    return finish_stat(std::move(per_seed));
}

EvalReport binary_eval(const Dataset& train, const Dataset& test, const EvalOptions& options) {
    TrainedModel model = train_binary_model(train, options.features, options.params,
                                            options.train_config);

    std::vector<double> scores;
    std::vector<bool> truth;
    scores.reserve(test.samples.size());
    for (const auto& s : test.samples) {
        scores.push_back(targeted_score(model, s));
        truth.push_back(s.is_targeted());
    }
    auto [curve, ap] = prc_and_ap(scores, truth);

    ConfusionCounts counts;
    for (size_t i = 0; i < scores.size(); ++i) {
        bool predicted = scores[i] >= 0.5;
        if (predicted && truth[i]) ++counts.tp;
        else if (predicted && !truth[i]) ++counts.fp;
        else if (!predicted && truth[i]) ++counts.fn;
        else ++counts.tn;
    }

    EvalReport report;
    report.experiment_id = "binary";
    report.metrics["ap"] = ap;
    if (counts.tp + counts.fp > 0)
        report.metrics["precision_at_0.5"] =
            static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fp);
    report.metrics["recall_at_0.5"] =
        static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fn);
    report.counts = counts;
    report.prc = curve;
    report.config_snapshot = options.train_config.to_json();
    return report;
}

EvalReport multilevel_eval(const TrainedModel& binary, const TrainedModel& keyword,
                           const Dataset& test) {
    ConfusionCounts counts;
    uint64_t second_correct = 0;
    for (const auto& s : test.samples) {
        bool predicted_targeted = targeted_score(binary, s) >= 0.5;
        if (s.is_targeted()) {
            if (!predicted_targeted) {
                ++counts.fn;
                continue;
            }
            ++counts.tp;
            auto x = vectorize(keyword.space, s, keyword.features, keyword.params);
            if (predict(keyword.forest, x) == s.meta.keyword_label) ++second_correct;
        } else {
            predicted_targeted ? ++counts.fp : ++counts.tn;
        }
    }

    EvalReport report;
    report.experiment_id = "multilevel";
    if (counts.fp + counts.tn > 0)
        report.metrics["fpr"] =
            static_cast<double>(counts.fp) / static_cast<double>(counts.fp + counts.tn);
    if (counts.tp + counts.fn > 0)
        report.metrics["fnr"] =
            static_cast<double>(counts.fn) / static_cast<double>(counts.tp + counts.fn);
    if (counts.tp > 0)
        report.metrics["accuracy_ml"] =
            static_cast<double>(second_correct) / static_cast<double>(counts.tp);
    else
        report.per_class["accuracy_ml"] = "undefined (no true positives)";
    report.counts = counts;
    return report;
}

EvalReport multiclass_eval(const TrainedModel& model, const Dataset& test) {
    bool has_sentinel = false;
    for (const auto& l : model.forest.class_labels)
        if (l == kNonTargetedLabel) has_sentinel = true;
    if (!has_sentinel)
        throw ValidationError("multiclass_eval: model was trained without the sentinel label");

    ConfusionCounts counts;
    uint64_t nt_total = 0, nt_flagged = 0;
    for (const auto& s : test.samples) {
        auto x = vectorize(model.space, s, model.features, model.params);
        const std::string& pred = predict(model.forest, x);
        if (s.is_targeted()) {
            if (pred == s.meta.keyword_label) ++counts.tp;
            else if (pred == kNonTargetedLabel) ++counts.fn;
            else ++counts.fm;
        } else {
            ++nt_total;
            if (pred != kNonTargetedLabel) { ++nt_flagged; ++counts.fp; }
            else ++counts.tn;
        }
    }

    EvalReport report;
    report.experiment_id = "multiclass";
    uint64_t targeted_total = counts.tp + counts.fn + counts.fm;
    if (targeted_total > 0) {
        report.metrics["fmr"] =
            static_cast<double>(counts.fm) / static_cast<double>(targeted_total);
        report.metrics["tpr"] =
            static_cast<double>(counts.tp) / static_cast<double>(targeted_total);
    }
    if (nt_total > 0)
        report.metrics["fpr"] = static_cast<double>(nt_flagged) / static_cast<double>(nt_total);
    report.counts = counts;
    return report;
}

std::vector<CrossCell> cross_platform_eval(
    const std::vector<std::pair<std::string, const Dataset*>>& trains,
    const std::vector<std::pair<std::string, const Dataset*>>& tests,
    const EvalOptions& options) {
    std::vector<CrossCell> cells;
    for (const auto& [train_id, train] : trains)
        for (const auto& [test_id, test] : tests)
            cells.push_back({train_id, test_id, closed_world_eval(*train, *test, options)});
    return cells;
}

std::vector<GapResult> time_gap_eval(
    const Dataset& train, const std::vector<std::pair<std::string, const Dataset*>>& tests,
    const EvalOptions& options) {
    VectorSpace space = fit_vector_space(train, options.features, options.params);
    Matrix Xtr = featurize(space, train, options.features, options.params,
                           options.train_config.n_jobs);
    LabelIndex li = LabelIndex::over(train);
    auto ytr = li.encode(train);

    std::vector<Forest> forests;
    for (int r = 0; r < options.repetitions; ++r) {
        TrainConfig cfg = options.train_config;
        cfg.rng_seed = mix_seed(options.train_config.rng_seed, static_cast<uint64_t>(r));
        forests.push_back(train_forest(Xtr, ytr, li.labels, cfg));
    }

    std::vector<GapResult> out;
    for (const auto& [gap, test] : tests) {
        require_same_labels(train, *test);
        Matrix Xte = featurize(space, *test, options.features, options.params,
                               options.train_config.n_jobs);
        auto yte = li.encode(*test);
        std::vector<double> per_seed;
        for (const Forest& forest : forests) {
            size_t correct = 0;
            for (size_t i = 0; i < Xte.rows; ++i)
                if (predict_index(forest, Xte.row(i)) == yte[i]) ++correct;
            per_seed.push_back(Xte.rows == 0 ? 0.0
                                             : static_cast<double>(correct) /
                                                   static_cast<double>(Xte.rows));
        }
        out.push_back({gap, finish_stat(std::move(per_seed))});
    }
    return out;
}

AccuracyStat page_vs_query_eval(const Dataset& pages, const Dataset& queries,
                                const TrainConfig& config, int repetitions) {
    if (pages.samples.empty() || queries.samples.empty())
        throw UsageError("page_vs_query_eval: both datasets must be non-empty");

    // Census features over the union of observed second-level domains.
    std::set<std::string> domains;
    auto collect = [&](const Dataset& ds) {
        for (const auto& s : ds.samples)
            for (const auto& [d, cnt] : domain_census(s).counts) domains.insert(d);
    };
    collect(pages);
    collect(queries);
    std::vector<std::string> domain_order(domains.begin(), domains.end());
    std::map<std::string, size_t> domain_index;
    for (size_t i = 0; i < domain_order.size(); ++i) domain_index[domain_order[i]] = i;

    const size_t n = pages.samples.size() + queries.samples.size();
    Matrix X(n, domain_order.size());
    std::vector<int> y(n);
    size_t row = 0;
    auto add = [&](const Dataset& ds, int label) {
        for (const auto& s : ds.samples) {
            for (const auto& [d, cnt] : domain_census(s).counts)
                X.at(row, domain_index[d]) = static_cast<double>(cnt);
            y[row] = label;
            ++row;
        }
    };
    add(pages, 0);
    add(queries, 1);

    std::vector<double> per_seed;
    Rng master(config.rng_seed);
    for (int r = 0; r < repetitions; ++r) {
        // Stratified 50/50 holdout.
        Rng rng = master.derive({0x50564BULL, static_cast<uint64_t>(r)});
        std::vector<size_t> train_idx, test_idx;
        for (int label : {0, 1}) {
            std::vector<size_t> rows_for;
            for (size_t i = 0; i < n; ++i)
                if (y[i] == label) rows_for.push_back(i);
            rng.shuffle(rows_for);
            size_t half = rows_for.size() / 2;
            train_idx.insert(train_idx.end(), rows_for.begin(), rows_for.begin() + half);
            test_idx.insert(test_idx.end(), rows_for.begin() + half, rows_for.end());
        }
        Matrix Xtr(train_idx.size(), X.cols), Xte(test_idx.size(), X.cols);
        std::vector<int> ytr(train_idx.size()), yte(test_idx.size());
        for (size_t i = 0; i < train_idx.size(); ++i) {
            std::copy(X.row(train_idx[i]).begin(), X.row(train_idx[i]).end(), Xtr.row(i).begin());
            ytr[i] = y[train_idx[i]];
        }
        for (size_t i = 0; i < test_idx.size(); ++i) {
            std::copy(X.row(test_idx[i]).begin(), X.row(test_idx[i]).end(), Xte.row(i).begin());
            yte[i] = y[test_idx[i]];
        }
        TrainConfig cfg = config;
        cfg.rng_seed = mix_seed(config.rng_seed, static_cast<uint64_t>(r));
        Forest forest = train_forest(Xtr, ytr, {"page", "query"}, cfg);
        size_t correct = 0;
        for (size_t i = 0; i < Xte.rows; ++i)
            if (predict_index(forest, Xte.row(i)) == yte[i]) ++correct;
        per_seed.push_back(static_cast<double>(correct) / static_cast<double>(Xte.rows));
    }
    return finish_stat(std::move(per_seed));
}

}  // namespace kwfp
