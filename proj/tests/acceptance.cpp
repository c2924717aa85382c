// Acceptance suite: one self-contained check per release criterion,
// printed as a PASS/FAIL line. Exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kwfp/countermeasures.hpp"
#include "kwfp/eval.hpp"
#include "kwfp/features.hpp"
#include "kwfp/forest.hpp"
#include "kwfp/pcap.hpp"
#include "kwfp/preprocess.hpp"
#include "kwfp/synth.hpp"
#include "kwfp/trace_io.hpp"

#include "support/pcap_builder.hpp"
#include "support/random_data.hpp"

using namespace kwfp;
namespace fs = std::filesystem;

namespace {

struct Check {
    int id;
    std::string name;
    std::function<void()> body;
};

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1
void check_roundtrip() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(810);
    auto path = fs::temp_directory_path() / "kwfp_acceptance_roundtrip.jsonl";
    for (int i = 0; i < 100; ++i) {
        Dataset ds = testdata::random_dataset(rng);
        save_dataset(ds, path);
        Dataset back = load_dataset(path);
        require(back == ds, "save->load changed dataset " + std::to_string(i));
    }
    double elapsed = seconds_since(t0);
    require(elapsed < 10.0, "round-trip took " + std::to_string(elapsed) + "s, budget 10s");
}

// ---------------------------------------------------------------- 2
void check_ingest_goldens() {
    using fixture::ip4;
    const auto client = ip4(10, 0, 0, 1);
    const auto server = ip4(93, 184, 216, 34);

    // SYN handshake with one data packet per direction
    auto handshake = [&](bool swapped) {
        fixture::PcapBuilder b(swapped);
        b.add_tcp(1000, client, 50000, server, 443, fixture::tcp::kSyn, {});
        b.add_tcp(2000, server, 443, client, 50000,
                  fixture::tcp::kSyn | fixture::tcp::kAck, {});
        b.add_tcp(3000, client, 50000, server, 443, fixture::tcp::kAck, {});
        b.add_tcp(4000, client, 50000, server, 443, fixture::tcp::kPsh,
                  std::vector<uint8_t>(100, 0x41), 1);
        b.add_tcp(5000, server, 443, client, 50000, fixture::tcp::kPsh,
                  std::vector<uint8_t>(1500, 0x42), 1);
        return b.bytes();
    };
    for (bool swapped : {false, true}) {
        auto conns = reassemble_flows(parse_pcap(handshake(swapped)));
        require(conns.size() == 1, "handshake fixture: expected 1 connection");
        require(conns[0].packets.size() == 2, "handshake fixture: expected 2 data packets");
        require(conns[0].packets[0].dir == Direction::Outgoing &&
                    conns[0].packets[0].size == 100,
                "handshake fixture: first packet should be (-,100)");
        require(conns[0].packets[1].dir == Direction::Incoming &&
                    conns[0].packets[1].size == 1500,
                "handshake fixture: second packet should be (+,1500)");
    }

    // SNI ClientHello
    {
        fixture::PcapBuilder b;
        b.add_tcp(1000, client, 50001, server, 443, fixture::tcp::kSyn, {});
        b.add_tcp(2000, client, 50001, server, 443, fixture::tcp::kPsh,
                  fixture::tls_client_hello("duckduckgo.com"), 1);
        auto conns = reassemble_flows(parse_pcap(b.bytes()));
        require(conns.size() == 1 && conns[0].server_name.has_value() &&
                    *conns[0].server_name == "duckduckgo.com",
                "SNI fixture: hostname not recovered");
    }

    // Interleaved flows keep their identity and order
    {
        fixture::PcapBuilder b;
        b.add_tcp(1000, client, 50001, server, 443, fixture::tcp::kSyn, {});
        b.add_tcp(1100, client, 50002, server, 443, fixture::tcp::kSyn, {});
        b.add_tcp(1200, client, 50001, server, 443, fixture::tcp::kPsh,
                  std::vector<uint8_t>(10, 1), 1);
        b.add_tcp(1300, client, 50002, server, 443, fixture::tcp::kPsh,
                  std::vector<uint8_t>(20, 2), 1);
        b.add_tcp(1400, server, 443, client, 50002, fixture::tcp::kPsh,
                  std::vector<uint8_t>(30, 3), 1);
        auto conns = reassemble_flows(parse_pcap(b.bytes()));
        require(conns.size() == 2, "interleaved fixture: expected 2 connections");
        require(conns[0].packets.size() == 1 && conns[0].packets[0].size == 10,
                "interleaved fixture: first flow content wrong");
        require(conns[1].packets.size() == 2 && conns[1].packets[1].size == 30,
                "interleaved fixture: second flow content wrong");
        require(conns[0].conn_id == 0 && conns[1].conn_id == 1,
                "interleaved fixture: connection order wrong");
    }
}

// ---------------------------------------------------------------- 3
void check_feature_oracles() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(811);
    for (int i = 0; i < 1000; ++i) {
        TraceSample s = testdata::random_sample(rng);

        // PSC equals brute-force counting
        std::map<std::string, double> brute;
        for (const auto& c : s.connections)
            for (const auto& p : c.packets) {
                char buf[16];
                std::snprintf(buf, sizeof(buf), "psc|%c|%05d", direction_char(p.dir), p.size);
                brute[buf] += 1.0;
            }
        FeatureVector fv = psc(s);
        require(fv.size() == brute.size(), "psc key set differs from brute force");
        for (size_t f = 0; f < fv.size(); ++f)
            require(brute.at(fv.names[f]) == fv.values[f], "psc count differs at " + fv.names[f]);

        // bursts tile the sequence and alternate
        auto merged = merged_packets(s);
        auto bursts = extract_bursts(s, BurstScope::GlobalByTime);
        size_t covered = 0;
        for (size_t b = 0; b < bursts.size(); ++b) {
            for (uint32_t k = 0; k < bursts[b].packet_count; ++k)
                require(merged[covered + k].dir == bursts[b].dir, "burst direction mismatch");
            covered += bursts[b].packet_count;
            if (b > 0)
                require(bursts[b].dir != bursts[b - 1].dir, "adjacent bursts share direction");
        }
        require(covered == merged.size(), "bursts do not tile the packet sequence");

        // reversed cumulative final value equals the unsigned byte sum
        FeatureVector extras = wfinpp_extras(s);
        double unsigned_sum = 0;
        for (const auto& p : merged) unsigned_sum += p.size;
        for (size_t f = 0; f < extras.size(); ++f)
            if (extras.names[f] == "reversed_cumulative_packet_sizes|099")
                require(std::abs(extras.values[f] - unsigned_sum) < 1e-9,
                        "reversed cumulative endpoint mismatch");
    }
    double elapsed = seconds_since(t0);
    require(elapsed < 30.0, "feature oracles took " + std::to_string(elapsed) + "s, budget 30s");
}

// ---------------------------------------------------------------- 4
void check_metric_oracles() {
    // worked AP example
    {
        std::vector<double> scores{0.9, 0.8, 0.7};
        std::vector<bool> targeted{true, false, true};
        auto [curve, ap] = prc_and_ap(scores, targeted);
        require(std::abs(ap - (0.5 + 0.5 * 2.0 / 3.0)) < 1e-12, "worked AP example mismatch");
    }

    // brute force over every distinct threshold
    Rng rng(812);
    for (int it = 0; it < 100; ++it) {
        size_t n = 1 + rng.uniform_below(60);
        std::vector<double> scores;
        std::vector<bool> targeted;
        for (size_t i = 0; i < n; ++i) {
            scores.push_back(static_cast<double>(rng.uniform_below(12)) / 12.0);
            targeted.push_back(rng.uniform01() < 0.35);
        }
        targeted[0] = true;

        auto [curve, ap] = prc_and_ap(scores, targeted);
        std::vector<double> thresholds(scores);
        std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
        thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
        uint64_t total_targeted = 0;
        for (bool t : targeted) total_targeted += t ? 1 : 0;
        double brute = 0, prev_recall = 0;
        for (double t : thresholds) {
            uint64_t tp = 0, fp = 0;
            for (size_t i = 0; i < n; ++i)
                if (scores[i] >= t) (targeted[i] ? tp : fp)++;
            double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
            double recall = static_cast<double>(tp) / static_cast<double>(total_targeted);
            brute += (recall - prev_recall) * precision;
            prev_recall = recall;
        }
        require(std::abs(ap - brute) <= 1e-9, "AP differs from brute force enumeration");
    }

    // multiclass partition identity on a synthetic open world
    {
        World world = build_world(813, 5, stable_profile(), 20);
        Dataset train, test;
        for (const auto& tmpl : world.templates) {
            int tv = tmpl.background ? 1 : 6;
            for (int v = 0; v < tv; ++v)
                train.samples.push_back(sample_trace(world, tmpl.keyword, v));
            for (int v = tv; v < tv + 2; ++v)
                test.samples.push_back(sample_trace(world, tmpl.keyword, v));
        }
        TrainConfig tc;
        tc.n_trees = 60;
        tc.rng_seed = 4;
        TrainedModel model = train_model(train, FeatureSetId::Psc, FeatureParams{}, tc);
        EvalReport report = multiclass_eval(model, test);
        uint64_t targeted_total = 0;
        for (const auto& s : test.samples) targeted_total += s.is_targeted() ? 1 : 0;
        require(report.counts->tp + report.counts->fn + report.counts->fm == targeted_total,
                "multiclass TP+FN+FM must equal the targeted test count");
        double tpr = report.metrics.at("tpr"), fmr = report.metrics.at("fmr");
        double fn_frac = static_cast<double>(report.counts->fn) /
                         static_cast<double>(targeted_total);
        require(std::abs(tpr + fmr + fn_frac - 1.0) < 1e-12, "multiclass rate partition broken");
    }

    // FNR is exactly invariant to extra non-targeted test samples
    {
        World world = build_world(814, 4, stable_profile(), 30);
        Dataset train, test_small, extra;
        for (const auto& tmpl : world.templates) {
            int tv = tmpl.background ? 1 : 6;
            for (int v = 0; v < tv; ++v)
                train.samples.push_back(sample_trace(world, tmpl.keyword, v));
            if (!tmpl.background)
                for (int v = tv; v < tv + 2; ++v)
                    test_small.samples.push_back(sample_trace(world, tmpl.keyword, v));
            else
                extra.samples.push_back(sample_trace(world, tmpl.keyword, 1));
        }
        TrainConfig tc;
        tc.n_trees = 60;
        tc.rng_seed = 5;
        TrainedModel binary = train_binary_model(train, FeatureSetId::Psc, FeatureParams{}, tc);
        Dataset targeted_train;
        for (const auto& s : train.samples)
            if (s.is_targeted()) targeted_train.samples.push_back(s);
        TrainedModel keyword = train_model(targeted_train, FeatureSetId::Psc, FeatureParams{}, tc);

        double fnr_small = multilevel_eval(binary, keyword, test_small).metrics.at("fnr");
        Dataset test_big = test_small;
        test_big.samples.insert(test_big.samples.end(), extra.samples.begin(),
                                extra.samples.end());
        double fnr_big = multilevel_eval(binary, keyword, test_big).metrics.at("fnr");
        require(fnr_small == fnr_big, "FNR changed when non-targeted samples were added");
    }
}

// ---------------------------------------------------------------- 5
void check_split_exactness() {
    Dataset ds54, ds40;
    for (int kw = 0; kw < 3; ++kw)
        for (int v = 0; v < 54; ++v) {
            SampleMeta m;
            m.keyword_label = "kw" + std::to_string(kw);
            m.visit_index = v;
            Connection c;
            c.packets = {{0, Direction::Outgoing, 100}};
            ds54.samples.push_back(make_sample(m, {c}));
        }
    SplitResult s54 = interleaved_split(ds54, SplitSpec{4, 1, 1});
    require(s54.train.samples.size() == 3 * 36 && s54.val.samples.size() == 3 * 9 &&
                s54.test.samples.size() == 3 * 9,
            "54 visits at 4:1:1 must split 36/9/9");
    std::set<int> train_visits;
    for (const auto& s : s54.train.samples)
        if (s.meta.keyword_label == "kw0") train_visits.insert(s.meta.visit_index);
    for (int block = 0; block < 9; ++block)
        for (int j = 0; j < 4; ++j)
            require(train_visits.count(block * 6 + j) == 1,
                    "train indices must follow the {0-3}/{4}/{5} block pattern");

    for (int v = 0; v < 40; ++v) {
        SampleMeta m;
        m.keyword_label = "kw";
        m.visit_index = v;
        Connection c;
        c.packets = {{0, Direction::Outgoing, 100}};
        ds40.samples.push_back(make_sample(m, {c}));
    }
    SplitResult s40 = interleaved_split(ds40, SplitSpec{8, 1, 1});
    require(s40.train.samples.size() == 32 && s40.val.samples.size() == 4 &&
                s40.test.samples.size() == 4,
            "40 visits at 8:1:1 must split 32/4/4");
}

// shared state between criteria 6 and 9
struct StableWorldEval {
    Dataset train, test;
    VectorSpace space;
    Matrix Xtr, Xte;
    std::vector<int> ytr, yte;
    std::vector<std::string> labels;
};

StableWorldEval g_world_eval;

std::vector<int> encode_labels(const Dataset& ds, const std::vector<std::string>& labels) {
    std::map<std::string, int> index;
    for (size_t i = 0; i < labels.size(); ++i) index[labels[i]] = static_cast<int>(i);
    std::vector<int> y;
    for (const auto& s : ds.samples) y.push_back(index.at(s.meta.keyword_label));
    return y;
}

// ---------------------------------------------------------------- 6
void check_learner_soundness() {
    auto t0 = std::chrono::steady_clock::now();

    World world = build_world(816, 50, stable_profile());
    Dataset all = generate_dataset(world, 54);
    SplitResult split = interleaved_split(all, SplitSpec{4, 1, 1});
    Dataset train = merge_datasets({&split.train, &split.val});  // 45 per keyword

    StableWorldEval& ev = g_world_eval;
    ev.train = train;
    ev.test = split.test;
    ev.space = fit_vector_space(train, FeatureSetId::Psc);
    ev.labels = dataset_labels(train);
    ev.Xtr = featurize(ev.space, train, FeatureSetId::Psc, {}, 0);
    ev.Xte = featurize(ev.space, split.test, FeatureSetId::Psc, {}, 0);
    ev.ytr = encode_labels(train, ev.labels);
    ev.yte = encode_labels(split.test, ev.labels);

    TrainConfig tc;
    tc.n_trees = 100;
    tc.rng_seed = 610;
    tc.n_jobs = 0;
    Forest forest = train_forest(ev.Xtr, ev.ytr, ev.labels, tc);
    size_t correct = 0;
    std::vector<int> first_preds;
    for (size_t i = 0; i < ev.Xte.rows; ++i) {
        int p = predict_index(forest, ev.Xte.row(i));
        first_preds.push_back(p);
        if (p == ev.yte[i]) ++correct;
    }
    double acc = static_cast<double>(correct) / static_cast<double>(ev.Xte.rows);
    require(acc >= 0.95, "closed-world accuracy " + std::to_string(acc) + " below 0.95");

    // identical seeds reproduce identical predictions
    Forest again = train_forest(ev.Xtr, ev.ytr, ev.labels, tc);
    for (size_t i = 0; i < ev.Xte.rows; ++i)
        require(predict_index(again, ev.Xte.row(i)) == first_preds[i],
                "same seed produced different predictions");

    // permuted labels collapse to chance (3 sigma of 1/50)
    std::vector<int> shuffled = ev.ytr;
    Rng rng(817);
    rng.shuffle(shuffled);
    Forest chance_forest = train_forest(ev.Xtr, shuffled, ev.labels, tc);
    size_t chance_correct = 0;
    for (size_t i = 0; i < ev.Xte.rows; ++i)
        if (predict_index(chance_forest, ev.Xte.row(i)) == ev.yte[i]) ++chance_correct;
    double p0 = 1.0 / 50.0;
    double sigma = std::sqrt(p0 * (1 - p0) / static_cast<double>(ev.Xte.rows));
    double chance_acc = static_cast<double>(chance_correct) / static_cast<double>(ev.Xte.rows);
    require(std::abs(chance_acc - p0) <= 3 * sigma,
            "permuted-label accuracy " + std::to_string(chance_acc) + " not at chance");

    double elapsed = seconds_since(t0);
    require(elapsed < 120.0, "learner check took " + std::to_string(elapsed) + "s, budget 120s");
}

// ---------------------------------------------------------------- 7
void check_selection_sanity() {
    Rng rng(818);
    const int per_class = 30;
    const int n = 4 * per_class;
    Matrix X(static_cast<size_t>(n), 6);
    std::vector<int> y(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        int cls = i % 4;
        y[static_cast<size_t>(i)] = cls;
        X.at(i, 0) = (cls >> 1) * 10.0 + rng.normal(0, 0.3);
        X.at(i, 1) = (cls & 1) * 10.0 + rng.normal(0, 0.3);
        for (int f = 2; f < 6; ++f) X.at(i, f) = rng.normal(0, 1);
    }
    Matrix Xv(static_cast<size_t>(n / 2), 6);
    std::vector<int> yv(static_cast<size_t>(n / 2));
    for (int i = 0; i < n / 2; ++i) {
        int cls = i % 4;
        yv[static_cast<size_t>(i)] = cls;
        Xv.at(i, 0) = (cls >> 1) * 10.0 + rng.normal(0, 0.3);
        Xv.at(i, 1) = (cls & 1) * 10.0 + rng.normal(0, 0.3);
        for (int f = 2; f < 6; ++f) Xv.at(i, f) = rng.normal(0, 1);
    }

    std::vector<std::string> catalog{"catA", "catB", "noise1", "noise1", "noise2", "noise2"};
    TrainConfig tc;
    tc.n_trees = 80;
    tc.k_candidate_features = 6;
    tc.rng_seed = 819;
    std::vector<int> grid{1, 2, 3, 4};
    auto result = forward_select(X, y, Xv, yv, catalog, {"c0", "c1", "c2", "c3"}, tc, grid);

    std::set<std::string> top2(result.ranked_categories.begin(),
                               result.ranked_categories.begin() + 2);
    require(top2 == std::set<std::string>{"catA", "catB"},
            "planted categories are not ranked in the top 2");
    double acc1 = 0, acc2 = 0;
    for (const auto& [nn, a] : result.accuracy_by_n) {
        if (nn == 1) acc1 = a;
        if (nn == 2) acc2 = a;
    }
    require(acc2 >= acc1, "accuracy at N=2 fell below accuracy at N=1");
    require(result.best_accuracy >= acc1, "best N is not at least as good as N=1");
}

// ---------------------------------------------------------------- 8
void check_cross_platform_collapse() {
    World world = build_world(820, 20, stable_profile());
    Dataset all_a = generate_dataset(world, 54);

    // browser B shifts every packet size into a disjoint range
    Dataset all_b = all_a;
    for (auto& s : all_b.samples) {
        s.meta.browser = "synthB";
        for (auto& c : s.connections)
            for (auto& p : c.packets) p.size += 1500;
    }

    auto split_a = interleaved_split(all_a, SplitSpec{4, 1, 1});
    auto split_b = interleaved_split(all_b, SplitSpec{4, 1, 1});
    Dataset train_a = merge_datasets({&split_a.train, &split_a.val});
    Dataset train_b = merge_datasets({&split_b.train, &split_b.val});
    Dataset merged = merge_datasets({&train_a, &train_b});

    EvalOptions opt;
    opt.features = FeatureSetId::Psc;
    opt.train_config.n_trees = 100;
    opt.train_config.rng_seed = 821;
    opt.train_config.n_jobs = 0;
    opt.repetitions = 1;

    auto cells = cross_platform_eval(
        {{"A", &train_a}, {"B", &train_b}, {"merged", &merged}},
        {{"A", &split_a.test}, {"B", &split_b.test}}, opt);

    std::map<std::pair<std::string, std::string>, double> acc;
    for (const auto& cell : cells) acc[{cell.train_id, cell.test_id}] = cell.accuracy.mean;

    const double chance = 1.0 / 20.0;
    require(acc[{"A", "A"}] >= 0.95, "matched-platform accuracy (A) below 0.95");
    require(acc[{"B", "B"}] >= 0.95, "matched-platform accuracy (B) below 0.95");
    require(acc[{"A", "B"}] <= 2 * chance, "cross-platform A->B did not collapse");
    require(acc[{"B", "A"}] <= 2 * chance, "cross-platform B->A did not collapse");
    require(acc[{"merged", "A"}] >= 0.90, "merged training failed on platform A");
    require(acc[{"merged", "B"}] >= 0.90, "merged training failed on platform B");
}

// ---------------------------------------------------------------- 9
void check_countermeasures() {
    // exact pad-to-MTU overhead on a random corpus
    Rng rng(822);
    Dataset corpus;
    for (int i = 0; i < 50; ++i) corpus.samples.push_back(testdata::random_sample(rng));
    CmConfig cm;
    require(cm.mtu == 1500 && cm.mss == 1000, "MTU/MSS defaults must be 1500/1000");
    auto [padded, reports] = apply_defense(corpus, Defense::PadToMtu, cm);
    OverheadReport total = bandwidth_overhead(corpus, padded);
    uint64_t orig = 0, pad = 0;
    for (const auto& s : corpus.samples)
        for (const auto& c : s.connections)
            for (const auto& p : c.packets) {
                orig += static_cast<uint64_t>(p.size);
                pad += static_cast<uint64_t>(cm.mtu - p.size);
            }
    require(total.original_bytes == orig, "overhead original bytes mismatch");
    require(total.transformed_bytes == orig + pad, "overhead transformed bytes mismatch");
    require(std::abs(total.overhead - static_cast<double>(pad) / static_cast<double>(orig)) <
                1e-12,
            "pad-to-MTU overhead must equal sum(mtu - s) / sum(s) exactly");

    // classes that differ only in sizes become indistinguishable
    {
        EngineProfile profile = stable_profile();
        profile.shared_skeleton = true;
        World world = build_world(823, 20, profile);
        Dataset all = generate_dataset(world, 12);
        SplitResult split = interleaved_split(all, SplitSpec{4, 1, 1});
        Dataset train = merge_datasets({&split.train, &split.val});

        EvalOptions opt;
        opt.features = FeatureSetId::Psc;
        opt.train_config.n_trees = 100;
        opt.train_config.rng_seed = 824;
        opt.train_config.n_jobs = 0;
        opt.repetitions = 1;
        double before = closed_world_eval(train, split.test, opt).mean;
        require(before >= 0.95, "pre-transform accuracy should be high, got " +
                                    std::to_string(before));

        auto [train_padded, r1] = apply_defense(train, Defense::PadToMtu, cm);
        auto [test_padded, r2] = apply_defense(split.test, Defense::PadToMtu, cm);
        double after = closed_world_eval(train_padded, test_padded, opt).mean;
        require(after <= 2.0 / 20.0, "post-transform accuracy " + std::to_string(after) +
                                         " above twice chance");
    }

    // HTTPOS mean incoming pad
    {
        CmConfig hc;
        hc.rng_seed = 825;
        const int32_t s = 1000;
        const int n = 10000;
        Connection c;
        c.server_port = 443;
        for (int i = 0; i < n; ++i) c.packets.push_back({i, Direction::Incoming, s});
        SampleMeta m;
        m.keyword_label = "kw";
        auto [out, report] = httpos_transform(make_sample(m, {c}), hc);
        double mean_pad = (static_cast<double>(report.transformed_bytes) -
                           static_cast<double>(report.original_bytes)) /
                          n;
        double expected = (3.0 * hc.mss - s) / 2.0;
        require(std::abs(mean_pad - expected) / expected < 0.05,
                "HTTPOS mean pad " + std::to_string(mean_pad) + " not within 5% of " +
                    std::to_string(expected));
    }
}

// ---------------------------------------------------------------- 10
void check_time_gap_direction() {
    EngineProfile drifty = stable_profile();
    drifty.drift_rate = 1.0;
    World world = build_world(826, 20, drifty);
    Dataset train = generate_dataset(world, 20, 0.0);

    std::vector<double> gaps{0.0, 2.0, 4.0, 8.0, 16.0};
    std::vector<Dataset> tests;
    for (double g : gaps) {
        World w = world;
        Dataset ds;
        for (const auto& tmpl : w.templates)
            for (int v = 20; v < 26; ++v)
                ds.samples.push_back(sample_trace(w, tmpl.keyword, v, g));
        tests.push_back(std::move(ds));
    }
    std::vector<std::pair<std::string, const Dataset*>> refs;
    for (size_t i = 0; i < gaps.size(); ++i)
        refs.emplace_back("gap" + std::to_string(gaps[i]), &tests[i]);

    EvalOptions opt;
    opt.features = FeatureSetId::Psc;
    opt.train_config.n_trees = 80;
    opt.train_config.rng_seed = 827;
    opt.train_config.n_jobs = 0;
    opt.repetitions = 1;
    auto results = time_gap_eval(train, refs, opt);
    require(results.size() == gaps.size(), "missing gap buckets");
    require(results.front().accuracy.mean >= 0.9, "gap-0 accuracy unexpectedly low");
    for (size_t i = 1; i < results.size(); ++i)
        require(results[i].accuracy.mean <= results[i - 1].accuracy.mean + 1e-9,
                "accuracy increased between gap buckets " + std::to_string(i - 1) + " and " +
                    std::to_string(i));
    require(results.back().accuracy.mean < results.front().accuracy.mean,
            "drift produced no overall decay");

    // zero drift stays flat within noise
    EngineProfile still = stable_profile();
    World world0 = build_world(826, 20, still);
    Dataset train0 = generate_dataset(world0, 20, 0.0);
    std::vector<Dataset> tests0;
    for (double g : gaps) {
        Dataset ds;
        for (const auto& tmpl : world0.templates)
            for (int v = 20; v < 26; ++v)
                ds.samples.push_back(sample_trace(world0, tmpl.keyword, v, g));
        tests0.push_back(std::move(ds));
    }
    std::vector<std::pair<std::string, const Dataset*>> refs0;
    for (size_t i = 0; i < gaps.size(); ++i)
        refs0.emplace_back("gap" + std::to_string(gaps[i]), &tests0[i]);
    auto flat = time_gap_eval(train0, refs0, opt);
    for (const auto& r : flat)
        require(std::abs(r.accuracy.mean - flat.front().accuracy.mean) <= 0.05,
                "zero-drift accuracy moved by more than noise");
}

// ---------------------------------------------------------------- 11
void check_page_vs_query() {
    Rng rng(828);
    std::vector<std::string> pool;
    for (int d = 0; d < 25; ++d) pool.push_back("site" + std::to_string(d) + ".test");

    auto conn_to = [](const std::string& host, int64_t ts) {
        Connection c;
        c.server_name = host;
        c.server_port = 443;
        c.packets = {{ts, Direction::Incoming, 700}};
        return c;
    };
    Dataset pages, queries;
    for (int i = 0; i < 120; ++i) {
        SampleMeta pm;
        pm.keyword_label = "page";
        pm.visit_index = i;
        std::vector<Connection> pc;
        int k = 5 + static_cast<int>(rng.uniform_below(11));
        for (int c = 0; c < k; ++c)
            pc.push_back(conn_to(pool[rng.uniform_below(pool.size())], c * 1000));
        pages.samples.push_back(make_sample(pm, pc));

        SampleMeta qm;
        qm.keyword_label = "query";
        qm.visit_index = i;
        std::vector<Connection> qc;
        int q = 1 + static_cast<int>(rng.uniform_below(2));
        for (int c = 0; c < q; ++c) qc.push_back(conn_to("search.engine.test", c * 1000));
        queries.samples.push_back(make_sample(qm, qc));
    }
    TrainConfig tc;
    tc.n_trees = 100;
    tc.rng_seed = 829;
    AccuracyStat stat = page_vs_query_eval(pages, queries, tc, 5);
    require(stat.mean >= 0.99, "page-vs-query accuracy " + std::to_string(stat.mean) +
                                   " below 0.99");
}

}  // namespace

int main() {
    std::vector<Check> checks = {
        {1, "format round-trip, 100 random datasets, < 10 s", check_roundtrip},
        {2, "pcap ingest goldens (handshake, SNI, interleaved, swapped)", check_ingest_goldens},
        {3, "feature oracles over 1000 random samples, < 30 s", check_feature_oracles},
        {4, "metric oracles: AP brute force, partition identity, FNR invariance",
         check_metric_oracles},
        {5, "interleaved split exactness (36/9/9 and 32/4/4)", check_split_exactness},
        {6, "closed-world soundness on a 50-keyword world, < 2 min", check_learner_soundness},
        {7, "category ranking and forward selection on planted data", check_selection_sanity},
        {8, "cross-platform collapse and merged-training recovery", check_cross_platform_collapse},
        {9, "countermeasure contracts (overhead, degeneracy, HTTPOS pad)", check_countermeasures},
        {10, "time-gap decay direction and zero-drift flatness", check_time_gap_direction},
        {11, "page-vs-query census separability >= 99%", check_page_vs_query},
    };

    auto suite_start = std::chrono::steady_clock::now();
    int failures = 0;
    for (const auto& check : checks) {
        auto t0 = std::chrono::steady_clock::now();
        std::string status = "PASS", detail;
        try {
            check.body();
        } catch (const std::exception& e) {
            status = "FAIL";
            detail = e.what();
            ++failures;
        }
        std::printf("[%s] criterion %2d: %s (%.1fs)%s%s\n", status.c_str(), check.id,
                    check.name.c_str(), seconds_since(t0), detail.empty() ? "" : " -- ",
                    detail.c_str());
        std::fflush(stdout);
    }

    double total = seconds_since(suite_start);
    bool in_budget = total < 600.0;
    if (!in_budget) ++failures;
    std::printf("[%s] criterion 12: full suite wall clock %.1fs < 600s\n",
                in_budget ? "PASS" : "FAIL", total);
    return failures == 0 ? 0 : 1;
}
