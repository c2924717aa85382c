#include "kwfp/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include "CLI11.hpp"

#include "kwfp/countermeasures.hpp"
#include "kwfp/csv.hpp"
#include "kwfp/eval.hpp"
#include "kwfp/manifest.hpp"
#include "kwfp/pcap.hpp"
#include "kwfp/preprocess.hpp"
#include "kwfp/synth.hpp"
#include "kwfp/trace_io.hpp"

namespace kwfp::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("config " + path + ": " + e.what());
    }
    return j;
}

// Values resolve as: built-in default, then config file, then explicit
// flags (flags win).
struct LearnerFlags {
    std::optional<int> trees, k, min_split, max_depth, jobs;
    std::optional<std::string> criterion;

    void attach(CLI::App* cmd) {
        cmd->add_option("--trees", trees, "number of trees");
        cmd->add_option("--k-features", k, "candidate features per split (0 = sqrt)");
        cmd->add_option("--min-split", min_split, "minimum samples to split");
        cmd->add_option("--max-depth", max_depth, "maximum tree depth (0 = unlimited)");
        cmd->add_option("--criterion", criterion, "split criterion: gini|info_gain");
        cmd->add_option("--jobs", jobs, "worker threads (0 = all cores)");
    }

    TrainConfig resolve(const json& cfg, uint64_t seed) const {
        TrainConfig tc;
        if (cfg.contains("train")) tc = TrainConfig::from_json(cfg["train"]);
        if (trees) tc.n_trees = *trees;
        if (k) tc.k_candidate_features = *k;
        if (min_split) tc.min_samples_split = *min_split;
        if (max_depth) tc.max_depth = *max_depth;
        if (criterion) tc.criterion = split_criterion_from_string(*criterion);
        if (jobs) tc.n_jobs = *jobs;
        tc.rng_seed = seed;
        return tc;
    }
};

FeatureParams resolve_params(const json& cfg) {
    return cfg.contains("features") ? FeatureParams::from_json(cfg["features"]) : FeatureParams{};
}

SldOptions resolve_sld(const json& cfg) {
    SldOptions opts;
    if (cfg.contains("sld_suffixes")) {
        opts.multi_label_suffixes.clear();
        for (const auto& s : cfg["sld_suffixes"]) opts.multi_label_suffixes.insert(lowercase(s));
    }
    return opts;
}

void write_manifest(Manifest& manifest, const std::string& explicit_path,
                    const std::vector<std::string>& outputs) {
    for (const auto& o : outputs) manifest.add_output(o);
    std::string path = explicit_path;
    if (path.empty())
        path = outputs.empty() ? manifest.subcommand + ".manifest.json"
                               : outputs.front() + ".manifest.json";
    manifest.write(path);
}

void write_report(const EvalReport& report, const std::string& out_path,
                  const std::string& csv_path) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + out_path);
    out << report.to_json().dump(2) << '\n';
    if (!csv_path.empty()) {
        std::ofstream csv(csv_path, std::ios::trunc);
        if (!csv) throw IoError("cannot write " + csv_path);
        csv << report.metrics_csv();
    }
}

SplitSpec parse_split(const std::string& s) {
    SplitSpec spec;
    if (std::sscanf(s.c_str(), "%d:%d:%d", &spec.train, &spec.val, &spec.test) != 3)
        throw UsageError("--split must look like A:B:C, got \"" + s + "\"");
    return spec;
}

// Either explicit --train/--test files, or one --data file cut by the
// interleaved split (training and validation parts merged, as the
// closed-world protocol does for the final model).
struct TrainTest {
    Dataset train, test;
};

TrainTest resolve_train_test(Manifest& manifest, const std::string& train_path,
                             const std::string& test_path, const std::string& data_path,
                             const std::string& split) {
    if (!data_path.empty()) {
        if (!train_path.empty() || !test_path.empty())
            throw UsageError("pass either --data with --split, or --train and --test");
        manifest.add_input(data_path);
        Dataset all = load_dataset(data_path);
        SplitResult parts = interleaved_split(all, parse_split(split.empty() ? "4:1:1" : split));
        return {merge_datasets({&parts.train, &parts.val}), std::move(parts.test)};
    }
    if (train_path.empty() || test_path.empty())
        throw UsageError("pass either --data with --split, or --train and --test");
    manifest.add_input(train_path);
    manifest.add_input(test_path);
    return {load_dataset(train_path), load_dataset(test_path)};
}

void write_prc_csv(const PRCurve& curve, const std::string& path) {
    CsvWriter w(path);
    w.row({"threshold", "precision", "recall"});
    for (const auto& p : curve.points)
        w.row({fmt(p.threshold), fmt(p.precision), fmt(p.recall)});
}

std::set<std::string> load_allowlist(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open allowlist " + path);
    std::set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line[0] != '#') out.insert(lowercase(line));
    }
    return out;
}

std::pair<std::string, std::string> split_named(const std::string& arg, const char* what) {
    auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= arg.size())
        throw UsageError(std::string(what) + " must look like NAME=PATH, got \"" + arg + "\"");
    return {arg.substr(0, eq), arg.substr(eq + 1)};
}

AccuracyStat run_closed(const Dataset& train, const Dataset& test, FeatureSetId features,
                        const FeatureParams& params, const TrainConfig& tc, int reps) {
    EvalOptions opt;
    opt.features = features;
    opt.params = params;
    opt.train_config = tc;
    opt.repetitions = reps;
    return closed_world_eval(train, test, opt);
}

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"encrypted search-traffic fingerprinting toolkit"};
    app.require_subcommand(1);

    std::string config_path, manifest_path;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file (flags win)");
        cmd->add_option("--manifest", manifest_path, "manifest output path");
    };

    // ---- ingest ----------------------------------------------------
    auto* c_ingest = app.add_subcommand("ingest", "pcap files to canonical traces");
    std::vector<std::string> in_pcaps;
    std::string in_out, in_label, in_engine = "unknown", in_browser = "unknown",
                in_mode = "homepage", in_diag;
    std::optional<int64_t> in_keystroke;
    int64_t in_capture_start = 0;
    int in_visit = 0;
    bool in_retain_acks = false, in_all_ports = false;
    c_ingest->add_option("--pcap", in_pcaps, "input pcap file(s)")->required();
    c_ingest->add_option("--out", in_out, "output trace file")->required();
    c_ingest->add_option("--label", in_label, "keyword label")->required();
    c_ingest->add_option("--engine", in_engine, "search engine name");
    c_ingest->add_option("--browser", in_browser, "browser name");
    c_ingest->add_option("--mode", in_mode, "homepage|addressbar");
    c_ingest->add_option("--capture-start-us", in_capture_start, "wall-clock capture start");
    c_ingest->add_option("--keystroke-us", in_keystroke, "first keystroke offset");
    c_ingest->add_option("--visit", in_visit, "visit index");
    c_ingest->add_flag("--retain-acks", in_retain_acks, "keep zero-payload packets");
    c_ingest->add_flag("--all-ports", in_all_ports, "disable the 443/80 port filter");
    c_ingest->add_option("--diagnostics", in_diag, "diagnostics JSON output");
    add_common(c_ingest);

    // ---- validate --------------------------------------------------
    auto* c_validate = app.add_subcommand("validate", "check a trace file");
    std::string v_in;
    c_validate->add_option("--in", v_in, "trace file")->required();
    add_common(c_validate);

    // ---- stats -----------------------------------------------------
    auto* c_stats = app.add_subcommand("stats", "per-sample traffic statistics");
    std::string st_in, st_out;
    c_stats->add_option("--in", st_in)->required();
    c_stats->add_option("--out", st_out, "CSV output")->required();
    add_common(c_stats);

    // ---- census ----------------------------------------------------
    auto* c_census = app.add_subcommand("census", "second-level domain census");
    std::string ce_in, ce_out;
    c_census->add_option("--in", ce_in)->required();
    c_census->add_option("--out", ce_out, "CSV output")->required();
    add_common(c_census);

    // ---- filter ----------------------------------------------------
    auto* c_filter = app.add_subcommand("filter", "addressbar / domain filters");
    std::string f_in, f_out, f_allowlist;
    bool f_addressbar = false;
    c_filter->add_option("--in", f_in)->required();
    c_filter->add_option("--out", f_out)->required();
    c_filter->add_flag("--addressbar", f_addressbar, "drop pre-keystroke packets");
    c_filter->add_option("--allowlist", f_allowlist, "keep only these second-level domains");
    add_common(c_filter);

    // ---- featurize -------------------------------------------------
    auto* c_feat = app.add_subcommand("featurize", "export feature matrices");
    std::string fe_in, fe_fit, fe_out, fe_bin, fe_features = "psc";
    int fe_jobs = 0;
    c_feat->add_option("--in", fe_in)->required();
    c_feat->add_option("--fit", fe_fit, "fit the vector space on this set (default: --in)");
    c_feat->add_option("--features", fe_features, "psc|kfp|etresp|wfin|wfinpp");
    c_feat->add_option("--out", fe_out, "CSV output")->required();
    c_feat->add_option("--bin", fe_bin, "binary matrix output (+ .names sidecar)");
    c_feat->add_option("--jobs", fe_jobs);
    add_common(c_feat);

    // ---- train -----------------------------------------------------
    auto* c_train = app.add_subcommand("train", "train a forest");
    std::string tr_train, tr_out, tr_imp, tr_features = "psc";
    uint64_t tr_seed = 0;
    LearnerFlags tr_flags;
    c_train->add_option("--train", tr_train)->required();
    c_train->add_option("--features", tr_features);
    c_train->add_option("--seed", tr_seed, "rng seed")->required();
    c_train->add_option("--out", tr_out, "model output")->required();
    c_train->add_option("--importance", tr_imp, "importance CSV output");
    tr_flags.attach(c_train);
    add_common(c_train);

    // ---- select-features -------------------------------------------
    auto* c_sel = app.add_subcommand("select-features", "top-N category forward selection");
    std::string se_train, se_val, se_out, se_features = "wfinpp";
    std::vector<int> se_grid;
    uint64_t se_seed = 0;
    LearnerFlags se_flags;
    c_sel->add_option("--train", se_train)->required();
    c_sel->add_option("--val", se_val)->required();
    c_sel->add_option("--features", se_features);
    c_sel->add_option("--grid", se_grid, "candidate N values")->required();
    c_sel->add_option("--seed", se_seed)->required();
    c_sel->add_option("--out", se_out, "selection JSON")->required();
    se_flags.attach(c_sel);
    add_common(c_sel);

    // ---- eval-closed -----------------------------------------------
    auto* c_closed = app.add_subcommand("eval-closed", "closed-world accuracy");
    std::string cl_train, cl_test, cl_data, cl_split, cl_out, cl_csv, cl_features = "psc";
    uint64_t cl_seed = 0;
    int cl_reps = 5;
    LearnerFlags cl_flags;
    c_closed->add_option("--train", cl_train);
    c_closed->add_option("--test", cl_test);
    c_closed->add_option("--data", cl_data, "single file, cut by --split");
    c_closed->add_option("--split", cl_split, "interleaved A:B:C ratio (default 4:1:1)");
    c_closed->add_option("--features", cl_features);
    c_closed->add_option("--seed", cl_seed)->required();
    c_closed->add_option("--reps", cl_reps, "forest seeds to average");
    c_closed->add_option("--out", cl_out, "report JSON")->required();
    c_closed->add_option("--csv", cl_csv, "flat metrics CSV");
    cl_flags.attach(c_closed);
    add_common(c_closed);

    // ---- eval-binary -----------------------------------------------
    auto* c_bin = app.add_subcommand("eval-binary", "open-world binary protocol");
    std::string bi_train, bi_test, bi_data, bi_split, bi_out, bi_prc, bi_features = "psc";
    uint64_t bi_seed = 0;
    LearnerFlags bi_flags;
    c_bin->add_option("--train", bi_train);
    c_bin->add_option("--test", bi_test);
    c_bin->add_option("--data", bi_data, "single file, cut by --split");
    c_bin->add_option("--split", bi_split, "interleaved A:B:C ratio (default 4:1:1)");
    c_bin->add_option("--features", bi_features);
    c_bin->add_option("--seed", bi_seed)->required();
    c_bin->add_option("--out", bi_out)->required();
    c_bin->add_option("--prc", bi_prc, "PR curve CSV");
    bi_flags.attach(c_bin);
    add_common(c_bin);

    // ---- eval-multilevel -------------------------------------------
    auto* c_ml = app.add_subcommand("eval-multilevel", "binary stage + keyword stage");
    std::string ml_train, ml_test, ml_data, ml_split, ml_out, ml_features = "psc";
    uint64_t ml_seed = 0;
    LearnerFlags ml_flags;
    c_ml->add_option("--train", ml_train);
    c_ml->add_option("--test", ml_test);
    c_ml->add_option("--data", ml_data, "single file, cut by --split");
    c_ml->add_option("--split", ml_split, "interleaved A:B:C ratio (default 4:1:1)");
    c_ml->add_option("--features", ml_features);
    c_ml->add_option("--seed", ml_seed)->required();
    c_ml->add_option("--out", ml_out)->required();
    ml_flags.attach(c_ml);
    add_common(c_ml);

    // ---- eval-multiclass -------------------------------------------
    auto* c_mc = app.add_subcommand("eval-multiclass", "keywords + sentinel in one model");
    std::string mc_train, mc_test, mc_data, mc_split, mc_out, mc_features = "psc";
    uint64_t mc_seed = 0;
    LearnerFlags mc_flags;
    c_mc->add_option("--train", mc_train);
    c_mc->add_option("--test", mc_test);
    c_mc->add_option("--data", mc_data, "single file, cut by --split");
    c_mc->add_option("--split", mc_split, "interleaved A:B:C ratio (default 4:1:1)");
    c_mc->add_option("--features", mc_features);
    c_mc->add_option("--seed", mc_seed)->required();
    c_mc->add_option("--out", mc_out)->required();
    mc_flags.attach(c_mc);
    add_common(c_mc);

    // ---- eval-cross ------------------------------------------------
    auto* c_cross = app.add_subcommand("eval-cross", "train/test platform grid");
    std::vector<std::string> cr_trains, cr_tests;
    std::string cr_out, cr_features = "psc";
    bool cr_merged = false;
    uint64_t cr_seed = 0;
    int cr_reps = 5;
    LearnerFlags cr_flags;
    c_cross->add_option("--train", cr_trains, "NAME=PATH (repeatable)")->required();
    c_cross->add_option("--test", cr_tests, "NAME=PATH (repeatable)")->required();
    c_cross->add_flag("--merged", cr_merged, "add a merged-training row");
    c_cross->add_option("--features", cr_features);
    c_cross->add_option("--seed", cr_seed)->required();
    c_cross->add_option("--reps", cr_reps);
    c_cross->add_option("--out", cr_out, "matrix CSV")->required();
    cr_flags.attach(c_cross);
    add_common(c_cross);

    // ---- eval-timegap ----------------------------------------------
    auto* c_gap = app.add_subcommand("eval-timegap", "fixed model vs aging test sets");
    std::string tg_train, tg_out, tg_features = "psc";
    std::vector<std::string> tg_tests;
    uint64_t tg_seed = 0;
    int tg_reps = 5;
    LearnerFlags tg_flags;
    c_gap->add_option("--train", tg_train)->required();
    c_gap->add_option("--test", tg_tests, "GAP=PATH in gap order (repeatable)")->required();
    c_gap->add_option("--features", tg_features);
    c_gap->add_option("--seed", tg_seed)->required();
    c_gap->add_option("--reps", tg_reps);
    c_gap->add_option("--out", tg_out, "CSV output")->required();
    tg_flags.attach(c_gap);
    add_common(c_gap);

    // ---- lda -------------------------------------------------------
    auto* c_lda = app.add_subcommand("lda", "discriminant projection for plotting");
    std::string ld_in, ld_out, ld_features = "psc";
    int ld_dims = 3, ld_jobs = 0;
    c_lda->add_option("--in", ld_in)->required();
    c_lda->add_option("--features", ld_features);
    c_lda->add_option("--dims", ld_dims, "output dimensions (1..3)");
    c_lda->add_option("--jobs", ld_jobs);
    c_lda->add_option("--out", ld_out, "coordinates CSV")->required();
    add_common(c_lda);

    // ---- countermeasure --------------------------------------------
    auto* c_cm = app.add_subcommand("countermeasure", "apply a padding defense");
    std::string cm_in, cm_out, cm_overhead, cm_defense;
    uint64_t cm_seed = 0;
    int cm_mtu = 1500, cm_mss = 1000, cm_jobs = 0;
    c_cm->add_option("--in", cm_in)->required();
    c_cm->add_option("--defense", cm_defense, "padtomtu|httpos")->required();
    c_cm->add_option("--seed", cm_seed)->required();
    c_cm->add_option("--mtu", cm_mtu);
    c_cm->add_option("--mss", cm_mss);
    c_cm->add_option("--jobs", cm_jobs);
    c_cm->add_option("--out", cm_out, "transformed trace file")->required();
    c_cm->add_option("--overhead", cm_overhead, "per-sample overhead CSV");
    add_common(c_cm);

    // ---- synth -----------------------------------------------------
    auto* c_synth = app.add_subcommand("synth", "generate a synthetic world");
    std::string sy_out, sy_world, sy_profile = "stable", sy_profile_file;
    uint64_t sy_seed = 0;
    int sy_keywords = 0, sy_background = 0, sy_visits = 1, sy_background_visits = 0;
    double sy_gap = 0.0;
    std::optional<double> sy_drift;
    c_synth->add_option("--seed", sy_seed)->required();
    c_synth->add_option("--keywords", sy_keywords)->required();
    c_synth->add_option("--background", sy_background, "background keywords (label -1)");
    c_synth->add_option("--visits", sy_visits, "visits per keyword");
    c_synth->add_option("--background-visits", sy_background_visits,
                        "visits per background keyword (default: same as --visits)");
    c_synth->add_option("--profile", sy_profile, "stable|noisy");
    c_synth->add_option("--profile-file", sy_profile_file, "EngineProfile JSON");
    c_synth->add_option("--gap", sy_gap, "time gap fed to the drift model");
    c_synth->add_option("--drift", sy_drift, "override profile drift rate");
    c_synth->add_option("--out", sy_out, "trace file")->required();
    c_synth->add_option("--world", sy_world, "world spec JSON output");
    add_common(c_synth);

    // ---- page-vs-query ---------------------------------------------
    auto* c_pvq = app.add_subcommand("page-vs-query", "census-based page/query separation");
    std::string pq_pages, pq_queries, pq_out;
    uint64_t pq_seed = 0;
    int pq_reps = 5;
    LearnerFlags pq_flags;
    c_pvq->add_option("--pages", pq_pages)->required();
    c_pvq->add_option("--queries", pq_queries)->required();
    c_pvq->add_option("--seed", pq_seed)->required();
    c_pvq->add_option("--reps", pq_reps);
    c_pvq->add_option("--out", pq_out, "report JSON")->required();
    pq_flags.attach(c_pvq);
    add_common(c_pvq);

    std::vector<const char*> argv;
    argv.push_back("kwfp");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    const json cfg = load_config_file(config_path);
    Manifest manifest;
    manifest.argv = args;

    if (*c_ingest) {
        manifest.subcommand = "ingest";
        IngestOptions opts;
        opts.retain_acks = in_retain_acks;
        opts.filter_ports = !in_all_ports;
        if (cfg.contains("ingest") && cfg["ingest"].contains("keep_ports"))
            opts.keep_ports = cfg["ingest"]["keep_ports"].get<std::vector<uint16_t>>();
        SampleMeta meta;
        meta.keyword_label = in_label;
        meta.search_engine = in_engine;
        meta.browser = in_browser;
        meta.mode = search_mode_from_string(in_mode);
        meta.capture_start_us = in_capture_start;
        meta.first_keystroke_us = in_keystroke;
        Dataset ds;
        IngestDiagnostics diag;
        for (const auto& pcap : in_pcaps) {
            manifest.add_input(pcap);
            SampleMeta m = meta;
            m.visit_index = in_visit++;
            ds.samples.push_back(ingest_session(pcap, m, opts, &diag));
        }
        save_dataset(ds, in_out);
        std::vector<std::string> outputs{in_out};
        if (!in_diag.empty()) {
            std::ofstream out(in_diag, std::ios::trunc);
            out << diag.to_json().dump(2) << '\n';
            outputs.push_back(in_diag);
        }
        manifest.config = {{"label", in_label}, {"mode", in_mode},
                           {"retain_acks", opts.retain_acks},
                           {"filter_ports", opts.filter_ports}};
        write_manifest(manifest, manifest_path, outputs);
        return 0;
    }

    if (*c_validate) {
        manifest.subcommand = "validate";
        manifest.add_input(v_in);
        Dataset ds = load_dataset(v_in);  // throws with line numbers on bad data
        size_t violations = 0;
        for (size_t i = 0; i < ds.samples.size(); ++i)
            for (const auto& v : validate_sample(ds.samples[i])) {
                std::cerr << "sample " << i << ": " << to_string(v) << "\n";
                ++violations;
            }
        std::cout << ds.samples.size() << " samples, " << violations << " violations\n";
        write_manifest(manifest, manifest_path, {});
        return violations == 0 ? 0 : 2;
    }

    if (*c_stats) {
        manifest.subcommand = "stats";
        manifest.add_input(st_in);
        Dataset ds = load_dataset(st_in);
        CsvWriter w(st_out);
        w.row({"sample_id", "packets", "conns", "bytes_in", "bytes_out", "load_time_s"});
        for (size_t i = 0; i < ds.samples.size(); ++i) {
            TraceStats s = trace_stats(ds.samples[i]);
            w.row({std::to_string(i), std::to_string(s.packet_count),
                   std::to_string(s.connection_count), std::to_string(s.bytes_incoming),
                   std::to_string(s.bytes_outgoing), fmt(s.load_time_s)});
        }
        write_manifest(manifest, manifest_path, {st_out});
        return 0;
    }

    if (*c_census) {
        manifest.subcommand = "census";
        manifest.add_input(ce_in);
        Dataset ds = load_dataset(ce_in);
        DomainCensus census = domain_census(ds, resolve_sld(cfg));
        CsvWriter w(ce_out);
        w.row({"domain", "count"});
        for (const auto& [domain, count] : census.counts)
            w.row({domain, std::to_string(count)});
        write_manifest(manifest, manifest_path, {ce_out});
        return 0;
    }

    if (*c_filter) {
        manifest.subcommand = "filter";
        manifest.add_input(f_in);
        if (!f_addressbar && f_allowlist.empty())
            throw UsageError("filter: nothing to do, pass --addressbar and/or --allowlist");
        Dataset ds = load_dataset(f_in);
        std::set<std::string> allow;
        if (!f_allowlist.empty()) {
            manifest.add_input(f_allowlist);
            allow = load_allowlist(f_allowlist);
        }
        SldOptions sld = resolve_sld(cfg);
        Dataset out;
        out.provenance = ds.provenance + " [filtered]";
        for (const auto& s : ds.samples) {
            TraceSample cur = s;
            if (f_addressbar) cur = addressbar_filter(cur);
            if (!allow.empty()) cur = domain_filter(cur, allow, sld);
            out.samples.push_back(std::move(cur));
        }
        save_dataset(out, f_out);
        manifest.config = {{"addressbar", f_addressbar}};
        write_manifest(manifest, manifest_path, {f_out});
        return 0;
    }

    if (*c_feat) {
        manifest.subcommand = "featurize";
        manifest.add_input(fe_in);
        FeatureSetId features = feature_set_from_string(fe_features);
        FeatureParams params = resolve_params(cfg);
        Dataset ds = load_dataset(fe_in);
        Dataset fit_ds = ds;
        if (!fe_fit.empty()) {
            manifest.add_input(fe_fit);
            fit_ds = load_dataset(fe_fit);
        }
        VectorSpace space = fit_vector_space(fit_ds, features, params);
        Matrix X = featurize(space, ds, features, params, fe_jobs);

        CsvWriter w(fe_out);
        std::vector<std::string> header{"label", "engine", "browser", "mode", "visit_index"};
        header.insert(header.end(), space.names.begin(), space.names.end());
        w.row(header);
        for (size_t i = 0; i < X.rows; ++i) {
            const SampleMeta& m = ds.samples[i].meta;
            std::vector<std::string> row{m.keyword_label, m.search_engine, m.browser,
                                         search_mode_string(m.mode),
                                         std::to_string(m.visit_index)};
            for (double v : X.row(i)) row.push_back(fmt(v));
            w.row(row);
        }
        std::vector<std::string> outputs{fe_out};
        if (!fe_bin.empty()) {
            std::ofstream bin(fe_bin, std::ios::binary | std::ios::trunc);
            if (!bin) throw IoError("cannot write " + fe_bin);
            const char magic[8] = {'K', 'W', 'F', 'P', 'M', 'T', 'R', 'X'};
            bin.write(magic, 8);
            uint32_t version = 1;
            uint64_t rows = X.rows, cols = X.cols;
            bin.write(reinterpret_cast<const char*>(&version), 4);
            bin.write(reinterpret_cast<const char*>(&rows), 8);
            bin.write(reinterpret_cast<const char*>(&cols), 8);
            bin.write(reinterpret_cast<const char*>(X.data.data()),
                      static_cast<std::streamsize>(X.data.size() * sizeof(double)));
            std::ofstream names(fe_bin + ".names", std::ios::trunc);
            for (size_t f = 0; f < space.names.size(); ++f)
                names << space.names[f] << '\t' << space.categories[f] << '\n';
            outputs.push_back(fe_bin);
            outputs.push_back(fe_bin + ".names");
        }
        manifest.config = {{"features", fe_features}, {"params", params.to_json()}};
        write_manifest(manifest, manifest_path, outputs);
        return 0;
    }

    if (*c_train) {
        manifest.subcommand = "train";
        manifest.add_input(tr_train);
        FeatureSetId features = feature_set_from_string(tr_features);
        FeatureParams params = resolve_params(cfg);
        TrainConfig tc = tr_flags.resolve(cfg, tr_seed);
        Dataset train = load_dataset(tr_train);
        TrainedModel model = train_model(train, features, params, tc);
        save_forest(model.forest, tr_out);
        std::vector<std::string> outputs{tr_out};
        if (!tr_imp.empty()) {
            CsvWriter w(tr_imp);
            w.row({"feature", "category", "importance"});
            for (size_t f = 0; f < model.space.names.size(); ++f)
                w.row({model.space.names[f], model.space.categories[f],
                       fmt(model.forest.importance[f])});
            outputs.push_back(tr_imp);
        }
        manifest.config = {{"features", tr_features}, {"seed", tr_seed},
                           {"train", tc.to_json()}, {"params", params.to_json()}};
        write_manifest(manifest, manifest_path, outputs);
        return 0;
    }

    if (*c_sel) {
        manifest.subcommand = "select-features";
        manifest.add_input(se_train);
        manifest.add_input(se_val);
        FeatureSetId features = feature_set_from_string(se_features);
        FeatureParams params = resolve_params(cfg);
        TrainConfig tc = se_flags.resolve(cfg, se_seed);
        Dataset train = load_dataset(se_train);
        Dataset val = load_dataset(se_val);

        VectorSpace space = fit_vector_space(train, features, params);
        Matrix Xtr = featurize(space, train, features, params, tc.n_jobs);
        Matrix Xva = featurize(space, val, features, params, tc.n_jobs);
        auto labels = dataset_labels(train);
        std::map<std::string, int> index;
        for (size_t i = 0; i < labels.size(); ++i) index[labels[i]] = static_cast<int>(i);
        std::vector<int> ytr, yva;
        for (const auto& s : train.samples) ytr.push_back(index.at(s.meta.keyword_label));
        for (const auto& s : val.samples) {
            auto it = index.find(s.meta.keyword_label);
            if (it == index.end())
                throw ValidationError("validation label \"" + s.meta.keyword_label +
                                      "\" unseen in training");
            yva.push_back(it->second);
        }
        auto result = forward_select(Xtr, ytr, Xva, yva, space.categories, labels, tc, se_grid);

        ordered_json j;
        j["best_n"] = result.best_n;
        j["best_accuracy"] = result.best_accuracy;
        j["ranked_categories"] = result.ranked_categories;
        ordered_json acc = ordered_json::array();
        for (const auto& [n, a] : result.accuracy_by_n)
            acc.push_back({{"n", n}, {"accuracy", a}});
        j["accuracy_by_n"] = acc;
        ordered_json names = ordered_json::array();
        for (size_t col : result.selected_features) names.push_back(space.names[col]);
        j["selected_features"] = names;
        std::ofstream out(se_out, std::ios::trunc);
        out << j.dump(2) << '\n';

        manifest.config = {{"features", se_features}, {"seed", se_seed},
                           {"grid", se_grid}, {"train", tc.to_json()}};
        write_manifest(manifest, manifest_path, {se_out});
        return 0;
    }

    if (*c_closed) {
        manifest.subcommand = "eval-closed";
        FeatureSetId features = feature_set_from_string(cl_features);
        FeatureParams params = resolve_params(cfg);
        TrainConfig tc = cl_flags.resolve(cfg, cl_seed);
        auto [train, test] = resolve_train_test(manifest, cl_train, cl_test, cl_data, cl_split);
        AccuracyStat stat = run_closed(train, test, features, params, tc, cl_reps);

        EvalReport report;
        report.experiment_id = "closed-world";
        report.metrics["accuracy_mean"] = stat.mean;
        report.metrics["accuracy_std"] = stat.stddev;
        report.metrics["n_test"] = static_cast<double>(test.samples.size());
        for (size_t r = 0; r < stat.per_seed.size(); ++r)
            report.metrics["accuracy_rep" + std::to_string(r)] = stat.per_seed[r];
        report.config_snapshot = {{"features", cl_features}, {"seed", cl_seed},
                                  {"reps", cl_reps}, {"train", tc.to_json()},
                                  {"params", params.to_json()}};
        write_report(report, cl_out, cl_csv);
        manifest.config = report.config_snapshot;
        std::vector<std::string> outputs{cl_out};
        if (!cl_csv.empty()) outputs.push_back(cl_csv);
        write_manifest(manifest, manifest_path, outputs);
        return 0;
    }

    if (*c_bin) {
        manifest.subcommand = "eval-binary";
        EvalOptions opt;
        opt.features = feature_set_from_string(bi_features);
        opt.params = resolve_params(cfg);
        opt.train_config = bi_flags.resolve(cfg, bi_seed);
        auto [train, test] = resolve_train_test(manifest, bi_train, bi_test, bi_data, bi_split);
        EvalReport report = binary_eval(train, test, opt);
        report.config_snapshot = {{"features", bi_features}, {"seed", bi_seed},
                                  {"train", opt.train_config.to_json()}};
        write_report(report, bi_out, "");
        std::vector<std::string> outputs{bi_out};
        if (!bi_prc.empty() && report.prc) {
            write_prc_csv(*report.prc, bi_prc);
            outputs.push_back(bi_prc);
        }
        manifest.config = report.config_snapshot;
        write_manifest(manifest, manifest_path, outputs);
        return 0;
    }

    if (*c_ml) {
        manifest.subcommand = "eval-multilevel";
        FeatureSetId features = feature_set_from_string(ml_features);
        FeatureParams params = resolve_params(cfg);
        TrainConfig tc = ml_flags.resolve(cfg, ml_seed);
        auto [train, test] = resolve_train_test(manifest, ml_train, ml_test, ml_data, ml_split);

        Dataset targeted_only;
        targeted_only.provenance = train.provenance + " [targeted]";
        for (const auto& s : train.samples)
            if (s.is_targeted()) targeted_only.samples.push_back(s);
        if (targeted_only.samples.empty())
            throw ValidationError("eval-multilevel: no targeted training samples");

        TrainedModel binary = train_binary_model(train, features, params, tc);
        TrainConfig tc2 = tc;
        tc2.rng_seed = mix_seed(tc.rng_seed, 2);
        TrainedModel keyword = train_model(targeted_only, features, params, tc2);
        EvalReport report = multilevel_eval(binary, keyword, test);
        report.config_snapshot = {{"features", ml_features}, {"seed", ml_seed},
                                  {"train", tc.to_json()}};
        write_report(report, ml_out, "");
        manifest.config = report.config_snapshot;
        write_manifest(manifest, manifest_path, {ml_out});
        return 0;
    }

    if (*c_mc) {
        manifest.subcommand = "eval-multiclass";
        FeatureSetId features = feature_set_from_string(mc_features);
        FeatureParams params = resolve_params(cfg);
        TrainConfig tc = mc_flags.resolve(cfg, mc_seed);
        auto [train, test] = resolve_train_test(manifest, mc_train, mc_test, mc_data, mc_split);
        TrainedModel model = train_model(train, features, params, tc);
        EvalReport report = multiclass_eval(model, test);
        report.config_snapshot = {{"features", mc_features}, {"seed", mc_seed},
                                  {"train", tc.to_json()}};
        write_report(report, mc_out, "");
        manifest.config = report.config_snapshot;
        write_manifest(manifest, manifest_path, {mc_out});
        return 0;
    }

    if (*c_cross) {
        manifest.subcommand = "eval-cross";
        EvalOptions opt;
        opt.features = feature_set_from_string(cr_features);
        opt.params = resolve_params(cfg);
        opt.train_config = cr_flags.resolve(cfg, cr_seed);
        opt.repetitions = cr_reps;

        std::vector<std::pair<std::string, Dataset>> trains, tests;
        for (const auto& arg : cr_trains) {
            auto [name, path] = split_named(arg, "--train");
            manifest.add_input(path);
            trains.emplace_back(name, load_dataset(path));
        }
        for (const auto& arg : cr_tests) {
            auto [name, path] = split_named(arg, "--test");
            manifest.add_input(path);
            tests.emplace_back(name, load_dataset(path));
        }
        if (cr_merged) {
            std::vector<const Dataset*> parts;
            for (const auto& [name, ds] : trains) parts.push_back(&ds);
            trains.emplace_back("merged", merge_datasets(parts, "merged"));
        }
        std::vector<std::pair<std::string, const Dataset*>> train_refs, test_refs;
        for (const auto& [name, ds] : trains) train_refs.emplace_back(name, &ds);
        for (const auto& [name, ds] : tests) test_refs.emplace_back(name, &ds);
        auto cells = cross_platform_eval(train_refs, test_refs, opt);

        CsvWriter w(cr_out);
        w.row({"train", "test", "accuracy_mean", "accuracy_std"});
        for (const auto& cell : cells)
            w.row({cell.train_id, cell.test_id, fmt(cell.accuracy.mean),
                   fmt(cell.accuracy.stddev)});
        manifest.config = {{"features", cr_features}, {"seed", cr_seed}, {"reps", cr_reps},
                           {"merged", cr_merged}, {"train", opt.train_config.to_json()}};
        write_manifest(manifest, manifest_path, {cr_out});
        return 0;
    }

    if (*c_gap) {
        manifest.subcommand = "eval-timegap";
        manifest.add_input(tg_train);
        EvalOptions opt;
        opt.features = feature_set_from_string(tg_features);
        opt.params = resolve_params(cfg);
        opt.train_config = tg_flags.resolve(cfg, tg_seed);
        opt.repetitions = tg_reps;
        Dataset train = load_dataset(tg_train);

        std::vector<std::pair<std::string, Dataset>> tests;
        for (const auto& arg : tg_tests) {
            auto [gap, path] = split_named(arg, "--test");
            manifest.add_input(path);
            tests.emplace_back(gap, load_dataset(path));
        }
        std::vector<std::pair<std::string, const Dataset*>> refs;
        for (const auto& [gap, ds] : tests) refs.emplace_back(gap, &ds);
        auto results = time_gap_eval(train, refs, opt);

        CsvWriter w(tg_out);
        w.row({"gap", "accuracy_mean", "accuracy_std"});
        for (const auto& r : results)
            w.row({r.gap, fmt(r.accuracy.mean), fmt(r.accuracy.stddev)});
        manifest.config = {{"features", tg_features}, {"seed", tg_seed}, {"reps", tg_reps},
                           {"train", opt.train_config.to_json()}};
        write_manifest(manifest, manifest_path, {tg_out});
        return 0;
    }

    if (*c_lda) {
        manifest.subcommand = "lda";
        manifest.add_input(ld_in);
        FeatureSetId features = feature_set_from_string(ld_features);
        FeatureParams params = resolve_params(cfg);
        Dataset ds = load_dataset(ld_in);
        VectorSpace space = fit_vector_space(ds, features, params);
        Matrix X = featurize(space, ds, features, params, ld_jobs);
        auto labels = dataset_labels(ds);
        std::map<std::string, int> index;
        for (size_t i = 0; i < labels.size(); ++i) index[labels[i]] = static_cast<int>(i);
        std::vector<int> y;
        for (const auto& s : ds.samples) y.push_back(index[s.meta.keyword_label]);
        Matrix coords = lda_project(X, y, ld_dims);

        CsvWriter w(ld_out);
        std::vector<std::string> header{"sample_id", "label"};
        const char* axes[] = {"x", "y", "z"};
        for (int d = 0; d < ld_dims; ++d) header.push_back(axes[d]);
        w.row(header);
        for (size_t i = 0; i < coords.rows; ++i) {
            std::vector<std::string> row{std::to_string(i), ds.samples[i].meta.keyword_label};
            for (size_t d = 0; d < coords.cols; ++d) row.push_back(fmt(coords.at(i, d)));
            w.row(row);
        }
        manifest.config = {{"features", ld_features}, {"dims", ld_dims}};
        write_manifest(manifest, manifest_path, {ld_out});
        return 0;
    }

    if (*c_cm) {
        manifest.subcommand = "countermeasure";
        manifest.add_input(cm_in);
        CmConfig cm;
        cm.mtu = cm_mtu;
        cm.mss = cm_mss;
        cm.rng_seed = cm_seed;
        Defense defense = defense_from_string(cm_defense);
        Dataset ds = load_dataset(cm_in);
        auto [transformed, reports] = apply_defense(ds, defense, cm, cm_jobs);
        save_dataset(transformed, cm_out);
        std::vector<std::string> outputs{cm_out};
        if (!cm_overhead.empty()) {
            CsvWriter w(cm_overhead);
            w.row({"sample_id", "orig_bytes", "new_bytes", "overhead"});
            for (size_t i = 0; i < reports.size(); ++i)
                w.row({std::to_string(i), std::to_string(reports[i].original_bytes),
                       std::to_string(reports[i].transformed_bytes), fmt(reports[i].overhead)});
            OverheadReport total = bandwidth_overhead(ds, transformed);
            w.row({"total", std::to_string(total.original_bytes),
                   std::to_string(total.transformed_bytes), fmt(total.overhead)});
            outputs.push_back(cm_overhead);
        }
        manifest.config = {{"defense", cm_defense}, {"config", cm.to_json()}};
        write_manifest(manifest, manifest_path, outputs);
        return 0;
    }

    if (*c_synth) {
        manifest.subcommand = "synth";
        EngineProfile profile;
        if (!sy_profile_file.empty()) {
            manifest.add_input(sy_profile_file);
            std::ifstream in(sy_profile_file);
            if (!in) throw IoError("cannot open " + sy_profile_file);
            json j;
            in >> j;
            profile = EngineProfile::from_json(j);
        } else {
            profile = profile_by_name(sy_profile);
        }
        if (sy_drift) profile.drift_rate = *sy_drift;
        World world = build_world(sy_seed, sy_keywords, profile, sy_background);
        Dataset ds = generate_dataset(world, sy_visits, sy_gap, sy_background_visits);
        save_dataset(ds, sy_out);
        std::vector<std::string> outputs{sy_out};
        if (!sy_world.empty()) {
            std::ofstream out(sy_world, std::ios::trunc);
            out << world.spec_json().dump(2) << '\n';
            outputs.push_back(sy_world);
        }
        manifest.config = {{"seed", sy_seed}, {"keywords", sy_keywords},
                           {"background", sy_background}, {"visits", sy_visits},
                           {"background_visits", sy_background_visits},
                           {"gap", sy_gap}, {"profile", profile.to_json()}};
        write_manifest(manifest, manifest_path, outputs);
        return 0;
    }

    if (*c_pvq) {
        manifest.subcommand = "page-vs-query";
        manifest.add_input(pq_pages);
        manifest.add_input(pq_queries);
        TrainConfig tc = pq_flags.resolve(cfg, pq_seed);
        Dataset pages = load_dataset(pq_pages);
        Dataset queries = load_dataset(pq_queries);
        AccuracyStat stat = page_vs_query_eval(pages, queries, tc, pq_reps);
        EvalReport report;
        report.experiment_id = "page-vs-query";
        report.metrics["accuracy_mean"] = stat.mean;
        report.metrics["accuracy_std"] = stat.stddev;
        report.config_snapshot = {{"seed", pq_seed}, {"reps", pq_reps},
                                  {"train", tc.to_json()}};
        write_report(report, pq_out, "");
        manifest.config = report.config_snapshot;
        write_manifest(manifest, manifest_path, {pq_out});
        return 0;
    }

    throw UsageError("no subcommand selected");
}

}  // namespace

int run(const std::vector<std::string>& args) {
    try {
        return dispatch(args);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace kwfp::cli
