#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kwfp/trace.hpp"
#include "kwfp/util.hpp"

#include "json.hpp"

namespace kwfp {

// Maximal run of same-direction packets.
struct Burst {
    Direction dir = Direction::Outgoing;
    uint32_t packet_count = 0;
    uint64_t byte_sum = 0;

    bool operator==(const Burst&) const = default;
};

enum class BurstScope {
    PerConnection,  // walk each connection's own sequence
    GlobalByTime,   // walk the time-merged packet sequence
};

std::vector<Burst> extract_bursts(const TraceSample& sample, BurstScope scope);

// All connections' packets merged by timestamp (stable across the
// connection order for ties).
std::vector<PacketRecord> merged_packets(const TraceSample& sample);

enum class FeatureSetId { Psc, Kfp, EtResp, Wfin, WfinPp };

FeatureSetId feature_set_from_string(const std::string& s);
const char* feature_set_string(FeatureSetId id);

// Truncation / padding / bucketing constants. Recorded in every run
// config so they can be swept.
struct FeatureParams {
    int initial_packets = 30;        // "initial 30 ..." categories
    int direction_window = 300;      // "first 300 ..." categories
    int max_conns = 20;              // per-connection categories
    int max_bursts = 10;             // "initial ... bursts"
    int interp_points = 100;         // cumulative-curve interpolation
    int pps_bins = 20;               // packets-per-second bins kept
    int concentration_windows = 30;  // outgoing-concentration windows kept
    int concentration_window_size = 20;
    int burst_bin_bytes = 100;       // burst-size-count bucket width
    bool etresp_signed = true;       // signed cumulative curve
    std::vector<int> feature_ports{443, 80};

    nlohmann::ordered_json to_json() const;
    static FeatureParams from_json(const nlohmann::json& j);
};

// One extracted sample: parallel (value, name, category) arrays.
// Names are unique; category ids group features for ranking.
struct FeatureVector {
    std::vector<double> values;
    std::vector<std::string> names;
    std::vector<std::string> categories;

    void push(std::string category, std::string name, double value) {
        categories.push_back(std::move(category));
        names.push_back(std::move(name));
        values.push_back(value);
    }
    size_t size() const { return values.size(); }
};

FeatureVector psc(const TraceSample& sample);
FeatureVector kfp_features(const TraceSample& sample, const FeatureParams& params = {});
FeatureVector etresp_features(const TraceSample& sample, const FeatureParams& params = {});
FeatureVector wfin_features(const TraceSample& sample, const FeatureParams& params = {});
FeatureVector wfinpp_extras(const TraceSample& sample, const FeatureParams& params = {});
FeatureVector extract_features(const TraceSample& sample, FeatureSetId id,
                               const FeatureParams& params = {});

// Feature-name ordering fixed from a training dataset. Unseen test
// keys map to implicit zero and are never appended.
struct VectorSpace {
    std::vector<std::string> names;       // sorted
    std::vector<std::string> categories;  // parallel to names
    std::unordered_map<std::string, size_t> index;

    size_t dim() const { return names.size(); }
    void rebuild_index();
};

VectorSpace fit_vector_space(const Dataset& train, FeatureSetId id,
                             const FeatureParams& params = {});

std::vector<double> vectorize(const VectorSpace& space, const TraceSample& sample,
                              FeatureSetId id, const FeatureParams& params = {});

Matrix featurize(const VectorSpace& space, const Dataset& dataset, FeatureSetId id,
                 const FeatureParams& params = {}, int jobs = 1);

}  // namespace kwfp
