#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "kwfp/trace.hpp"

#include "json.hpp"

namespace kwfp {

struct CmConfig {
    int32_t mtu = 1500;
    int32_t mss = 1000;
    uint64_t rng_seed = 0;

    nlohmann::ordered_json to_json() const;
};

struct OverheadReport {
    uint64_t original_bytes = 0;
    uint64_t transformed_bytes = 0;
    double overhead = 0.0;  // (transformed - original) / original
    uint64_t clamped_packets = 0;  // incoming packets with size > 3*mss

    nlohmann::ordered_json to_json() const;
};

enum class Defense { PadToMtu, Httpos };

Defense defense_from_string(const std::string& s);
const char* defense_string(Defense d);

// Every packet size becomes exactly mtu; timing, directions and
// connection structure are untouched.
std::pair<TraceSample, OverheadReport> pad_to_mtu(const TraceSample& sample,
                                                  const CmConfig& config);

// Outgoing sizes drawn uniformly in [size, mtu]; incoming sizes padded
// uniformly in [size, 3*mss] (clamped when size exceeds it) and
// segmented into mss-byte packets at the original timestamp. Draws
// consume the per-sample stream in packet-traversal order.
std::pair<TraceSample, OverheadReport> httpos_transform(const TraceSample& sample,
                                                        const CmConfig& config,
                                                        uint64_t sample_index = 0);

std::pair<Dataset, std::vector<OverheadReport>> apply_defense(const Dataset& dataset,
                                                              Defense defense,
                                                              const CmConfig& config,
                                                              int jobs = 1);

// Byte totals across aligned datasets.
OverheadReport bandwidth_overhead(const Dataset& original, const Dataset& transformed);

}  // namespace kwfp
