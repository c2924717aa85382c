#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kwfp/error.hpp"

namespace kwfp {

// Label shared by every non-targeted (background) sample.
constexpr const char* kNonTargetedLabel = "-1";

enum class Direction : uint8_t {
    Outgoing,  // client -> server, serialized "-"
    Incoming,  // server -> client, serialized "+"
};

char direction_char(Direction d);
Direction direction_from_char(char c);

struct PacketRecord {
    int64_t ts_us = 0;  // microseconds since capture start
    Direction dir = Direction::Outgoing;
    int32_t size = 0;  // TCP payload bytes

    auto operator<=>(const PacketRecord&) const = default;
};

struct Connection {
    int32_t conn_id = 0;  // rank by first-packet timestamp within the sample
    std::optional<std::string> server_name;  // from SNI, when seen
    int32_t server_port = 0;
    bool established_before_typing = false;
    std::vector<PacketRecord> packets;

    bool operator==(const Connection&) const = default;

    int64_t first_ts() const { return packets.empty() ? 0 : packets.front().ts_us; }
    uint64_t byte_total() const;
};

enum class SearchMode : uint8_t { Homepage, Addressbar };

const char* search_mode_string(SearchMode m);
SearchMode search_mode_from_string(const std::string& s);

struct SampleMeta {
    std::string keyword_label;
    std::string search_engine;
    std::string browser;
    SearchMode mode = SearchMode::Homepage;
    int64_t capture_start_us = 0;  // wall clock
    std::optional<int64_t> first_keystroke_us;  // offset from capture start
    int32_t visit_index = 0;

    bool operator==(const SampleMeta&) const = default;
};

struct TraceSample {
    SampleMeta meta;
    std::vector<Connection> connections;

    bool operator==(const TraceSample&) const = default;

    size_t packet_count() const;
    bool is_targeted() const { return meta.keyword_label != kNonTargetedLabel; }
};

struct Dataset {
    std::vector<TraceSample> samples;
    std::string provenance;  // annotation only, not persisted

    // Structural equality is over samples; provenance is free-form.
    bool operator==(const Dataset& o) const { return samples == o.samples; }
};

struct Violation {
    std::string type;   // which domain type
    std::string field;  // offending field / location
    std::string rule;   // invariant, quoted verbatim in messages
};

std::string to_string(const Violation& v);

// Empty result iff every trace-model invariant holds.
std::vector<Violation> validate_sample(const TraceSample& sample);

// Throws ValidationError with the first violation.
void require_valid(const TraceSample& sample);

// Sorts connections by first-packet timestamp (stable) and assigns
// conn_id = rank. The one sanctioned way to build a TraceSample.
TraceSample make_sample(SampleMeta meta, std::vector<Connection> connections);

Dataset merge_datasets(const std::vector<const Dataset*>& parts, std::string provenance = "");

// Sorted unique keyword labels.
std::vector<std::string> dataset_labels(const Dataset& ds);

}  // namespace kwfp
