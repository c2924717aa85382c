#include "kwfp/trace.hpp"

#include <algorithm>
#include <set>

namespace kwfp {

char direction_char(Direction d) { return d == Direction::Incoming ? '+' : '-'; }

Direction direction_from_char(char c) {
    switch (c) {
        case '+': return Direction::Incoming;
        case '-': return Direction::Outgoing;
        default: throw ParseError(std::string("unknown direction '") + c + "', expected '+' or '-'");
    }
}

const char* search_mode_string(SearchMode m) {
    return m == SearchMode::Addressbar ? "addressbar" : "homepage";
}

SearchMode search_mode_from_string(const std::string& s) {
    if (s == "homepage") return SearchMode::Homepage;
    if (s == "addressbar") return SearchMode::Addressbar;
    throw ParseError("unknown mode \"" + s + "\", expected \"homepage\" or \"addressbar\"");
}

uint64_t Connection::byte_total() const {
    uint64_t sum = 0;
    for (const auto& p : packets) sum += static_cast<uint64_t>(p.size);
    return sum;
}

size_t TraceSample::packet_count() const {
    size_t n = 0;
    for (const auto& c : connections) n += c.packets.size();
    return n;
}

std::string to_string(const Violation& v) {
    return v.type + "." + v.field + ": violates \"" + v.rule + "\"";
}

std::vector<Violation> validate_sample(const TraceSample& sample) {
    std::vector<Violation> out;
    if (sample.connections.empty())
        out.push_back({"TraceSample", "connections", "at least one connection"});
    if (sample.meta.visit_index < 0)
        out.push_back({"SampleMeta", "visit_index", "visit_index >= 0"});

    std::set<int32_t> seen_ids;
    int64_t prev_first_ts = 0;
    for (size_t ci = 0; ci < sample.connections.size(); ++ci) {
        const Connection& conn = sample.connections[ci];
        const std::string where = "connections[" + std::to_string(ci) + "]";
        if (conn.packets.empty()) {
            out.push_back({"Connection", where + ".packets", "packets non-empty"});
            continue;
        }
        if (!seen_ids.insert(conn.conn_id).second)
            out.push_back({"Connection", where + ".conn_id", "conn_id unique within a sample"});
        if (conn.conn_id != static_cast<int32_t>(ci))
            out.push_back({"Connection", where + ".conn_id",
                           "conn_id matches ordering of first-packet timestamps"});
        if (ci > 0 && conn.first_ts() < prev_first_ts)
            out.push_back({"TraceSample", where,
                           "connections sorted by first-packet timestamp"});
        prev_first_ts = conn.first_ts();

        int64_t prev_ts = -1;
        for (size_t pi = 0; pi < conn.packets.size(); ++pi) {
            const PacketRecord& p = conn.packets[pi];
            const std::string pwhere = where + ".packets[" + std::to_string(pi) + "]";
            if (p.size < 1) out.push_back({"PacketRecord", pwhere + ".size", "size >= 1"});
            if (p.ts_us < 0)
                out.push_back({"PacketRecord", pwhere + ".ts_us", "timestamp non-negative"});
            if (prev_ts >= 0 && p.ts_us < prev_ts)
                out.push_back({"PacketRecord", pwhere + ".ts_us", "timestamps non-decreasing"});
            prev_ts = p.ts_us;
        }
    }
    return out;
}

void require_valid(const TraceSample& sample) {
    auto violations = validate_sample(sample);
    if (!violations.empty()) throw ValidationError(to_string(violations.front()));
}

TraceSample make_sample(SampleMeta meta, std::vector<Connection> connections) {
    std::stable_sort(connections.begin(), connections.end(),
                     [](const Connection& a, const Connection& b) { return a.first_ts() < b.first_ts(); });
    for (size_t i = 0; i < connections.size(); ++i)
        connections[i].conn_id = static_cast<int32_t>(i);
    return TraceSample{std::move(meta), std::move(connections)};
}

Dataset merge_datasets(const std::vector<const Dataset*>& parts, std::string provenance) {
    Dataset out;
    out.provenance = std::move(provenance);
    for (const Dataset* p : parts)
        out.samples.insert(out.samples.end(), p->samples.begin(), p->samples.end());
    return out;
}

std::vector<std::string> dataset_labels(const Dataset& ds) {
    std::set<std::string> labels;
    for (const auto& s : ds.samples) labels.insert(s.meta.keyword_label);
    return {labels.begin(), labels.end()};
}

}  // namespace kwfp
