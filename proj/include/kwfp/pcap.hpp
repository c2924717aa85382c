#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kwfp/trace.hpp"

#include "json.hpp"

namespace kwfp {

namespace tcpflag {
constexpr uint8_t kFin = 0x01;
constexpr uint8_t kSyn = 0x02;
constexpr uint8_t kRst = 0x04;
constexpr uint8_t kPsh = 0x08;
constexpr uint8_t kAck = 0x10;
}  // namespace tcpflag

struct RawPacket {
    int64_t ts_us = 0;  // absolute capture time, microseconds
    std::array<uint8_t, 16> src_ip{};
    std::array<uint8_t, 16> dst_ip{};
    bool ipv6 = false;
    uint16_t src_port = 0;
    uint16_t dst_port = 0;
    uint8_t tcp_flags = 0;
    uint32_t seq = 0;
    uint32_t payload_len = 0;
    std::vector<uint8_t> payload_prefix;  // first <=512 payload bytes
};

// Canonical bidirectional flow identity: lower endpoint first, so
// key(a->b) == key(b->a).
struct FlowKey {
    std::array<uint8_t, 16> ip_a{}, ip_b{};
    uint16_t port_a = 0, port_b = 0;
    bool ipv6 = false;

    static FlowKey of(const RawPacket& p);
    auto operator<=>(const FlowKey&) const = default;
};

struct IngestDiagnostics {
    uint64_t non_tcp_records = 0;
    uint64_t truncated_records = 0;
    uint64_t synless_flows = 0;
    uint64_t duplicate_segments = 0;  // repeated (seq, len) within a flow direction
    uint64_t zero_payload_dropped = 0;
    uint64_t port_filtered_flows = 0;

    nlohmann::ordered_json to_json() const;
};

struct IngestOptions {
    bool retain_acks = false;  // keep zero-payload packets (size 0 records;
                               // such traces fail the canonical size >= 1 check)
    bool filter_ports = true;
    std::vector<uint16_t> keep_ports{443, 80};  // server-side ports kept
    int sni_max_packets = 3;  // client payload packets scanned for the hello
};

// Classic pcap only, both endiannesses, usec and nsec variants; link
// type Ethernet (1) or raw IP (101). Emits TCP/IP records only.
std::vector<RawPacket> parse_pcap(std::span<const uint8_t> bytes,
                                  IngestDiagnostics* diag = nullptr);
std::vector<RawPacket> parse_pcap_file(const std::filesystem::path& path,
                                       IngestDiagnostics* diag = nullptr);

// Groups packets into connections, assigns direction relative to the
// client (first SYN sender; fallback: source of the first packet) and
// orders connections by first-packet timestamp. Timestamps are
// rebased to microseconds since the earliest packet.
std::vector<Connection> reassemble_flows(std::span<const RawPacket> packets,
                                         const IngestOptions& options = {},
                                         IngestDiagnostics* diag = nullptr);

// Hostname from a TLS ClientHello server_name extension, if the bytes
// start with one. Absence is a normal outcome.
std::optional<std::string> extract_sni(std::span<const uint8_t> client_payload);

TraceSample ingest_session(const std::filesystem::path& pcap_path, SampleMeta meta,
                           const IngestOptions& options = {},
                           IngestDiagnostics* diag = nullptr);

}  // namespace kwfp
