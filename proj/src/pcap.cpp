#include "kwfp/pcap.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

namespace kwfp {

nlohmann::ordered_json IngestDiagnostics::to_json() const {
    nlohmann::ordered_json j;
    j["non_tcp_records"] = non_tcp_records;
    j["truncated_records"] = truncated_records;
    j["synless_flows"] = synless_flows;
    j["duplicate_segments"] = duplicate_segments;
    j["zero_payload_dropped"] = zero_payload_dropped;
    j["port_filtered_flows"] = port_filtered_flows;
    return j;
}

namespace {

class ByteReader {
public:
    ByteReader(std::span<const uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    size_t remaining() const { return bytes_.size() - pos_; }
    size_t pos() const { return pos_; }
    void skip(size_t n) { pos_ += n; }

    uint8_t u8() { return bytes_[pos_++]; }

    uint16_t u16() {
        uint16_t v;
        std::memcpy(&v, bytes_.data() + pos_, 2);
        pos_ += 2;
        return swap_ ? static_cast<uint16_t>((v >> 8) | (v << 8)) : v;
    }

    uint32_t u32() {
        uint32_t v;
        std::memcpy(&v, bytes_.data() + pos_, 4);
        pos_ += 4;
        return swap_ ? __builtin_bswap32(v) : v;
    }

    std::span<const uint8_t> slice(size_t n) {
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    std::span<const uint8_t> bytes_;
    size_t pos_ = 0;
    bool swap_;
};

uint16_t be16(std::span<const uint8_t> b, size_t off) {
    return static_cast<uint16_t>((b[off] << 8) | b[off + 1]);
}

uint32_t be32(std::span<const uint8_t> b, size_t off) {
    return (static_cast<uint32_t>(b[off]) << 24) | (static_cast<uint32_t>(b[off + 1]) << 16) |
           (static_cast<uint32_t>(b[off + 2]) << 8) | static_cast<uint32_t>(b[off + 3]);
}

constexpr uint32_t kMagicUsec = 0xa1b2c3d4;
constexpr uint32_t kMagicUsecSwapped = 0xd4c3b2a1;
constexpr uint32_t kMagicNsec = 0xa1b23c4d;
constexpr uint32_t kMagicNsecSwapped = 0x4d3cb2a1;

constexpr uint32_t kLinkEthernet = 1;
constexpr uint32_t kLinkRawIp = 101;

constexpr size_t kSniPrefixBytes = 512;

// Parses one captured frame into a RawPacket; returns false for
// anything that is not a plain TCP/IP packet (counted by the caller).
bool parse_frame(std::span<const uint8_t> frame, uint32_t orig_len, uint32_t link_type,
                 RawPacket& out) {
    std::span<const uint8_t> ip = frame;
    if (link_type == kLinkEthernet) {
        if (frame.size() < 14) return false;
        uint16_t ethertype = be16(frame, 12);
        if (ethertype != 0x0800 && ethertype != 0x86DD) return false;
        ip = frame.subspan(14);
        orig_len = orig_len >= 14 ? orig_len - 14 : 0;
    }
    if (ip.empty()) return false;

    size_t l4_off = 0;
    uint32_t ip_payload_len = 0;
    uint8_t version = ip[0] >> 4;
    if (version == 4) {
        if (ip.size() < 20) return false;
        size_t ihl = static_cast<size_t>(ip[0] & 0x0F) * 4;
        if (ihl < 20 || ip.size() < ihl) return false;
        uint16_t total_len = be16(ip, 2);
        uint16_t frag = be16(ip, 6);
        if ((frag & 0x1FFF) != 0) return false;  // non-first fragment, no defrag
        if (ip[9] != 6) return false;            // not TCP
        if (total_len < ihl) return false;
        std::copy_n(ip.begin() + 12, 4, out.src_ip.begin());
        std::copy_n(ip.begin() + 16, 4, out.dst_ip.begin());
        out.ipv6 = false;
        l4_off = ihl;
        ip_payload_len = total_len - static_cast<uint32_t>(ihl);
    } else if (version == 6) {
        if (ip.size() < 40) return false;
        if (ip[6] != 6) return false;  // extension headers not walked
        std::copy_n(ip.begin() + 8, 16, out.src_ip.begin());
        std::copy_n(ip.begin() + 24, 16, out.dst_ip.begin());
        out.ipv6 = true;
        l4_off = 40;
        ip_payload_len = be16(ip, 4);
    } else {
        return false;
    }

    if (ip.size() < l4_off + 20) return false;
    auto tcp = ip.subspan(l4_off);
    out.src_port = be16(tcp, 0);
    out.dst_port = be16(tcp, 2);
    out.seq = be32(tcp, 4);
    size_t data_off = static_cast<size_t>(tcp[12] >> 4) * 4;
    if (data_off < 20 || ip_payload_len < data_off) return false;
    out.tcp_flags = tcp[13];
    out.payload_len = ip_payload_len - static_cast<uint32_t>(data_off);

    size_t avail = tcp.size() > data_off ? tcp.size() - data_off : 0;
    size_t take = std::min<size_t>({kSniPrefixBytes, out.payload_len, avail});
    out.payload_prefix.assign(tcp.begin() + data_off, tcp.begin() + data_off + take);
    return true;
}

}  // namespace

std::vector<RawPacket> parse_pcap(std::span<const uint8_t> bytes, IngestDiagnostics* diag) {
    IngestDiagnostics local;
    IngestDiagnostics& d = diag ? *diag : local;

    if (bytes.size() < 24) throw ParseError("pcap: file shorter than the global header");
    uint32_t magic;
    std::memcpy(&magic, bytes.data(), 4);

    bool swap = false, nsec = false;
    switch (magic) {
        case kMagicUsec: break;
        case kMagicUsecSwapped: swap = true; break;
        case kMagicNsec: nsec = true; break;
        case kMagicNsecSwapped: swap = true; nsec = true; break;
        default: throw ParseError("pcap: unsupported format (bad magic)");
    }

    ByteReader r(bytes, swap);
    r.skip(4);           // magic
    r.u16(); r.u16();    // version
    r.u32(); r.u32();    // thiszone, sigfigs
    r.u32();             // snaplen
    uint32_t link_type = r.u32();
    if (link_type != kLinkEthernet && link_type != kLinkRawIp)
        throw ParseError("pcap: unsupported link type " + std::to_string(link_type));

    std::vector<RawPacket> out;
    while (r.remaining() > 0) {
        if (r.remaining() < 16) {
            ++d.truncated_records;
            break;
        }
        uint32_t ts_sec = r.u32();
        uint32_t ts_frac = r.u32();
        uint32_t incl_len = r.u32();
        uint32_t orig_len = r.u32();
        if (r.remaining() < incl_len) {
            ++d.truncated_records;
            break;
        }
        auto frame = r.slice(incl_len);

        RawPacket pkt;
        pkt.ts_us = static_cast<int64_t>(ts_sec) * 1000000 +
                    (nsec ? static_cast<int64_t>(ts_frac) / 1000 : static_cast<int64_t>(ts_frac));
        if (parse_frame(frame, orig_len, link_type, pkt))
            out.push_back(std::move(pkt));
        else
            ++d.non_tcp_records;
    }
    return out;
}

std::vector<RawPacket> parse_pcap_file(const std::filesystem::path& path, IngestDiagnostics* diag) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return parse_pcap(bytes, diag);
}

FlowKey FlowKey::of(const RawPacket& p) {
    FlowKey k;
    k.ipv6 = p.ipv6;
    bool src_first = std::tie(p.src_ip, p.src_port) <= std::tie(p.dst_ip, p.dst_port);
    if (src_first) {
        k.ip_a = p.src_ip; k.port_a = p.src_port;
        k.ip_b = p.dst_ip; k.port_b = p.dst_port;
    } else {
        k.ip_a = p.dst_ip; k.port_a = p.dst_port;
        k.ip_b = p.src_ip; k.port_b = p.src_port;
    }
    return k;
}

std::vector<Connection> reassemble_flows(std::span<const RawPacket> packets,
                                         const IngestOptions& options, IngestDiagnostics* diag) {
    IngestDiagnostics local;
    IngestDiagnostics& d = diag ? *diag : local;

    std::map<FlowKey, std::vector<size_t>> flows;
    for (size_t i = 0; i < packets.size(); ++i)
        flows[FlowKey::of(packets[i])].push_back(i);

    struct FlowBuild {
        int64_t first_ts;
        Connection conn;
    };
    std::vector<FlowBuild> built;
    built.reserve(flows.size());

    for (auto& [key, idx] : flows) {
        std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
            return packets[a].ts_us < packets[b].ts_us;
        });

        // Client endpoint: sender of the first pure SYN; a lone SYN+ACK
        // still identifies the handshake (its receiver is the client);
        // otherwise fall back to the first packet's source.
        std::array<uint8_t, 16> client_ip{};
        uint16_t client_port = 0;
        bool found = false;
        for (size_t i : idx) {
            const RawPacket& p = packets[i];
            if ((p.tcp_flags & tcpflag::kSyn) && !(p.tcp_flags & tcpflag::kAck)) {
                client_ip = p.src_ip; client_port = p.src_port; found = true;
                break;
            }
        }
        if (!found) {
            for (size_t i : idx) {
                const RawPacket& p = packets[i];
                if ((p.tcp_flags & tcpflag::kSyn) && (p.tcp_flags & tcpflag::kAck)) {
                    client_ip = p.dst_ip; client_port = p.dst_port; found = true;
                    break;
                }
            }
        }
        if (!found) {
            const RawPacket& p = packets[idx.front()];
            client_ip = p.src_ip;
            client_port = p.src_port;
            ++d.synless_flows;
        }

        auto is_from_client = [&](const RawPacket& p) {
            return p.src_ip == client_ip && p.src_port == client_port;
        };

        Connection conn;
        const RawPacket& head = packets[idx.front()];
        conn.server_port = is_from_client(head) ? head.dst_port : head.src_port;

        std::set<std::pair<uint64_t, uint32_t>> seen_segments;  // keyed (dir|seq, len)
        std::vector<uint8_t> client_head_bytes;
        int client_payload_packets = 0;

        for (size_t i : idx) {
            const RawPacket& p = packets[i];
            bool outgoing = is_from_client(p);
            if (p.payload_len > 0) {
                uint64_t dir_seq = (outgoing ? (1ULL << 32) : 0) | p.seq;
                if (!seen_segments.insert({dir_seq, p.payload_len}).second)
                    ++d.duplicate_segments;
                if (outgoing && client_payload_packets < options.sni_max_packets) {
                    client_head_bytes.insert(client_head_bytes.end(), p.payload_prefix.begin(),
                                             p.payload_prefix.end());
                    ++client_payload_packets;
                }
            }
            if (p.payload_len == 0 && !options.retain_acks) {
                ++d.zero_payload_dropped;
                continue;
            }
            conn.packets.push_back(PacketRecord{
                p.ts_us, outgoing ? Direction::Outgoing : Direction::Incoming,
                static_cast<int32_t>(p.payload_len)});
        }
        if (conn.packets.empty()) continue;

        conn.server_name = extract_sni(client_head_bytes);

        if (options.filter_ports) {
            bool keep = std::find(options.keep_ports.begin(), options.keep_ports.end(),
                                  static_cast<uint16_t>(conn.server_port)) !=
                        options.keep_ports.end();
            if (!keep) {
                ++d.port_filtered_flows;
                continue;
            }
        }
        built.push_back({conn.packets.front().ts_us, std::move(conn)});
    }

    std::stable_sort(built.begin(), built.end(),
                     [](const FlowBuild& a, const FlowBuild& b) { return a.first_ts < b.first_ts; });

    std::vector<Connection> out;
    out.reserve(built.size());
    for (size_t i = 0; i < built.size(); ++i) {
        built[i].conn.conn_id = static_cast<int32_t>(i);
        out.push_back(std::move(built[i].conn));
    }
    return out;
}

std::optional<std::string> extract_sni(std::span<const uint8_t> payload) {
    // Reassemble the handshake stream from consecutive TLS records of
    // type 22 (a ClientHello may span records).
    std::vector<uint8_t> hs;
    size_t pos = 0;
    while (pos + 5 <= payload.size()) {
        if (payload[pos] != 22) break;
        uint16_t rec_len = be16(payload, pos + 3);
        size_t have = std::min<size_t>(rec_len, payload.size() - (pos + 5));
        hs.insert(hs.end(), payload.begin() + pos + 5, payload.begin() + pos + 5 + have);
        pos += 5 + have;
        if (have < rec_len) break;  // record truncated by capture
    }
    if (hs.size() < 4) return std::nullopt;
    std::span<const uint8_t> b(hs);

    if (b[0] != 1) return std::nullopt;  // not a ClientHello
    size_t p = 4;                        // skip handshake type + 24-bit length
    if (b.size() < p + 2 + 32 + 1) return std::nullopt;
    p += 2 + 32;  // client_version + random
    uint8_t session_id_len = b[p];
    p += 1 + session_id_len;
    if (b.size() < p + 2) return std::nullopt;
    uint16_t cipher_len = be16(b, p);
    p += 2 + cipher_len;
    if (b.size() < p + 1) return std::nullopt;
    uint8_t comp_len = b[p];
    p += 1 + comp_len;
    if (b.size() < p + 2) return std::nullopt;
    uint16_t ext_total = be16(b, p);
    p += 2;
    size_t ext_end = std::min(b.size(), p + ext_total);

    while (p + 4 <= ext_end) {
        uint16_t ext_type = be16(b, p);
        uint16_t ext_len = be16(b, p + 2);
        p += 4;
        if (p + ext_len > ext_end) return std::nullopt;
        if (ext_type == 0x0000) {
            if (ext_len < 5) return std::nullopt;
            size_t q = p + 2;  // server_name_list length
            uint8_t name_type = b[q];
            uint16_t name_len = be16(b, q + 1);
            q += 3;
            if (name_type != 0 || q + name_len > p + ext_len) return std::nullopt;
            return std::string(b.begin() + q, b.begin() + q + name_len);
        }
        p += ext_len;
    }
    return std::nullopt;
}

TraceSample ingest_session(const std::filesystem::path& pcap_path, SampleMeta meta,
                           const IngestOptions& options, IngestDiagnostics* diag) {
    auto raw = parse_pcap_file(pcap_path, diag);
    auto conns = reassemble_flows(raw, options, diag);

    int64_t capture_start = 0;
    if (!raw.empty()) {
        capture_start = raw.front().ts_us;
        for (const RawPacket& p : raw) capture_start = std::min(capture_start, p.ts_us);
    }
    for (Connection& c : conns)
        for (PacketRecord& p : c.packets) p.ts_us -= capture_start;

    if (meta.first_keystroke_us) {
        for (Connection& c : conns)
            c.established_before_typing = c.first_ts() < *meta.first_keystroke_us;
    }

    TraceSample sample = make_sample(std::move(meta), std::move(conns));
    if (!options.retain_acks) require_valid(sample);
    return sample;
}

}  // namespace kwfp
