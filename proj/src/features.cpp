#include "kwfp/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace kwfp {

namespace {

std::string pad_int(int64_t v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

std::vector<Burst> bursts_of_sequence(std::span<const PacketRecord> packets) {
    std::vector<Burst> out;
    for (const PacketRecord& p : packets) {
        if (out.empty() || out.back().dir != p.dir)
            out.push_back(Burst{p.dir, 0, 0});
        out.back().packet_count += 1;
        out.back().byte_sum += static_cast<uint64_t>(p.size);
    }
    return out;
}

// Linear interpolation of a curve to m evenly spaced points over its
// index domain; endpoints map to endpoints.
std::vector<double> interp_to(std::span<const double> curve, int m) {
    std::vector<double> out(static_cast<size_t>(m), 0.0);
    if (curve.empty()) return out;
    if (curve.size() == 1) {
        std::fill(out.begin(), out.end(), curve[0]);
        return out;
    }
    const double scale = static_cast<double>(curve.size() - 1) / static_cast<double>(m - 1);
    for (int j = 0; j < m; ++j) {
        double pos = scale * static_cast<double>(j);
        size_t lo = static_cast<size_t>(pos);
        size_t hi = std::min(lo + 1, curve.size() - 1);
        double frac = pos - static_cast<double>(lo);
        out[static_cast<size_t>(j)] = curve[lo] + frac * (curve[hi] - curve[lo]);
    }
    return out;
}

struct SeqStats {
    double max = 0, mean = 0, stddev = 0, p75 = 0;
};

SeqStats interarrival_stats(std::span<const PacketRecord> seq) {
    SeqStats st;
    if (seq.size() < 2) return st;
    std::vector<double> gaps;
    gaps.reserve(seq.size() - 1);
    for (size_t i = 1; i < seq.size(); ++i)
        gaps.push_back(static_cast<double>(seq[i].ts_us - seq[i - 1].ts_us) / 1e6);
    st.mean = mean_of(gaps);
    st.stddev = stddev_pop(gaps);
    st.max = *std::max_element(gaps.begin(), gaps.end());
    std::sort(gaps.begin(), gaps.end());
    st.p75 = percentile_sorted(gaps, 0.75);
    return st;
}

}  // namespace

std::vector<PacketRecord> merged_packets(const TraceSample& sample) {
    std::vector<PacketRecord> all;
    all.reserve(sample.packet_count());
    for (const Connection& c : sample.connections)
        all.insert(all.end(), c.packets.begin(), c.packets.end());
    std::stable_sort(all.begin(), all.end(),
                     [](const PacketRecord& a, const PacketRecord& b) { return a.ts_us < b.ts_us; });
    return all;
}

std::vector<Burst> extract_bursts(const TraceSample& sample, BurstScope scope) {
    if (scope == BurstScope::GlobalByTime) {
        auto merged = merged_packets(sample);
        return bursts_of_sequence(merged);
    }
    std::vector<Burst> out;
    for (const Connection& c : sample.connections) {
        auto bs = bursts_of_sequence(c.packets);
        out.insert(out.end(), bs.begin(), bs.end());
    }
    return out;
}

FeatureSetId feature_set_from_string(const std::string& s) {
    if (s == "psc") return FeatureSetId::Psc;
    if (s == "kfp") return FeatureSetId::Kfp;
    if (s == "etresp") return FeatureSetId::EtResp;
    if (s == "wfin") return FeatureSetId::Wfin;
    if (s == "wfinpp") return FeatureSetId::WfinPp;
    throw UsageError("unknown feature set \"" + s +
                     "\", expected psc|kfp|etresp|wfin|wfinpp");
}

const char* feature_set_string(FeatureSetId id) {
    switch (id) {
        case FeatureSetId::Psc: return "psc";
        case FeatureSetId::Kfp: return "kfp";
        case FeatureSetId::EtResp: return "etresp";
        case FeatureSetId::Wfin: return "wfin";
        case FeatureSetId::WfinPp: return "wfinpp";
    }
    return "?";
}

nlohmann::ordered_json FeatureParams::to_json() const {
    nlohmann::ordered_json j;
    j["initial_packets"] = initial_packets;
    j["direction_window"] = direction_window;
    j["max_conns"] = max_conns;
    j["max_bursts"] = max_bursts;
    j["interp_points"] = interp_points;
    j["pps_bins"] = pps_bins;
    j["concentration_windows"] = concentration_windows;
    j["concentration_window_size"] = concentration_window_size;
    j["burst_bin_bytes"] = burst_bin_bytes;
    j["etresp_signed"] = etresp_signed;
    j["feature_ports"] = feature_ports;
    return j;
}

FeatureParams FeatureParams::from_json(const nlohmann::json& j) {
    FeatureParams p;
    p.initial_packets = j.value("initial_packets", p.initial_packets);
    p.direction_window = j.value("direction_window", p.direction_window);
    p.max_conns = j.value("max_conns", p.max_conns);
    p.max_bursts = j.value("max_bursts", p.max_bursts);
    p.interp_points = j.value("interp_points", p.interp_points);
    p.pps_bins = j.value("pps_bins", p.pps_bins);
    p.concentration_windows = j.value("concentration_windows", p.concentration_windows);
    p.concentration_window_size = j.value("concentration_window_size", p.concentration_window_size);
    p.burst_bin_bytes = j.value("burst_bin_bytes", p.burst_bin_bytes);
    p.etresp_signed = j.value("etresp_signed", p.etresp_signed);
    if (j.contains("feature_ports")) p.feature_ports = j["feature_ports"].get<std::vector<int>>();
    return p;
}

FeatureVector psc(const TraceSample& sample) {
    std::map<std::pair<char, int32_t>, uint64_t> counts;
    for (const Connection& c : sample.connections)
        for (const PacketRecord& p : c.packets) ++counts[{direction_char(p.dir), p.size}];

    FeatureVector fv;
    for (const auto& [key, n] : counts)
        fv.push("psc", std::string("psc|") + key.first + "|" + pad_int(key.second, 5),
                static_cast<double>(n));
    return fv;
}

FeatureVector kfp_features(const TraceSample& sample, const FeatureParams& params) {
    const auto merged = merged_packets(sample);
    const double n = static_cast<double>(merged.size());

    FeatureVector fv;
    int ord = 0;
    auto emit = [&](const std::string& cat, const std::string& desc, double v) {
        fv.push(cat, "kfp|" + pad_int(ord++, 3) + "|" + desc, v);
    };

    size_t n_in = 0;
    for (const PacketRecord& p : merged)
        if (p.dir == Direction::Incoming) ++n_in;
    size_t n_out = merged.size() - n_in;

    emit("kfp_counts", "total_packets", n);
    emit("kfp_counts", "incoming_packets", static_cast<double>(n_in));
    emit("kfp_counts", "outgoing_packets", static_cast<double>(n_out));
    emit("kfp_ratio", "incoming_ratio", n > 0 ? static_cast<double>(n_in) / n : 0.0);
    emit("kfp_ratio", "outgoing_ratio", n > 0 ? static_cast<double>(n_out) / n : 0.0);

    for (Direction d : {Direction::Incoming, Direction::Outgoing}) {
        std::vector<double> positions;
        for (size_t i = 0; i < merged.size(); ++i)
            if (merged[i].dir == d) positions.push_back(static_cast<double>(i));
        emit("kfp_ordering", std::string("position_mean_") + direction_char(d), mean_of(positions));
        emit("kfp_ordering", std::string("position_std_") + direction_char(d),
             stddev_pop(positions));
    }

    // Packets per whole-second bin across the trace duration.
    std::vector<double> pps;
    if (!merged.empty()) {
        int64_t t0 = merged.front().ts_us;
        int64_t tmax = merged.back().ts_us;
        size_t bins = static_cast<size_t>((tmax - t0) / 1000000) + 1;
        pps.assign(bins, 0.0);
        for (const PacketRecord& p : merged) pps[static_cast<size_t>((p.ts_us - t0) / 1000000)] += 1;
    }
    double rest = 0;
    for (size_t b = static_cast<size_t>(params.pps_bins); b < pps.size(); ++b) rest += pps[b];
    for (int b = 0; b < params.pps_bins; ++b)
        emit("kfp_pps", "pps_bin_" + pad_int(b, 2),
             b < static_cast<int>(pps.size()) ? pps[static_cast<size_t>(b)] : 0.0);
    emit("kfp_pps", "pps_rest", rest);
    emit("kfp_pps", "pps_mean", mean_of(pps));
    emit("kfp_pps", "pps_std", stddev_pop(pps));
    emit("kfp_pps", "pps_min", pps.empty() ? 0.0 : *std::min_element(pps.begin(), pps.end()));
    emit("kfp_pps", "pps_max", pps.empty() ? 0.0 : *std::max_element(pps.begin(), pps.end()));

    // Outgoing concentration over non-overlapping windows.
    std::vector<double> conc;
    for (size_t start = 0; start < merged.size();
         start += static_cast<size_t>(params.concentration_window_size)) {
        size_t end = std::min(merged.size(), start + static_cast<size_t>(params.concentration_window_size));
        double c = 0;
        for (size_t i = start; i < end; ++i)
            if (merged[i].dir == Direction::Outgoing) c += 1;
        conc.push_back(c);
    }
    for (int w = 0; w < params.concentration_windows; ++w)
        emit("kfp_concentration", "concentration_" + pad_int(w, 2),
             w < static_cast<int>(conc.size()) ? conc[static_cast<size_t>(w)] : 0.0);
    emit("kfp_concentration", "concentration_mean", mean_of(conc));
    emit("kfp_concentration", "concentration_std", stddev_pop(conc));
    emit("kfp_concentration", "concentration_min",
         conc.empty() ? 0.0 : *std::min_element(conc.begin(), conc.end()));
    emit("kfp_concentration", "concentration_max",
         conc.empty() ? 0.0 : *std::max_element(conc.begin(), conc.end()));

    std::vector<PacketRecord> incoming, outgoing;
    for (const PacketRecord& p : merged)
        (p.dir == Direction::Incoming ? incoming : outgoing).push_back(p);
    struct { const char* tag; std::span<const PacketRecord> seq; } groups[] = {
        {"in", incoming}, {"out", outgoing}, {"all", merged}};
    for (const auto& g : groups) {
        SeqStats st = interarrival_stats(g.seq);
        emit("kfp_interarrival", std::string("iat_max_") + g.tag, st.max);
        emit("kfp_interarrival", std::string("iat_mean_") + g.tag, st.mean);
        emit("kfp_interarrival", std::string("iat_std_") + g.tag, st.stddev);
        emit("kfp_interarrival", std::string("iat_p75_") + g.tag, st.p75);
    }

    double duration =
        merged.empty() ? 0.0
                       : static_cast<double>(merged.back().ts_us - merged.front().ts_us) / 1e6;
    emit("kfp_time", "transmission_time", duration);
    return fv;
}

FeatureVector etresp_features(const TraceSample& sample, const FeatureParams& params) {
    if (params.interp_points < 2) throw UsageError("etresp: interp_points must be >= 2");
    const auto merged = merged_packets(sample);

    FeatureVector fv;
    size_t n_in = 0;
    for (const PacketRecord& p : merged)
        if (p.dir == Direction::Incoming) ++n_in;
    fv.push("etresp_counts", "etresp|000|total_packets", static_cast<double>(merged.size()));
    fv.push("etresp_counts", "etresp|001|incoming_packets", static_cast<double>(n_in));
    fv.push("etresp_counts", "etresp|002|outgoing_packets",
            static_cast<double>(merged.size() - n_in));

    auto bursts = bursts_of_sequence(merged);
    size_t in_bursts = 0;
    for (const Burst& b : bursts)
        if (b.dir == Direction::Incoming) ++in_bursts;
    fv.push("etresp_bursts", "etresp|003|incoming_bursts", static_cast<double>(in_bursts));

    std::vector<double> curve;
    curve.reserve(merged.size());
    double acc = 0;
    for (const PacketRecord& p : merged) {
        double s = static_cast<double>(p.size);
        acc += (p.dir == Direction::Incoming || !params.etresp_signed) ? s : -s;
        curve.push_back(acc);
    }
    auto pts = interp_to(curve, params.interp_points);
    for (size_t j = 0; j < pts.size(); ++j)
        fv.push("etresp_cumulative", "etresp|cum|" + pad_int(static_cast<int64_t>(j), 3), pts[j]);
    return fv;
}

FeatureVector wfin_features(const TraceSample& sample, const FeatureParams& params) {
    const auto merged = merged_packets(sample);
    FeatureVector fv;

    // unique packet size: per-direction distinct count + indicators
    std::set<int32_t> sizes_in, sizes_out;
    for (const PacketRecord& p : merged)
        (p.dir == Direction::Incoming ? sizes_in : sizes_out).insert(p.size);
    fv.push("unique_packet_size", "unique_packet_size|count|-",
            static_cast<double>(sizes_out.size()));
    fv.push("unique_packet_size", "unique_packet_size|count|+",
            static_cast<double>(sizes_in.size()));
    for (int32_t s : sizes_out)
        fv.push("unique_packet_size", "unique_packet_size|-|" + pad_int(s, 5), 1.0);
    for (int32_t s : sizes_in)
        fv.push("unique_packet_size", "unique_packet_size|+|" + pad_int(s, 5), 1.0);

    // initial outgoing packet sizes
    {
        std::vector<double> first_out;
        for (const PacketRecord& p : merged) {
            if (p.dir != Direction::Outgoing) continue;
            first_out.push_back(static_cast<double>(p.size));
            if (static_cast<int>(first_out.size()) >= params.initial_packets) break;
        }
        for (int i = 0; i < params.initial_packets; ++i)
            fv.push("initial_30_outgoing_packets", "initial_30_outgoing_packets|" + pad_int(i, 2),
                    i < static_cast<int>(first_out.size()) ? first_out[static_cast<size_t>(i)] : 0.0);
    }

    // packet size count
    {
        std::map<std::pair<char, int32_t>, uint64_t> counts;
        for (const PacketRecord& p : merged) ++counts[{direction_char(p.dir), p.size}];
        for (const auto& [key, cnt] : counts)
            fv.push("packet_size_count",
                    std::string("packet_size_count|") + key.first + "|" + pad_int(key.second, 5),
                    static_cast<double>(cnt));
    }

    // preposition / position of the first N packets of each direction:
    // opposite-direction / same-direction packets preceding each.
    {
        std::vector<double> pre_in, pos_in, pre_out, pos_out;
        size_t seen_in = 0, seen_out = 0;
        for (const PacketRecord& p : merged) {
            if (p.dir == Direction::Incoming) {
                if (static_cast<int>(pre_in.size()) < params.direction_window) {
                    pre_in.push_back(static_cast<double>(seen_out));
                    pos_in.push_back(static_cast<double>(seen_in));
                }
                ++seen_in;
            } else {
                if (static_cast<int>(pre_out.size()) < params.direction_window) {
                    pre_out.push_back(static_cast<double>(seen_in));
                    pos_out.push_back(static_cast<double>(seen_out));
                }
                ++seen_out;
            }
        }
        auto emit_window = [&](const char* cat, const std::vector<double>& v) {
            for (int i = 0; i < params.direction_window; ++i)
                fv.push(cat, std::string(cat) + "|" + pad_int(i, 3),
                        i < static_cast<int>(v.size()) ? v[static_cast<size_t>(i)] : 0.0);
        };
        emit_window("first_300_incoming_preposition", pre_in);
        emit_window("first_300_incoming_position", pos_in);
        emit_window("first_300_outgoing_preposition", pre_out);
        emit_window("first_300_outgoing_position", pos_out);
    }

    // initial bursts per direction (per-connection scope)
    const auto conn_bursts = extract_bursts(sample, BurstScope::PerConnection);
    {
        std::vector<double> first_out, first_in;
        for (const Burst& b : conn_bursts) {
            auto& dst = b.dir == Direction::Outgoing ? first_out : first_in;
            if (static_cast<int>(dst.size()) < params.max_bursts)
                dst.push_back(static_cast<double>(b.byte_sum));
        }
        for (int i = 0; i < params.max_bursts; ++i)
            fv.push("initial_outgoing_bursts", "initial_outgoing_bursts|" + pad_int(i, 2),
                    i < static_cast<int>(first_out.size()) ? first_out[static_cast<size_t>(i)] : 0.0);
        for (int i = 0; i < params.max_bursts; ++i)
            fv.push("initial_incoming_bursts", "initial_incoming_bursts|" + pad_int(i, 2),
                    i < static_cast<int>(first_in.size()) ? first_in[static_cast<size_t>(i)] : 0.0);
    }

    // average outgoing inter-arrival time (seconds)
    {
        std::vector<PacketRecord> outgoing;
        for (const PacketRecord& p : merged)
            if (p.dir == Direction::Outgoing) outgoing.push_back(p);
        fv.push("avg_outgoing_interarrival", "avg_outgoing_interarrival|0",
                interarrival_stats(outgoing).mean);
    }

    // initial packets, signed sizes
    for (int i = 0; i < params.initial_packets; ++i) {
        double v = 0.0;
        if (i < static_cast<int>(merged.size())) {
            const PacketRecord& p = merged[static_cast<size_t>(i)];
            v = p.dir == Direction::Incoming ? static_cast<double>(p.size)
                                             : -static_cast<double>(p.size);
        }
        fv.push("initial_30_packets", "initial_30_packets|" + pad_int(i, 2), v);
    }

    // unique burst size per direction
    {
        std::set<uint64_t> ub_in, ub_out;
        for (const Burst& b : conn_bursts)
            (b.dir == Direction::Incoming ? ub_in : ub_out).insert(b.byte_sum);
        fv.push("unique_burst_size", "unique_burst_size|-", static_cast<double>(ub_out.size()));
        fv.push("unique_burst_size", "unique_burst_size|+", static_cast<double>(ub_in.size()));
    }

    // per-connection categories over the first max_conns connections
    {
        auto is_feature_port = [&](int32_t port) {
            return std::find(params.feature_ports.begin(), params.feature_ports.end(), port) !=
                   params.feature_ports.end();
        };
        for (int i = 0; i < params.max_conns; ++i) {
            double largest_out = 0, out_bytes = 0, in_bytes = 0, out_bytes_port = 0;
            if (i < static_cast<int>(sample.connections.size())) {
                const Connection& c = sample.connections[static_cast<size_t>(i)];
                for (const PacketRecord& p : c.packets) {
                    if (p.dir == Direction::Outgoing) {
                        largest_out = std::max(largest_out, static_cast<double>(p.size));
                        out_bytes += static_cast<double>(p.size);
                    } else {
                        in_bytes += static_cast<double>(p.size);
                    }
                }
                if (is_feature_port(c.server_port)) out_bytes_port = out_bytes;
            }
            double total = out_bytes + in_bytes;
            fv.push("first_20_largest_outgoing_bytes_per_conn",
                    "first_20_largest_outgoing_bytes_per_conn|" + pad_int(i, 2), largest_out);
            fv.push("ratio_incoming_bytes_per_conn",
                    "ratio_incoming_bytes_per_conn|" + pad_int(i, 2),
                    total > 0 ? in_bytes / total : 0.0);
            fv.push("outgoing_bytes_per_conn", "outgoing_bytes_per_conn|" + pad_int(i, 2),
                    out_bytes);
            fv.push("outgoing_bytes_per_conn_port_443_80",
                    "outgoing_bytes_per_conn_port_443_80|" + pad_int(i, 2), out_bytes_port);
        }
    }

    // initial outgoing packet sizes within the first connection
    {
        std::vector<double> v;
        if (!sample.connections.empty()) {
            for (const PacketRecord& p : sample.connections.front().packets) {
                if (p.dir != Direction::Outgoing) continue;
                v.push_back(static_cast<double>(p.size));
                if (static_cast<int>(v.size()) >= params.initial_packets) break;
            }
        }
        for (int i = 0; i < params.initial_packets; ++i)
            fv.push("initial_30_outgoing_first_conn",
                    "initial_30_outgoing_first_conn|" + pad_int(i, 2),
                    i < static_cast<int>(v.size()) ? v[static_cast<size_t>(i)] : 0.0);
    }

    // burst size count, bucketed
    {
        std::map<std::pair<char, uint64_t>, uint64_t> counts;
        for (const Burst& b : conn_bursts)
            ++counts[{direction_char(b.dir), b.byte_sum / static_cast<uint64_t>(params.burst_bin_bytes)}];
        for (const auto& [key, cnt] : counts)
            fv.push("burst_size_count",
                    std::string("burst_size_count|") + key.first + "|" +
                        pad_int(static_cast<int64_t>(key.second), 6),
                    static_cast<double>(cnt));
    }

    // per-hostname largest outgoing packet, hostnames by first appearance
    {
        std::vector<std::string> order;
        std::map<std::string, double> largest;
        for (const Connection& c : sample.connections) {
            if (!c.server_name) continue;
            if (!largest.count(*c.server_name)) {
                order.push_back(*c.server_name);
                largest[*c.server_name] = 0.0;
            }
            for (const PacketRecord& p : c.packets)
                if (p.dir == Direction::Outgoing)
                    largest[*c.server_name] =
                        std::max(largest[*c.server_name], static_cast<double>(p.size));
        }
        for (int i = 0; i < params.max_conns; ++i)
            fv.push("first_20_largest_outgoing_bytes_per_hostname",
                    "first_20_largest_outgoing_bytes_per_hostname|" + pad_int(i, 2),
                    i < static_cast<int>(order.size()) ? largest[order[static_cast<size_t>(i)]] : 0.0);
        fv.push("hostname_count", "hostname_count|0", static_cast<double>(order.size()));
    }

    return fv;
}

FeatureVector wfinpp_extras(const TraceSample& sample, const FeatureParams& params) {
    const auto merged = merged_packets(sample);
    FeatureVector fv;

    // reversed cumulative packet sizes (unsigned, last -> first)
    {
        std::vector<double> curve;
        curve.reserve(merged.size());
        double acc = 0;
        for (auto it = merged.rbegin(); it != merged.rend(); ++it) {
            acc += static_cast<double>(it->size);
            curve.push_back(acc);
        }
        auto pts = interp_to(curve, params.interp_points);
        for (size_t j = 0; j < pts.size(); ++j)
            fv.push("reversed_cumulative_packet_sizes",
                    "reversed_cumulative_packet_sizes|" + pad_int(static_cast<int64_t>(j), 3),
                    pts[j]);
    }

    // reversed cumulative burst sizes (global scope)
    const auto bursts = extract_bursts(sample, BurstScope::GlobalByTime);
    {
        std::vector<double> curve;
        curve.reserve(bursts.size());
        double acc = 0;
        for (auto it = bursts.rbegin(); it != bursts.rend(); ++it) {
            acc += static_cast<double>(it->byte_sum);
            curve.push_back(acc);
        }
        auto pts = interp_to(curve, params.interp_points);
        for (size_t j = 0; j < pts.size(); ++j)
            fv.push("reversed_cumulative_burst_sizes",
                    "reversed_cumulative_burst_sizes|" + pad_int(static_cast<int64_t>(j), 3),
                    pts[j]);
    }

    fv.push("total_packets", "total_packets|0", static_cast<double>(merged.size()));

    double max_in = 0, max_out = 0;
    for (const PacketRecord& p : merged) {
        if (p.dir == Direction::Incoming)
            max_in = std::max(max_in, static_cast<double>(p.size));
        else
            max_out = std::max(max_out, static_cast<double>(p.size));
    }
    fv.push("max_packet_size", "max_packet_size|-", max_out);
    fv.push("max_packet_size", "max_packet_size|+", max_in);

    // average packet size within the largest incoming burst (by bytes)
    const Burst* largest = nullptr;
    for (const Burst& b : bursts)
        if (b.dir == Direction::Incoming && (!largest || b.byte_sum > largest->byte_sum))
            largest = &b;
    fv.push("largest_incoming_burst_avg_size", "largest_incoming_burst_avg_size|0",
            largest ? static_cast<double>(largest->byte_sum) / largest->packet_count : 0.0);

    return fv;
}

FeatureVector extract_features(const TraceSample& sample, FeatureSetId id,
                               const FeatureParams& params) {
    switch (id) {
        case FeatureSetId::Psc: return psc(sample);
        case FeatureSetId::Kfp: return kfp_features(sample, params);
        case FeatureSetId::EtResp: return etresp_features(sample, params);
        case FeatureSetId::Wfin: return wfin_features(sample, params);
        case FeatureSetId::WfinPp: {
            FeatureVector fv = wfin_features(sample, params);
            FeatureVector extra = wfinpp_extras(sample, params);
            for (size_t i = 0; i < extra.size(); ++i)
                fv.push(extra.categories[i], extra.names[i], extra.values[i]);
            return fv;
        }
    }
    throw UsageError("unknown feature set id");
}

void VectorSpace::rebuild_index() {
    index.clear();
    index.reserve(names.size());
    for (size_t i = 0; i < names.size(); ++i) index[names[i]] = i;
}

VectorSpace fit_vector_space(const Dataset& train, FeatureSetId id, const FeatureParams& params) {
    if (train.samples.empty()) throw UsageError("fit_vector_space: training dataset is empty");
    std::map<std::string, std::string> name_to_cat;
    for (const TraceSample& s : train.samples) {
        FeatureVector fv = extract_features(s, id, params);
        for (size_t i = 0; i < fv.size(); ++i) name_to_cat.emplace(fv.names[i], fv.categories[i]);
    }
    VectorSpace space;
    space.names.reserve(name_to_cat.size());
    for (const auto& [name, cat] : name_to_cat) {
        space.names.push_back(name);
        space.categories.push_back(cat);
    }
    space.rebuild_index();
    return space;
}

std::vector<double> vectorize(const VectorSpace& space, const TraceSample& sample, FeatureSetId id,
                              const FeatureParams& params) {
    std::vector<double> out(space.dim(), 0.0);
    FeatureVector fv = extract_features(sample, id, params);
    for (size_t i = 0; i < fv.size(); ++i) {
        auto it = space.index.find(fv.names[i]);
        if (it != space.index.end()) out[it->second] = fv.values[i];
    }
    return out;
}

Matrix featurize(const VectorSpace& space, const Dataset& dataset, FeatureSetId id,
                 const FeatureParams& params, int jobs) {
    Matrix X(dataset.samples.size(), space.dim());
    parallel_for(dataset.samples.size(), jobs, [&](size_t i) {
        auto row = vectorize(space, dataset.samples[i], id, params);
        std::copy(row.begin(), row.end(), X.row(i).begin());
    });
    return X;
}

}  // namespace kwfp
