#include "kwfp/preprocess.hpp"

#include <algorithm>

#include "kwfp/util.hpp"

namespace kwfp {

std::string second_level_domain(const std::string& hostname, const SldOptions& opts) {
    if (hostname.empty()) throw ValidationError("second_level_domain: empty hostname");
    std::string h = lowercase(hostname);
    if (h.back() == '.') h.pop_back();
    if (h.empty()) return hostname;

    std::vector<std::string> labels;
    size_t start = 0;
    for (size_t i = 0; i <= h.size(); ++i) {
        if (i == h.size() || h[i] == '.') {
            labels.push_back(h.substr(start, i - start));
            start = i + 1;
        }
    }
    if (labels.size() < 2) return h;

    std::string last_two = labels[labels.size() - 2] + "." + labels.back();
    if (labels.size() >= 3 && opts.multi_label_suffixes.count(last_two))
        return labels[labels.size() - 3] + "." + last_two;
    return last_two;
}

DomainCensus domain_census(const TraceSample& sample, const SldOptions& opts) {
    DomainCensus census;
    for (const Connection& c : sample.connections) {
        std::string key = c.server_name ? second_level_domain(*c.server_name, opts) : kNoSniBucket;
        ++census.counts[key];
        ++census.total_connections;
    }
    return census;
}

DomainCensus domain_census(const Dataset& dataset, const SldOptions& opts) {
    DomainCensus census;
    for (const TraceSample& s : dataset.samples) {
        DomainCensus one = domain_census(s, opts);
        for (const auto& [k, v] : one.counts) census.counts[k] += v;
        census.total_connections += one.total_connections;
    }
    return census;
}

TraceStats trace_stats(const TraceSample& sample) {
    TraceStats st;
    st.connection_count = sample.connections.size();
    int64_t min_ts = 0, max_ts = 0;
    bool first = true;
    for (const Connection& c : sample.connections) {
        for (const PacketRecord& p : c.packets) {
            ++st.packet_count;
            if (p.dir == Direction::Incoming)
                st.bytes_incoming += static_cast<uint64_t>(p.size);
            else
                st.bytes_outgoing += static_cast<uint64_t>(p.size);
            if (first) {
                min_ts = max_ts = p.ts_us;
                first = false;
            } else {
                min_ts = std::min(min_ts, p.ts_us);
                max_ts = std::max(max_ts, p.ts_us);
            }
        }
    }
    st.load_time_s = first ? 0.0 : static_cast<double>(max_ts - min_ts) / 1e6;
    return st;
}

TraceSample addressbar_filter(const TraceSample& sample) {
    if (!sample.meta.first_keystroke_us)
        throw ValidationError("addressbar_filter: meta.first_keystroke_us missing");
    const int64_t offset = *sample.meta.first_keystroke_us;

    std::vector<Connection> kept;
    for (const Connection& c : sample.connections) {
        Connection nc = c;
        nc.packets.clear();
        for (const PacketRecord& p : c.packets)
            if (p.ts_us >= offset) nc.packets.push_back(p);
        if (!nc.packets.empty()) kept.push_back(std::move(nc));
    }

    SampleMeta meta = sample.meta;
    meta.mode = SearchMode::Addressbar;
    TraceSample out = make_sample(std::move(meta), std::move(kept));
    require_valid(out);
    return out;
}

TraceSample domain_filter(const TraceSample& sample, const std::set<std::string>& allowlist,
                          const SldOptions& opts) {
    if (allowlist.empty()) throw UsageError("domain_filter: allowlist is empty");

    std::vector<Connection> kept;
    for (const Connection& c : sample.connections) {
        if (!c.server_name) continue;
        if (allowlist.count(second_level_domain(*c.server_name, opts)))
            kept.push_back(c);
    }
    if (kept.empty()) {
        std::string names;
        for (const auto& d : allowlist) names += (names.empty() ? "" : ", ") + d;
        throw ValidationError("domain_filter: no connection matches allowlist {" + names + "}");
    }
    return make_sample(sample.meta, std::move(kept));
}

std::vector<PlatformDomain> platform_specific_domains(const Dataset& a, const Dataset& b,
                                                      const SldOptions& opts) {
    DomainCensus ca = domain_census(a, opts);
    DomainCensus cb = domain_census(b, opts);

    std::vector<PlatformDomain> out;
    for (const auto& [domain, count] : ca.counts) {
        if (domain == kNoSniBucket) continue;
        if (cb.counts.count(domain)) continue;
        double share = ca.total_connections == 0
                           ? 0.0
                           : static_cast<double>(count) / static_cast<double>(ca.total_connections);
        out.push_back({domain, share});
    }
    std::sort(out.begin(), out.end(), [](const PlatformDomain& x, const PlatformDomain& y) {
        if (x.share != y.share) return x.share > y.share;
        return x.domain < y.domain;
    });
    return out;
}

}  // namespace kwfp
