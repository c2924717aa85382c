#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kwfp/trace.hpp"

namespace kwfp {

// Bucket used by the census for connections without an SNI hostname.
constexpr const char* kNoSniBucket = "(none)";

struct SldOptions {
    // Suffixes that need three labels to identify the owner. A tiny
    // built-in list; override via config for anything exotic.
    std::set<std::string> multi_label_suffixes{"co.uk", "com.au", "ac.uk"};
};

// Hostnames are lowercased and stripped of a trailing dot before the
// label rules apply; single-label names pass through unchanged.
std::string second_level_domain(const std::string& hostname, const SldOptions& opts = {});

struct DomainCensus {
    std::map<std::string, uint64_t> counts;  // second-level domain -> connections
    uint64_t total_connections = 0;
};

DomainCensus domain_census(const TraceSample& sample, const SldOptions& opts = {});
DomainCensus domain_census(const Dataset& dataset, const SldOptions& opts = {});

struct TraceStats {
    uint64_t packet_count = 0;
    uint64_t connection_count = 0;
    uint64_t bytes_incoming = 0;
    uint64_t bytes_outgoing = 0;
    double load_time_s = 0.0;  // last packet minus first packet
};

TraceStats trace_stats(const TraceSample& sample);

// Drops every packet observed before the first keystroke; connections
// that end up empty disappear; persistent pre-typing connections keep
// their post-typing tail. Requires meta.first_keystroke_us.
TraceSample addressbar_filter(const TraceSample& sample);

// Keeps exactly the connections whose SNI second-level domain is in
// the allowlist; SNI-less connections are dropped.
TraceSample domain_filter(const TraceSample& sample, const std::set<std::string>& allowlist,
                          const SldOptions& opts = {});

struct PlatformDomain {
    std::string domain;
    double share;  // fraction of dataset A's connections
};

// Second-level domains seen in A but never in B, ranked by their share
// of A's connections.
std::vector<PlatformDomain> platform_specific_domains(const Dataset& a, const Dataset& b,
                                                      const SldOptions& opts = {});

}  // namespace kwfp
