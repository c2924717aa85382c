#include "kwfp/countermeasures.hpp"

#include <algorithm>

#include "kwfp/rng.hpp"
#include "kwfp/util.hpp"

namespace kwfp {

nlohmann::ordered_json CmConfig::to_json() const {
    nlohmann::ordered_json j;
    j["mtu"] = mtu;
    j["mss"] = mss;
    j["rng_seed"] = rng_seed;
    return j;
}

nlohmann::ordered_json OverheadReport::to_json() const {
    nlohmann::ordered_json j;
    j["original_bytes"] = original_bytes;
    j["transformed_bytes"] = transformed_bytes;
    j["overhead"] = overhead;
    j["clamped_packets"] = clamped_packets;
    return j;
}

Defense defense_from_string(const std::string& s) {
    if (s == "padtomtu") return Defense::PadToMtu;
    if (s == "httpos") return Defense::Httpos;
    throw UsageError("unknown defense \"" + s + "\", expected padtomtu|httpos");
}

const char* defense_string(Defense d) {
    return d == Defense::PadToMtu ? "padtomtu" : "httpos";
}

namespace {

void check_config(const CmConfig& c) {
    if (c.mtu < 1 || c.mss < 1) throw UsageError("countermeasure: mtu and mss must be >= 1");
    if (c.mss > c.mtu) throw UsageError("countermeasure: mss must not exceed mtu");
}

void finish_overhead(OverheadReport& report) {
    report.overhead = report.original_bytes == 0
                          ? 0.0
                          : (static_cast<double>(report.transformed_bytes) -
                             static_cast<double>(report.original_bytes)) /
                                static_cast<double>(report.original_bytes);
}

}  // namespace

std::pair<TraceSample, OverheadReport> pad_to_mtu(const TraceSample& sample,
                                                  const CmConfig& config) {
    check_config(config);
    TraceSample out = sample;
    OverheadReport report;
    for (size_t ci = 0; ci < out.connections.size(); ++ci) {
        for (size_t pi = 0; pi < out.connections[ci].packets.size(); ++pi) {
            PacketRecord& p = out.connections[ci].packets[pi];
            if (p.size > config.mtu)
                throw ValidationError("pad_to_mtu: packet connections[" + std::to_string(ci) +
                                      "].packets[" + std::to_string(pi) + "] has size " +
                                      std::to_string(p.size) + " > mtu " +
                                      std::to_string(config.mtu));
            report.original_bytes += static_cast<uint64_t>(p.size);
            p.size = config.mtu;
            report.transformed_bytes += static_cast<uint64_t>(p.size);
        }
    }
    finish_overhead(report);
    return {std::move(out), report};
}

std::pair<TraceSample, OverheadReport> httpos_transform(const TraceSample& sample,
                                                        const CmConfig& config,
                                                        uint64_t sample_index) {
    check_config(config);
    Rng rng = Rng(config.rng_seed).derive({0x48545450ULL, sample_index});
    OverheadReport report;

    TraceSample out;
    out.meta = sample.meta;
    out.connections.reserve(sample.connections.size());
    for (const Connection& c : sample.connections) {
        Connection nc = c;
        nc.packets.clear();
        for (const PacketRecord& p : c.packets) {
            report.original_bytes += static_cast<uint64_t>(p.size);
            if (p.dir == Direction::Outgoing) {
                if (p.size > config.mtu)
                    throw ValidationError("httpos: outgoing packet size " +
                                          std::to_string(p.size) + " > mtu " +
                                          std::to_string(config.mtu));
                int32_t padded =
                    static_cast<int32_t>(rng.uniform_int(p.size, config.mtu));
                nc.packets.push_back({p.ts_us, p.dir, padded});
                report.transformed_bytes += static_cast<uint64_t>(padded);
            } else {
                int64_t cap = static_cast<int64_t>(3) * config.mss;
                if (p.size > cap) ++report.clamped_packets;
                int64_t upper = std::max<int64_t>(p.size, cap);
                int64_t padded = rng.uniform_int(p.size, upper);
                int64_t full = (padded + config.mss - 1) / config.mss;  // segments
                for (int64_t s = 0; s < full; ++s) {
                    int64_t seg = s + 1 < full ? config.mss : padded - config.mss * (full - 1);
                    nc.packets.push_back({p.ts_us, p.dir, static_cast<int32_t>(seg)});
                }
                report.transformed_bytes += static_cast<uint64_t>(padded);
            }
        }
        out.connections.push_back(std::move(nc));
    }
    finish_overhead(report);
    return {std::move(out), report};
}

std::pair<Dataset, std::vector<OverheadReport>> apply_defense(const Dataset& dataset,
                                                              Defense defense,
                                                              const CmConfig& config, int jobs) {
    Dataset out;
    out.provenance = dataset.provenance + " [" + defense_string(defense) + "]";
    out.samples.resize(dataset.samples.size());
    std::vector<OverheadReport> reports(dataset.samples.size());
    parallel_for(dataset.samples.size(), jobs, [&](size_t i) {
        auto [transformed, report] =
            defense == Defense::PadToMtu
                ? pad_to_mtu(dataset.samples[i], config)
                : httpos_transform(dataset.samples[i], config, i);
        out.samples[i] = std::move(transformed);
        reports[i] = report;
    });
    return {std::move(out), std::move(reports)};
}

OverheadReport bandwidth_overhead(const Dataset& original, const Dataset& transformed) {
    if (original.samples.size() != transformed.samples.size())
        throw ValidationError("bandwidth_overhead: datasets are not aligned (" +
                              std::to_string(original.samples.size()) + " vs " +
                              std::to_string(transformed.samples.size()) + " samples)");
    OverheadReport report;
    for (const auto& s : original.samples)
        for (const auto& c : s.connections) report.original_bytes += c.byte_total();
    for (const auto& s : transformed.samples)
        for (const auto& c : s.connections) report.transformed_bytes += c.byte_total();
    finish_overhead(report);
    return report;
}

}  // namespace kwfp
