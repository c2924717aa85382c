#include "kwfp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "kwfp/rng.hpp"

namespace kwfp {

namespace {

constexpr int32_t kMinSize = 60;
constexpr int32_t kMaxSize = 1460;
constexpr int64_t kCaptureEpochUs = 1'600'000'000'000'000;

std::string pad_num(int v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

using PscMap = std::map<std::pair<Direction, int32_t>, int64_t>;

PscMap psc_of(const std::vector<Connection>& conns) {
    PscMap m;
    for (const auto& c : conns)
        for (const auto& p : c.packets) ++m[{p.dir, p.size}];
    return m;
}

int64_t psc_l1(const PscMap& a, const PscMap& b) {
    int64_t dist = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() || ib != b.end()) {
        if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
            dist += std::abs(ia->second);
            ++ia;
        } else if (ia == a.end() || ib->first < ia->first) {
            dist += std::abs(ib->second);
            ++ib;
        } else {
            dist += std::abs(ia->second - ib->second);
            ++ia;
            ++ib;
        }
    }
    return dist;
}

// Connection-count/packet-count/timing/domain skeleton; sizes are
// filled separately so keywords can share a skeleton.
struct Skeleton {
    struct Conn {
        std::string domain;
        int64_t start_us;
        std::vector<int64_t> ts;
        std::vector<Direction> dirs;
    };
    std::vector<Conn> conns;
};

Skeleton draw_skeleton(Rng& rng, const EngineProfile& profile) {
    Skeleton sk;
    int n_conns = static_cast<int>(rng.uniform_int(3, 8));
    int64_t start = 0;
    for (int c = 0; c < n_conns; ++c) {
        Skeleton::Conn conn;
        conn.domain = profile.primary_domains.empty()
                          ? "search.test"
                          : profile.primary_domains[rng.uniform_below(
                                profile.primary_domains.size())];
        conn.start_us = start;
        int n_packets = static_cast<int>(rng.uniform_int(20, 200));
        int64_t ts = start;
        for (int p = 0; p < n_packets; ++p) {
            ts += rng.uniform_int(500, 5000);
            conn.ts.push_back(ts);
            conn.dirs.push_back(rng.uniform01() < 0.3 ? Direction::Outgoing
                                                      : Direction::Incoming);
        }
        sk.conns.push_back(std::move(conn));
        start += rng.uniform_int(10'000, 50'000);
    }
    return sk;
}

std::vector<Connection> fill_sizes(const Skeleton& sk, Rng& rng) {
    std::vector<Connection> conns;
    conns.reserve(sk.conns.size());
    for (const auto& sc : sk.conns) {
        Connection c;
        c.server_name = sc.domain;
        c.server_port = 443;
        for (size_t p = 0; p < sc.ts.size(); ++p)
            c.packets.push_back({sc.ts[p], sc.dirs[p],
                                 static_cast<int32_t>(rng.uniform_int(kMinSize, kMaxSize))});
        conns.push_back(std::move(c));
    }
    return conns;
}

}  // namespace

nlohmann::ordered_json EngineProfile::to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["primary_domains"] = primary_domains;
    j["noise_domains"] = noise_domains;
    j["noise_conn_rate"] = noise_conn_rate;
    j["template_noise"] = template_noise;
    j["drift_rate"] = drift_rate;
    j["psc_margin"] = psc_margin;
    j["shared_skeleton"] = shared_skeleton;
    return j;
}

EngineProfile EngineProfile::from_json(const nlohmann::json& j) {
    EngineProfile p;
    p.name = j.value("name", p.name);
    if (j.contains("primary_domains"))
        p.primary_domains = j["primary_domains"].get<std::vector<std::string>>();
    if (j.contains("noise_domains"))
        p.noise_domains = j["noise_domains"].get<std::vector<std::string>>();
    p.noise_conn_rate = j.value("noise_conn_rate", p.noise_conn_rate);
    p.template_noise = j.value("template_noise", p.template_noise);
    p.drift_rate = j.value("drift_rate", p.drift_rate);
    p.psc_margin = j.value("psc_margin", p.psc_margin);
    p.shared_skeleton = j.value("shared_skeleton", p.shared_skeleton);
    return p;
}

EngineProfile stable_profile() {
    EngineProfile p;
    p.name = "stable";
    p.primary_domains = {"search.stable.test"};
    p.noise_domains = {};
    p.noise_conn_rate = 0.0;
    p.template_noise = 1.5;
    p.drift_rate = 0.0;
    return p;
}

EngineProfile noisy_profile() {
    EngineProfile p;
    p.name = "noisy";
    p.primary_domains = {"search.noisy.test"};
    p.noise_domains = {"ads-net.test", "trackhub.test", "cdn-pool.test",
                       "newsfeed.test", "metrics-z.test", "adsync.test"};
    p.noise_conn_rate = 4.0;
    p.template_noise = 6.0;
    p.drift_rate = 0.0;
    return p;
}

EngineProfile profile_by_name(const std::string& name) {
    if (name == "stable") return stable_profile();
    if (name == "noisy") return noisy_profile();
    throw UsageError("unknown profile \"" + name + "\", expected stable|noisy");
}

nlohmann::ordered_json World::spec_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["n_keywords"] = n_keywords;
    j["n_background"] = n_background;
    j["profile"] = profile.to_json();
    return j;
}

const KeywordTemplate& World::find(const std::string& keyword) const {
    for (const auto& t : templates)
        if (t.keyword == keyword) return t;
    throw ValidationError("keyword \"" + keyword + "\" is not in this world");
}

World build_world(uint64_t seed, int n_keywords, const EngineProfile& profile, int n_background) {
    if (n_keywords < 2) throw UsageError("build_world: need at least 2 keywords");
    if (n_background < 0) throw UsageError("build_world: n_background must be >= 0");

    World world;
    world.seed = seed;
    world.n_keywords = n_keywords;
    world.n_background = n_background;
    world.profile = profile;

    Rng base(seed);
    Skeleton shared;
    if (profile.shared_skeleton) {
        Rng sk_rng = base.derive({0x534B454CULL});
        shared = draw_skeleton(sk_rng, profile);
    }

    const int total = n_keywords + n_background;
    std::vector<PscMap> accepted_psc;
    constexpr int kMaxAttempts = 64;
    for (int idx = 0; idx < total; ++idx) {
        KeywordTemplate tmpl;
        tmpl.background = idx >= n_keywords;
        tmpl.keyword = tmpl.background ? "bg-" + pad_num(idx - n_keywords, 5)
                                       : "kw-" + pad_num(idx, 4);

        bool placed = false;
        for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
            Rng rng = base.derive({0x544D504CULL, static_cast<uint64_t>(idx),
                                   static_cast<uint64_t>(attempt)});
            Skeleton sk = profile.shared_skeleton ? shared : draw_skeleton(rng, profile);
            tmpl.connections = fill_sizes(sk, rng);

            PscMap mine = psc_of(tmpl.connections);
            bool clash = false;
            for (const PscMap& other : accepted_psc) {
                if (static_cast<double>(psc_l1(mine, other)) < profile.psc_margin) {
                    clash = true;
                    break;
                }
            }
            if (!clash) {
                accepted_psc.push_back(std::move(mine));
                placed = true;
            }
        }
        if (!placed)
            throw ValidationError("build_world: cannot keep templates " +
                                  std::to_string(profile.psc_margin) +
                                  " apart in PSC distance; use fewer keywords");
        world.templates.push_back(std::move(tmpl));
    }
    return world;
}

TraceSample sample_trace(const World& world, const std::string& keyword, int visit_index,
                         double gap) {
    const KeywordTemplate* tmpl = nullptr;
    size_t idx = 0;
    for (size_t i = 0; i < world.templates.size(); ++i) {
        if (world.templates[i].keyword == keyword) {
            tmpl = &world.templates[i];
            idx = i;
            break;
        }
    }
    if (!tmpl) throw ValidationError("keyword \"" + keyword + "\" is not in this world");

    const EngineProfile& profile = world.profile;
    Rng base(world.seed);
    // Drift direction is fixed per (keyword, packet): samples taken at
    // the same gap cluster around the same displaced template.
    Rng drift_rng = base.derive({0xD21F7ULL, idx});
    Rng visit_rng = base.derive({0x56495349ULL, idx, static_cast<uint64_t>(visit_index),
                                 double_bits(gap)});

    std::vector<Connection> conns;
    conns.reserve(tmpl->connections.size());
    int64_t span = 0;
    for (const Connection& tc : tmpl->connections) {
        Connection c = tc;
        for (PacketRecord& p : c.packets) {
            double drifted = static_cast<double>(p.size);
            double u = drift_rng.normal(0.0, 1.0);
            drifted += gap * profile.drift_rate * u;
            if (profile.template_noise > 0)
                drifted += visit_rng.normal(0.0, profile.template_noise);
            p.size = static_cast<int32_t>(
                std::clamp<double>(std::llround(drifted), kMinSize, kMaxSize));
            span = std::max(span, p.ts_us);
        }
        conns.push_back(std::move(c));
    }

    uint64_t extra = visit_rng.poisson(profile.noise_conn_rate);
    for (uint64_t e = 0; e < extra && !profile.noise_domains.empty(); ++e) {
        Connection nc;
        nc.server_name = profile.noise_domains[visit_rng.uniform_below(profile.noise_domains.size())];
        nc.server_port = 443;
        int n_packets = static_cast<int>(visit_rng.uniform_int(5, 50));
        int64_t ts = visit_rng.uniform_int(0, std::max<int64_t>(span, 1));
        for (int p = 0; p < n_packets; ++p) {
            ts += visit_rng.uniform_int(500, 5000);
            nc.packets.push_back({ts,
                                  visit_rng.uniform01() < 0.3 ? Direction::Outgoing
                                                              : Direction::Incoming,
                                  static_cast<int32_t>(visit_rng.uniform_int(kMinSize, kMaxSize))});
        }
        conns.push_back(std::move(nc));
    }

    SampleMeta meta;
    meta.keyword_label = tmpl->background ? kNonTargetedLabel : tmpl->keyword;
    meta.search_engine = profile.name;
    meta.browser = "synth";
    meta.mode = SearchMode::Addressbar;
    meta.capture_start_us = kCaptureEpochUs +
                            static_cast<int64_t>(std::llround(gap * 3'600'000'000.0)) +
                            static_cast<int64_t>(visit_index) * 60'000'000;
    meta.visit_index = visit_index;

    TraceSample sample = make_sample(std::move(meta), std::move(conns));
    require_valid(sample);
    return sample;
}

Dataset generate_dataset(const World& world, int visits, double gap, int background_visits) {
    if (visits < 1) throw UsageError("generate_dataset: visits must be >= 1");
    if (background_visits < 0)
        throw UsageError("generate_dataset: background_visits must be >= 0");
    if (background_visits == 0) background_visits = visits;
    Dataset ds;
    ds.provenance = "synth world seed=" + std::to_string(world.seed);
    for (const auto& tmpl : world.templates) {
        int n = tmpl.background ? background_visits : visits;
        for (int v = 0; v < n; ++v)
            ds.samples.push_back(sample_trace(world, tmpl.keyword, v, gap));
    }
    return ds;
}

}  // namespace kwfp
