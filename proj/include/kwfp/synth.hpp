#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kwfp/trace.hpp"

#include "json.hpp"

namespace kwfp {

// Traffic personality of a synthetic engine. "stable" mirrors a
// single-domain, low-noise responder; "noisy" mixes in third-party
// connections and heavier jitter.
struct EngineProfile {
    std::string name = "stable";
    std::vector<std::string> primary_domains{"search.stable.test"};
    std::vector<std::string> noise_domains;
    double noise_conn_rate = 0.0;   // mean extra connections per trace
    double template_noise = 0.0;    // per-packet size jitter stddev
    double drift_rate = 0.0;        // template perturbation per unit gap
    double psc_margin = 100.0;      // min pairwise template distance
    bool shared_skeleton = false;   // keywords differ only in sizes

    nlohmann::ordered_json to_json() const;
    static EngineProfile from_json(const nlohmann::json& j);
};

EngineProfile stable_profile();
EngineProfile noisy_profile();
EngineProfile profile_by_name(const std::string& name);

struct KeywordTemplate {
    std::string keyword;
    bool background = false;  // sampled traces carry the sentinel label
    std::vector<Connection> connections;
};

struct World {
    uint64_t seed = 0;
    int n_keywords = 0;
    int n_background = 0;
    EngineProfile profile;
    std::vector<KeywordTemplate> templates;

    // Enough to regenerate the world exactly.
    nlohmann::ordered_json spec_json() const;

    const KeywordTemplate& find(const std::string& keyword) const;
};

// Deterministic per (seed, n_keywords, n_background, profile); every
// pair of templates is at least psc_margin apart in PSC L1 distance.
World build_world(uint64_t seed, int n_keywords, const EngineProfile& profile,
                  int n_background = 0);

// Template + drift (fixed direction per keyword, magnitude gap *
// drift_rate) + size jitter + Poisson noise connections. Deterministic
// given (world seed, keyword, visit_index, gap).
TraceSample sample_trace(const World& world, const std::string& keyword, int visit_index,
                         double gap = 0.0);

// visit_index 0..visits-1 per template; background templates can use
// their own visit count (0 means same as visits).
Dataset generate_dataset(const World& world, int visits, double gap = 0.0,
                         int background_visits = 0);

}  // namespace kwfp
