#include "doctest.h"

#include <cmath>
#include <map>

#include "kwfp/features.hpp"
#include "kwfp/synth.hpp"
#include "support/checks.hpp"

using namespace kwfp;

namespace {

std::map<std::pair<char, int32_t>, double> psc_map(const FeatureVector& fv) {
    std::map<std::pair<char, int32_t>, double> m;
    for (size_t i = 0; i < fv.size(); ++i) {
        char dir = fv.names[i][4];
        int32_t size = std::stoi(fv.names[i].substr(6));
        m[{dir, size}] = fv.values[i];
    }
    return m;
}

double psc_l1(const std::map<std::pair<char, int32_t>, double>& a,
              const std::map<std::pair<char, int32_t>, double>& b) {
    double d = 0;
    for (const auto& [k, v] : a) {
        auto it = b.find(k);
        d += std::abs(v - (it == b.end() ? 0.0 : it->second));
    }
    for (const auto& [k, v] : b)
        if (!a.count(k)) d += std::abs(v);
    return d;
}

EngineProfile quiet_profile() {
    EngineProfile p = stable_profile();
    p.template_noise = 0.0;
    return p;
}

}  // namespace

TEST_CASE("build_world is deterministic in its seed") {
    World a = build_world(42, 5, stable_profile());
    World b = build_world(42, 5, stable_profile());
    REQUIRE(a.templates.size() == b.templates.size());
    for (size_t i = 0; i < a.templates.size(); ++i) {
        CHECK(a.templates[i].keyword == b.templates[i].keyword);
        CHECK(a.templates[i].connections == b.templates[i].connections);
    }
    World c = build_world(43, 5, stable_profile());
    CHECK(c.templates[0].connections != a.templates[0].connections);
}

TEST_CASE("build_world enforces the template margin") {
    World world = build_world(7, 6, stable_profile());
    std::vector<std::map<std::pair<char, int32_t>, double>> maps;
    for (const auto& t : world.templates) {
        TraceSample templ{SampleMeta{}, t.connections};
        maps.push_back(psc_map(psc(templ)));
    }
    for (size_t i = 0; i < maps.size(); ++i)
        for (size_t j = i + 1; j < maps.size(); ++j)
            CHECK(psc_l1(maps[i], maps[j]) >= world.profile.psc_margin);
}

TEST_CASE("build_world rejects degenerate requests") {
    CHECK_THROWS_AS(build_world(1, 1, stable_profile()), UsageError);
    EngineProfile impossible = stable_profile();
    impossible.psc_margin = 1e12;
    check_throws_containing<ValidationError>([&] { build_world(1, 3, impossible); },
                                             "fewer keywords");
}

TEST_CASE("zero-noise samples replay the template PSC exactly") {
    World world = build_world(11, 3, quiet_profile());
    for (const auto& tmpl : world.templates) {
        TraceSample s = sample_trace(world, tmpl.keyword, 0);
        TraceSample templ{s.meta, tmpl.connections};
        CHECK(psc_map(psc(s)) == psc_map(psc(templ)));
    }
}

TEST_CASE("a nearest-template PSC classifier is perfect in a zero-noise world") {
    World world = build_world(53, 8, quiet_profile());
    std::vector<std::map<std::pair<char, int32_t>, double>> templates;
    for (const auto& t : world.templates)
        templates.push_back(psc_map(psc(TraceSample{SampleMeta{}, t.connections})));

    for (size_t k = 0; k < world.templates.size(); ++k)
        for (int v = 0; v < 3; ++v) {
            TraceSample s = sample_trace(world, world.templates[k].keyword, v);
            auto mine = psc_map(psc(s));
            size_t best = 0;
            double best_dist = psc_l1(mine, templates[0]);
            for (size_t j = 1; j < templates.size(); ++j) {
                double d = psc_l1(mine, templates[j]);
                if (d < best_dist) {
                    best_dist = d;
                    best = j;
                }
            }
            CHECK(best == k);
        }
}

TEST_CASE("generation is deterministic given (seed, keyword, visit, gap)") {
    World world = build_world(13, 3, noisy_profile());
    TraceSample a = sample_trace(world, "kw-0001", 4, 2.5);
    TraceSample b = sample_trace(world, "kw-0001", 4, 2.5);
    CHECK(a == b);
    TraceSample c = sample_trace(world, "kw-0001", 5, 2.5);
    CHECK(a != c);
    CHECK_THROWS_AS(sample_trace(world, "kw-9999", 0, 0.0), ValidationError);
}

TEST_CASE("every generated sample validates cleanly") {
    World world = build_world(17, 4, noisy_profile(), 2);
    for (const auto& tmpl : world.templates)
        for (int v = 0; v < 5; ++v) {
            TraceSample s = sample_trace(world, tmpl.keyword, v, 1.0);
            CHECK(validate_sample(s).empty());
        }
}

TEST_CASE("background templates carry the sentinel label") {
    World world = build_world(19, 2, stable_profile(), 3);
    CHECK(world.templates[0].background == false);
    CHECK(world.templates[2].background == true);
    TraceSample t = sample_trace(world, "kw-0000", 0);
    CHECK(t.meta.keyword_label == "kw-0000");
    TraceSample b = sample_trace(world, "bg-00000", 0);
    CHECK(b.meta.keyword_label == kNonTargetedLabel);
}

TEST_CASE("noise connection count follows the configured rate") {
    EngineProfile p = noisy_profile();
    p.template_noise = 0.0;
    p.noise_conn_rate = 5.0;
    World world = build_world(23, 2, p);
    const size_t base = world.templates[0].connections.size();
    const int draws = 2000;
    double total_extra = 0;
    for (int v = 0; v < draws; ++v) {
        TraceSample s = sample_trace(world, "kw-0000", v);
        total_extra += static_cast<double>(s.connections.size() - base);
    }
    double mean = total_extra / draws;
    double sigma = std::sqrt(5.0 / draws);
    CHECK(std::abs(mean - 5.0) <= 3 * sigma + 0.01);
}

TEST_CASE("drift displaces samples from the template as the gap grows") {
    EngineProfile drifty = quiet_profile();
    drifty.drift_rate = 1.0;
    World world = build_world(29, 3, drifty);

    EngineProfile still = quiet_profile();
    World world0 = build_world(29, 3, still);

    auto mean_distance = [](const World& w, double gap) {
        double total = 0;
        int n = 0;
        for (const auto& tmpl : w.templates) {
            TraceSample templ{sample_trace(w, tmpl.keyword, 0, 0.0).meta, tmpl.connections};
            auto base = psc_map(psc(templ));
            for (int v = 0; v < 5; ++v) {
                TraceSample s = sample_trace(w, tmpl.keyword, v, gap);
                total += psc_l1(base, psc_map(psc(s)));
                ++n;
            }
        }
        return total / n;
    };
    CHECK(mean_distance(world, 10.0) > mean_distance(world0, 10.0));
    CHECK(mean_distance(world, 10.0) > mean_distance(world, 0.0));
}

TEST_CASE("shared skeletons differ only in sizes") {
    EngineProfile p = quiet_profile();
    p.shared_skeleton = true;
    World world = build_world(31, 4, p);
    const auto& first = world.templates[0].connections;
    for (const auto& tmpl : world.templates) {
        REQUIRE(tmpl.connections.size() == first.size());
        for (size_t c = 0; c < first.size(); ++c) {
            REQUIRE(tmpl.connections[c].packets.size() == first[c].packets.size());
            for (size_t i = 0; i < first[c].packets.size(); ++i) {
                CHECK(tmpl.connections[c].packets[i].ts_us == first[c].packets[i].ts_us);
                CHECK(tmpl.connections[c].packets[i].dir == first[c].packets[i].dir);
            }
        }
    }
}

TEST_CASE("generate_dataset enumerates visits per keyword") {
    World world = build_world(37, 2, stable_profile(), 1);
    Dataset ds = generate_dataset(world, 3);
    CHECK(ds.samples.size() == 9);  // 3 templates x 3 visits
    CHECK_THROWS_AS(generate_dataset(world, 0), UsageError);

    Dataset uneven = generate_dataset(world, 3, 0.0, 1);
    CHECK(uneven.samples.size() == 7);  // 2 keywords x 3 + 1 background x 1
    size_t background = 0;
    for (const auto& s : uneven.samples)
        if (!s.is_targeted()) ++background;
    CHECK(background == 1);
}

TEST_CASE("world spec JSON regenerates the same world") {
    World world = build_world(41, 3, noisy_profile(), 1);
    auto spec = world.spec_json();
    World again = build_world(spec["seed"].get<uint64_t>(), spec["n_keywords"].get<int>(),
                              EngineProfile::from_json(spec["profile"]),
                              spec["n_background"].get<int>());
    REQUIRE(again.templates.size() == world.templates.size());
    for (size_t i = 0; i < world.templates.size(); ++i)
        CHECK(again.templates[i].connections == world.templates[i].connections);
}
