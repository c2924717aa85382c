#include "doctest.h"

#include <cmath>

#include "kwfp/countermeasures.hpp"
#include "kwfp/features.hpp"
#include "support/checks.hpp"
#include "support/random_data.hpp"

using namespace kwfp;

namespace {

constexpr Direction In = Direction::Incoming;
constexpr Direction Out = Direction::Outgoing;

TraceSample sample_of(const std::vector<std::pair<Direction, int32_t>>& pattern) {
    Connection c;
    c.server_port = 443;
    int64_t ts = 0;
    for (const auto& [dir, size] : pattern) {
        c.packets.push_back({ts, dir, size});
        ts += 1000;
    }
    SampleMeta m;
    m.keyword_label = "kw";
    m.search_engine = "e";
    m.browser = "b";
    return make_sample(m, {c});
}

}  // namespace

TEST_CASE("defaults follow the reference parameters") {
    CmConfig cm;
    CHECK(cm.mtu == 1500);
    CHECK(cm.mss == 1000);
}

TEST_CASE("pad_to_mtu pads every packet and reports overhead") {
    auto [padded, report] = pad_to_mtu(sample_of({{Out, 520}, {In, 1400}}), CmConfig{});
    REQUIRE(padded.connections.size() == 1);
    CHECK(padded.connections[0].packets[0].size == 1500);
    CHECK(padded.connections[0].packets[1].size == 1500);
    CHECK(report.original_bytes == 1920);
    CHECK(report.transformed_bytes == 3000);
    CHECK(report.overhead == doctest::Approx(0.5625));
    // timestamps and directions untouched
    CHECK(padded.connections[0].packets[0].ts_us == 0);
    CHECK(padded.connections[0].packets[0].dir == Out);
}

TEST_CASE("pad_to_mtu is the identity on already-padded traces") {
    TraceSample s = sample_of({{In, 1500}, {Out, 1500}});
    auto [padded, report] = pad_to_mtu(s, CmConfig{});
    CHECK(padded == s);
    CHECK(report.overhead == 0.0);
}

TEST_CASE("pad_to_mtu is idempotent and preserves packet counts") {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        TraceSample s = testdata::random_sample(rng);
        auto [once, r1] = pad_to_mtu(s, CmConfig{});
        auto [twice, r2] = pad_to_mtu(once, CmConfig{});
        CHECK(once == twice);
        CHECK(r2.overhead == 0.0);
        CHECK(once.packet_count() == s.packet_count());
    }
}

TEST_CASE("pad_to_mtu names oversized packets") {
    TraceSample s = sample_of({{In, 1501}});
    check_throws_containing<ValidationError>([&] { pad_to_mtu(s, CmConfig{}); },
                                             "connections[0].packets[0]");
}

TEST_CASE("after pad_to_mtu, PSC depends only on per-direction counts") {
    TraceSample a = sample_of({{Out, 100}, {In, 700}, {In, 900}});
    TraceSample b = sample_of({{Out, 1400}, {In, 60}, {In, 1337}});
    auto [pa, ra] = pad_to_mtu(a, CmConfig{});
    auto [pb, rb] = pad_to_mtu(b, CmConfig{});
    FeatureVector fa = psc(pa);
    FeatureVector fb = psc(pb);
    CHECK(fa.names == fb.names);
    CHECK(fa.values == fb.values);
    for (const auto& name : fa.names) CHECK(name.find("01500") != std::string::npos);
}

TEST_CASE("httpos forced draws leave degenerate intervals unchanged") {
    CmConfig cm;
    cm.rng_seed = 5;
    // outgoing already at MTU and incoming exactly at 3*MSS
    auto [out, report] = httpos_transform(sample_of({{Out, 1500}, {In, 3000}}), cm);
    REQUIRE(out.connections.size() == 1);
    const auto& pkts = out.connections[0].packets;
    REQUIRE(pkts.size() == 4);  // 1 outgoing + 3 segments
    CHECK(pkts[0].size == 1500);
    CHECK(pkts[1].size == 1000);
    CHECK(pkts[2].size == 1000);
    CHECK(pkts[3].size == 1000);
    CHECK(report.transformed_bytes == 4500);
}

TEST_CASE("httpos segmentation conserves the padded byte count") {
    CmConfig cm;
    cm.rng_seed = 33;
    Rng rng(100);
    for (int i = 0; i < 100; ++i) {
        TraceSample s = testdata::random_sample(rng);
        auto [out, report] = httpos_transform(s, cm, static_cast<uint64_t>(i));
        uint64_t total = 0;
        for (const auto& c : out.connections) total += c.byte_total();
        CHECK(total == report.transformed_bytes);
        CHECK(report.transformed_bytes >= report.original_bytes);
        // segments never exceed MSS on the incoming side
        for (const auto& c : out.connections)
            for (const auto& p : c.packets)
                if (p.dir == In) CHECK(p.size <= cm.mss * 3);
    }
}

TEST_CASE("httpos segments inherit the original timestamp and order") {
    CmConfig cm;
    cm.rng_seed = 9;
    TraceSample s = sample_of({{In, 2500}, {Out, 100}});
    auto [out, report] = httpos_transform(s, cm);
    const auto& pkts = out.connections[0].packets;
    REQUIRE(pkts.size() >= 3);
    for (size_t i = 0; i + 1 < pkts.size(); ++i) CHECK(pkts[i].ts_us <= pkts[i + 1].ts_us);
    CHECK(pkts[0].ts_us == 0);
    CHECK(pkts[1].ts_us == 0);  // same original timestamp
}

TEST_CASE("httpos is deterministic per seed and varies across seeds") {
    TraceSample s = sample_of({{Out, 100}, {In, 900}, {In, 1400}, {Out, 333}});
    CmConfig a;
    a.rng_seed = 1;
    CmConfig b;
    b.rng_seed = 2;
    auto [outA1, rA1] = httpos_transform(s, a);
    auto [outA2, rA2] = httpos_transform(s, a);
    auto [outB, rB] = httpos_transform(s, b);
    CHECK(outA1 == outA2);
    CHECK(rA1.transformed_bytes == rA2.transformed_bytes);
    CHECK(rA1.transformed_bytes != rB.transformed_bytes);
}

TEST_CASE("httpos clamps incoming packets above 3*MSS and flags them") {
    CmConfig cm;
    cm.mtu = 1500;
    cm.mss = 100;  // 3*MSS = 300 < packet size
    cm.rng_seed = 4;
    auto [out, report] = httpos_transform(sample_of({{In, 500}}), cm);
    CHECK(report.clamped_packets == 1);
    // interval clamps to [500, 500]: padded size is unchanged, segmented by 100
    uint64_t total = 0;
    for (const auto& p : out.connections[0].packets) total += static_cast<uint64_t>(p.size);
    CHECK(total == 500);
    CHECK(out.connections[0].packets.size() == 5);
}

TEST_CASE("httpos rejects outgoing packets above the MTU") {
    CmConfig cm;
    CHECK_THROWS_AS(httpos_transform(sample_of({{Out, 1600}}), cm), ValidationError);
}

TEST_CASE("per-packet httpos output never shrinks a packet") {
    CmConfig cm;
    cm.rng_seed = 77;
    Rng rng(41);
    for (int i = 0; i < 50; ++i) {
        TraceSample s = testdata::random_sample(rng);
        auto [out, report] = httpos_transform(s, cm, static_cast<uint64_t>(i));
        CHECK(report.transformed_bytes >= report.original_bytes);
    }
}

TEST_CASE("bandwidth_overhead matches an independent sum for pad_to_mtu") {
    Rng rng(55);
    Dataset ds;
    for (int i = 0; i < 40; ++i) ds.samples.push_back(testdata::random_sample(rng));
    CmConfig cm;
    auto [transformed, reports] = apply_defense(ds, Defense::PadToMtu, cm);
    OverheadReport total = bandwidth_overhead(ds, transformed);

    uint64_t orig = 0, pad = 0, packets = 0;
    for (const auto& s : ds.samples)
        for (const auto& c : s.connections)
            for (const auto& p : c.packets) {
                orig += static_cast<uint64_t>(p.size);
                pad += static_cast<uint64_t>(cm.mtu - p.size);
                ++packets;
            }
    CHECK(total.original_bytes == orig);
    CHECK(total.transformed_bytes == orig + pad);
    CHECK(total.overhead == doctest::Approx(static_cast<double>(pad) /
                                            static_cast<double>(orig)));
    CHECK(total.transformed_bytes == packets * static_cast<uint64_t>(cm.mtu));
}

TEST_CASE("bandwidth_overhead of the identity transform is zero") {
    Rng rng(66);
    Dataset ds;
    for (int i = 0; i < 10; ++i) ds.samples.push_back(testdata::random_sample(rng));
    OverheadReport report = bandwidth_overhead(ds, ds);
    CHECK(report.overhead == 0.0);
}

TEST_CASE("bandwidth_overhead rejects misaligned datasets") {
    Rng rng(67);
    Dataset a, b;
    a.samples.push_back(testdata::random_sample(rng));
    CHECK_THROWS_AS(bandwidth_overhead(a, b), ValidationError);
}

TEST_CASE("httpos mean incoming pad approaches (3*MSS - s) / 2") {
    CmConfig cm;
    cm.rng_seed = 123;
    const int32_t s = 1000;
    const int n = 10000;
    std::vector<std::pair<Direction, int32_t>> pattern(n, {In, s});
    auto [out, report] = httpos_transform(sample_of(pattern), cm);
    double mean_pad = (static_cast<double>(report.transformed_bytes) -
                       static_cast<double>(report.original_bytes)) /
                      n;
    double expected = (3.0 * cm.mss - s) / 2.0;
    CHECK(std::abs(mean_pad - expected) / expected < 0.05);
}

TEST_CASE("apply_defense keeps per-sample reports aligned") {
    Rng rng(68);
    Dataset ds;
    for (int i = 0; i < 12; ++i) ds.samples.push_back(testdata::random_sample(rng));
    CmConfig cm;
    cm.rng_seed = 9;
    auto [transformed, reports] = apply_defense(ds, Defense::Httpos, cm, 3);
    REQUIRE(reports.size() == ds.samples.size());
    OverheadReport total = bandwidth_overhead(ds, transformed);
    uint64_t sum_orig = 0, sum_new = 0;
    for (const auto& r : reports) {
        sum_orig += r.original_bytes;
        sum_new += r.transformed_bytes;
    }
    CHECK(sum_orig == total.original_bytes);
    CHECK(sum_new == total.transformed_bytes);

    // per-sample streams: parallelism does not change the result
    auto [transformed2, reports2] = apply_defense(ds, Defense::Httpos, cm, 1);
    CHECK(transformed2 == transformed);
}
