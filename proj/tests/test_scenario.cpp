#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "attnae/scenario.hpp"

using namespace attnae;

namespace {

double pearson(const Vec& a, const Vec& b) {
    const std::size_t n = a.size();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double num = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    return num / std::sqrt(va * vb);
}

}  // namespace

TEST_CASE("zero-noise constant power has the closed form") {
    OperationProfile p = OperationProfile::with_default_channels(1);
    p.duration = 50;
    p.initial_level = 0.8;
    p.segments = {{PowerSegment::Kind::Hold, 0.0, 50}};
    for (auto& [k, v] : p.noise) v = 0.0;
    const GenResult g = gen_normal(p);
    const std::size_t pool = g.frame.channel_index("ram_pool");
    const std::size_t counts = g.frame.channel_index("neutron_counts");
    const double expect_counts = 0.8 * p.full_power_counts;
    const double expect_pool = 2.0 + 1.5 * std::log10(1.0 + expect_counts);
    for (std::size_t t = 0; t < 50; ++t) {
        CHECK(g.frame.values(t, counts) == expect_counts);
        CHECK_THAT(g.frame.values(t, pool), Catch::Matchers::WithinAbs(expect_pool, 1e-12));
    }
}

TEST_CASE("generator is deterministic under seed and distinct across seeds") {
    const auto a = gen_normal(OperationProfile::desk_training(1500, 42));
    const auto b = gen_normal(OperationProfile::desk_training(1500, 42));
    CHECK(a.frame.values.raw() == b.frame.values.raw());
    const auto c = gen_normal(OperationProfile::desk_training(1500, 43));
    CHECK(a.frame.values.raw() != c.frame.values.raw());
}

TEST_CASE("pool tracks log power over a full cycle") {
    const auto g = gen_normal(OperationProfile::desk_training(1500, 3));
    const std::size_t pool = g.frame.channel_index("ram_pool");
    const std::size_t counts = g.frame.channel_index("neutron_counts");
    Vec pv, lv;
    for (std::size_t t = 0; t < g.frame.length(); ++t) {
        pv.push_back(g.frame.values(t, pool));
        lv.push_back(std::log10(1.0 + g.frame.values(t, counts)));
    }
    CHECK(pearson(pv, lv) > 0.9);
}

TEST_CASE("profile must tile the duration exactly") {
    OperationProfile p = OperationProfile::with_default_channels(1);
    p.duration = 100;
    p.segments = {{PowerSegment::Kind::Hold, 0.0, 60}};
    CHECK_THROWS_AS(gen_normal(p), std::domain_error);
    const auto d = OperationProfile::desk_training(3000, 1);
    std::size_t total = 0;
    for (const auto& s : d.segments) total += s.duration;
    CHECK(total == 3000);
    const auto t = OperationProfile::desk_test(300, 1);
    total = 0;
    for (const auto& s : t.segments) total += s.duration;
    CHECK(total == 300);
}

TEST_CASE("drift: closed form, isolation, mask, zero-slope warning") {
    const auto g = gen_normal(OperationProfile::desk_test(300, 9));
    InjectionSpec spec;
    spec.kind = InjectionSpec::Kind::Drift;
    spec.channel = "ram_wtr";
    spec.start = 0;
    spec.duration = 300;
    spec.amplitude = 0.01;
    const SignalFrame out = inject_drift(g.frame, spec);
    const std::size_t ch = out.channel_index("ram_wtr");
    // final offset exactly slope * (N-1)
    CHECK_THAT(out.values(299, ch) - g.frame.values(299, ch),
               Catch::Matchers::WithinAbs(0.01 * 299.0, 1e-12));
    CHECK(out.values(0, ch) == g.frame.values(0, ch));
    // other channels bit-identical
    for (std::size_t c = 0; c < out.feature_count(); ++c) {
        if (c == ch) continue;
        for (std::size_t t = 0; t < out.length(); ++t)
            REQUIRE(out.values(t, c) == g.frame.values(t, c));
    }
    std::size_t marked = 0;
    for (std::size_t t = 0; t < out.length(); ++t) marked += out.masked(t, ch) ? 1 : 0;
    CHECK(marked == 300);

    InjectionSpec zero = spec;
    zero.amplitude = 0.0;
    const SignalFrame same = inject_drift(g.frame, zero);
    CHECK(same.values.raw() == g.frame.values.raw());
    bool warned = false;
    for (const auto& l : same.log) warned |= l.find("zero slope") != std::string::npos;
    CHECK(warned);
    std::size_t still_marked = 0;
    for (std::size_t t = 0; t < same.length(); ++t)
        still_marked += same.masked(t, same.channel_index("ram_wtr")) ? 1 : 0;
    CHECK(still_marked == 300);

    InjectionSpec bad = spec;
    bad.channel = "nope";
    CHECK_THROWS_AS(inject_drift(g.frame, bad), std::domain_error);
}

TEST_CASE("spike: single sample, reference case, mask count, edges") {
    const auto g = gen_normal(OperationProfile::desk_test(300, 12));
    InjectionSpec one;
    one.kind = InjectionSpec::Kind::Spike;
    one.channel = "cam";
    one.start = 100;
    one.duration = 1;
    one.amplitude = 2.5;
    const SignalFrame out1 = inject_spike(g.frame, one);
    const std::size_t cam = out1.channel_index("cam");
    CHECK_THAT(out1.values(100, cam) - g.frame.values(100, cam),
               Catch::Matchers::WithinAbs(2.5, 1e-12));

    // the reference layout: ram_pool raised over [150, 200) of a 300 s frame
    const InjectionSpec ref = default_spike_spec(g.bounds);
    CHECK(ref.start == 150);
    CHECK(ref.duration == 50);
    const SignalFrame out2 = inject_spike(g.frame, ref);
    const std::size_t pool = out2.channel_index("ram_pool");
    std::size_t marked = 0;
    for (std::size_t t = 0; t < out2.length(); ++t) marked += out2.masked(t, pool) ? 1 : 0;
    CHECK(marked == 50);
    // plateau with half-height single-sample edges
    CHECK_THAT(out2.values(150, pool) - g.frame.values(150, pool),
               Catch::Matchers::WithinAbs(ref.amplitude * 0.5, 1e-12));
    CHECK_THAT(out2.values(175, pool) - g.frame.values(175, pool),
               Catch::Matchers::WithinAbs(ref.amplitude, 1e-12));
    CHECK_THAT(out2.values(199, pool) - g.frame.values(199, pool),
               Catch::Matchers::WithinAbs(ref.amplitude * 0.5, 1e-12));
    CHECK(out2.values(149, pool) == g.frame.values(149, pool));
    CHECK(out2.values(200, pool) == g.frame.values(200, pool));

    InjectionSpec oob = one;
    oob.start = 290;
    oob.duration = 20;
    CHECK_THROWS_AS(inject_spike(g.frame, oob), std::domain_error);
}

TEST_CASE("multi: empty list identity, disjoint union, per-channel independence") {
    const auto g = gen_normal(OperationProfile::desk_test(300, 20));
    const SignalFrame same = inject_multi(g.frame, {});
    CHECK(same.values.raw() == g.frame.values.raw());

    auto spike = [](const std::string& ch, std::size_t s, std::size_t d) {
        InjectionSpec sp;
        sp.kind = InjectionSpec::Kind::Spike;
        sp.channel = ch;
        sp.start = s;
        sp.duration = d;
        sp.amplitude = 1.0;
        return sp;
    };
    const SignalFrame two = inject_multi(g.frame, {spike("cam", 10, 5), spike("cam", 50, 7)});
    std::size_t cam = two.channel_index("cam");
    std::size_t marked = 0;
    for (std::size_t t = 0; t < two.length(); ++t) marked += two.masked(t, cam) ? 1 : 0;
    CHECK(marked == 12);

    const auto specs = default_concurrent_specs(g.bounds);
    const SignalFrame multi = inject_multi(g.frame, specs);
    // overlapping spikes on different channels keep independent masks
    const std::size_t wtr = multi.channel_index("ram_wtr");
    const std::size_t con = multi.channel_index("ram_con");
    CHECK(multi.masked(183, wtr));
    CHECK_FALSE(multi.masked(183, con));
    CHECK(multi.masked(188, wtr));
    CHECK(multi.masked(188, con));

    // all-or-nothing: one bad spec leaves the frame untouched
    auto bad = specs;
    bad.push_back(spike("ram_pool", 295, 20));
    CHECK_THROWS_AS(inject_multi(g.frame, bad), std::domain_error);
}

TEST_CASE("masks exactly delimit modified cells") {
    const auto g = gen_normal(OperationProfile::desk_test(300, 33));
    const auto specs = default_concurrent_specs(g.bounds);
    const SignalFrame out = inject_multi(g.frame, specs);
    for (std::size_t t = 0; t < out.length(); ++t)
        for (std::size_t c = 0; c < out.feature_count(); ++c) {
            const bool changed = out.values(t, c) != g.frame.values(t, c);
            const bool masked = out.masked(t, c);
            if (changed) CHECK(masked);
            if (masked) CHECK(changed);  // nonzero amplitudes everywhere in the defaults
        }
}

TEST_CASE("profile and injection json round trips") {
    const auto p = OperationProfile::desk_training(3000, 77);
    const auto j = profile_to_json(p);
    const auto back = profile_from_json(j);
    CHECK(back.duration == p.duration);
    CHECK(back.segments.size() == p.segments.size());
    CHECK(back.noise.at("ram_pool") == p.noise.at("ram_pool"));
    const auto g = gen_normal(p);
    const auto g2 = gen_normal(back);
    CHECK(g.frame.values.raw() == g2.frame.values.raw());

    const auto g3 = gen_normal(OperationProfile::desk_test(300, 1));
    auto specs = default_concurrent_specs(g3.bounds);
    const auto sj = injections_to_json(specs);
    const auto sback = injections_from_json(sj);
    REQUIRE(sback.size() == specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        CHECK(sback[i].channel == specs[i].channel);
        CHECK(sback[i].amplitude == specs[i].amplitude);
        CHECK(sback[i].start == specs[i].start);
    }
}
