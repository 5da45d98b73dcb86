#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "attnae/pipeline.hpp"
#include "attnae/scenario.hpp"

using namespace attnae;

namespace {

std::string temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "attnae_pipeline_test";
    std::filesystem::create_directories(dir);
    return dir.string();
}

SignalFrame small_frame(std::size_t n) {
    SignalFrame f;
    f.channels = default_channels();
    f.timestamps.resize(n);
    f.values = Matrix(n, f.channels.size());
    for (std::size_t r = 0; r < n; ++r) {
        f.timestamps[r] = static_cast<std::int64_t>(r);
        for (std::size_t c = 0; c < f.channels.size(); ++c)
            f.values(r, c) = static_cast<double>(r) + 0.1 * static_cast<double>(c);
    }
    return f;
}

}  // namespace

TEST_CASE("ingest well-formed file") {
    const auto dir = temp_dir();
    const auto path = dir + "/ok.csv";
    write_frame_csv(small_frame(300), path);
    const SignalFrame f = ingest_csv(path);
    CHECK(f.length() == 300);
    CHECK(f.feature_count() == 6);
    CHECK(f.values(299, 1) == Catch::Approx(299.1));
}

TEST_CASE("ingest interpolates small gaps and logs them") {
    const auto dir = temp_dir();
    const auto path = dir + "/gap.csv";
    {
        auto out = open_output(path);
        out << "timestamp";
        for (const auto& c : default_channels()) out << "," << c;
        out << "\n";
        // rows 0,1 then a 3-row gap, then row 5
        for (int t : {0, 1, 5}) {
            out << t;
            for (std::size_t c = 0; c < 6; ++c) out << "," << format_double(t * 10.0);
            out << "\n";
        }
    }
    const SignalFrame f = ingest_csv(path);
    REQUIRE(f.length() == 6);
    // linear between 10 and 50
    CHECK_THAT(f.values(2, 0), Catch::Matchers::WithinAbs(20.0, 1e-12));
    CHECK_THAT(f.values(3, 0), Catch::Matchers::WithinAbs(30.0, 1e-12));
    CHECK_THAT(f.values(4, 0), Catch::Matchers::WithinAbs(40.0, 1e-12));
    REQUIRE_FALSE(f.log.empty());
    CHECK(f.log[0].find("interpolated 3") != std::string::npos);
}

TEST_CASE("ingest errors: oversized gap, missing column, non-numeric, non-monotone") {
    const auto dir = temp_dir();
    {
        const auto path = dir + "/biggap.csv";
        auto out = open_output(path);
        out << "timestamp";
        for (const auto& c : default_channels()) out << "," << c;
        out << "\n0,1,1,1,1,1,1\n10,2,2,2,2,2,2\n";
        out.close();
        CHECK_THROWS_WITH(ingest_csv(path), Catch::Matchers::ContainsSubstring("gap"));
    }
    {
        const auto path = dir + "/missing.csv";
        auto out = open_output(path);
        out << "timestamp,ram_pool,ram_wtr,ram_con,cam,neutron_counts\n";
        out.close();
        CHECK_THROWS_WITH(ingest_csv(path), Catch::Matchers::ContainsSubstring("neutron_flux"));
    }
    {
        const auto path = dir + "/text.csv";
        auto out = open_output(path);
        out << "timestamp";
        for (const auto& c : default_channels()) out << "," << c;
        out << "\n0,1,1,oops,1,1,1\n";
        out.close();
        CHECK_THROWS_WITH(ingest_csv(path), Catch::Matchers::ContainsSubstring("ram_con"));
    }
    {
        const auto path = dir + "/mono.csv";
        auto out = open_output(path);
        out << "timestamp";
        for (const auto& c : default_channels()) out << "," << c;
        out << "\n5,1,1,1,1,1,1\n5,2,2,2,2,2,2\n";
        out.close();
        CHECK_THROWS_WITH(ingest_csv(path), Catch::Matchers::ContainsSubstring("monotone"));
    }
    CHECK_THROWS_AS(ingest_csv(dir + "/does_not_exist.csv"), missing_artifact_error);
}

TEST_CASE("scaler endpoints, interior point, round trip") {
    SignalFrame f = small_frame(10);
    ScalerBounds b;
    for (const auto& ch : f.channels) b.channels[ch] = {0.0, 36.0};
    b.channels["ram_pool"] = {0.0, 9.1};

    SignalFrame s = scale(f, b);
    CHECK(s.values(0, 0) == 0.0);  // x = min

    ScalerBounds exact;
    for (const auto& ch : f.channels) exact.channels[ch] = {-1.0, 3.0};
    SignalFrame g = small_frame(2);
    g.values(0, 0) = -1.0;
    g.values(1, 0) = 3.0;
    g.values(0, 1) = 0.0;  // -1 + 0.25*(3-(-1)) = 0
    SignalFrame gs = scale(g, exact);
    CHECK(gs.values(0, 0) == 0.0);
    CHECK(gs.values(1, 0) == 1.0);
    CHECK_THAT(gs.values(0, 1), Catch::Matchers::WithinAbs(0.25, 1e-15));

    // unscale(scale(x)) = x on interior points
    Rng rng(2);
    SignalFrame h = small_frame(50);
    for (double& v : h.values.raw()) v = rng.uniform(-0.9, 2.9);
    const SignalFrame back = unscale(scale(h, exact), exact);
    for (std::size_t k = 0; k < h.values.size(); ++k)
        CHECK_THAT(back.values.raw()[k], Catch::Matchers::WithinAbs(h.values.raw()[k], 1e-12));

    ScalerBounds bad;
    for (const auto& ch : f.channels) bad.channels[ch] = {2.0, 2.0};
    CHECK_THROWS_AS(scale(f, bad), std::domain_error);
}

TEST_CASE("clamping is idempotent and logged") {
    SignalFrame f = small_frame(5);
    ScalerBounds b;
    for (const auto& ch : f.channels) b.channels[ch] = {1.0, 2.0};
    const SignalFrame once = scale(f, b);
    for (double v : once.values.raw()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    bool logged = false;
    for (const auto& line : once.log) logged |= line.find("clamped") != std::string::npos;
    CHECK(logged);
}

TEST_CASE("window count and indexing contracts") {
    const SignalFrame f = small_frame(300);
    const WindowBatch wb = make_windows(f, 20);
    CHECK(wb.count() == 281);

    const WindowBatch one = make_windows(small_frame(20), 20);
    CHECK(one.count() == 1);
    CHECK(one.windows[0](0, 0) == 0.0);

    const WindowBatch w = make_windows(small_frame(30), 5);
    CHECK(w.windows[0](0, 0) == f.values(0, 0));
    CHECK(w.windows[1](0, 0) == f.values(1, 0));

    CHECK_THROWS_AS(make_windows(small_frame(10), 11), std::domain_error);

    // property: count = N - T + 1 for random N >= T
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t T = 1 + rng.uniform_int(30);
        const std::size_t N = T + rng.uniform_int(200);
        CHECK(make_windows(small_frame(N), T).count() == N - T + 1);
    }
}

TEST_CASE("train/val split arithmetic and guard gap") {
    const SignalFrame f = small_frame(1000);
    const auto [train, val] = split_train_val(f, 0.8, 20);
    CHECK(train.length() == 800);
    CHECK(val.length() == 180);
    CHECK(train.timestamps.back() == 799);
    CHECK(val.timestamps.front() == 820);

    CHECK_THROWS_AS(split_train_val(f, 1.0, 20), std::domain_error);
    CHECK_THROWS_AS(split_train_val(small_frame(30), 0.8, 20), std::domain_error);

    // exhaustive on small frames: no shared row between any train and val window
    for (std::size_t N : {120, 121, 137}) {
        const std::size_t T = 10;
        const auto [tr, va] = split_train_val(small_frame(N), 0.8, T);
        const auto twb = make_windows(tr, T);
        const auto vwb = make_windows(va, T);
        const std::size_t train_last_row = twb.starts.back() + T - 1;
        const std::size_t val_first_row =
            static_cast<std::size_t>(va.timestamps.front()) + vwb.starts.front();
        CHECK(train_last_row < val_first_row);
    }
}

TEST_CASE("bounds json round trip is bit exact") {
    ScalerBounds b;
    b.provenance = "test";
    b.channels["ram_pool"] = {0.123456789012345678, 9.87654321e17};
    b.channels["cam"] = {-1.0 / 3.0, 0.1 + 0.2};
    const auto dir = temp_dir();
    save_bounds(b, dir + "/bounds.json");
    const ScalerBounds r = load_bounds(dir + "/bounds.json");
    CHECK(r.provenance == "test");
    CHECK(r.channels.at("ram_pool").lo == b.channels.at("ram_pool").lo);
    CHECK(r.channels.at("ram_pool").hi == b.channels.at("ram_pool").hi);
    CHECK(r.channels.at("cam").lo == b.channels.at("cam").lo);
    CHECK(r.channels.at("cam").hi == b.channels.at("cam").hi);
}

TEST_CASE("frame csv round trip preserves values and determinism") {
    const auto dir = temp_dir();
    GenResult gen = gen_normal(OperationProfile::desk_test(300, 5));
    write_frame_csv(gen.frame, dir + "/f1.csv");
    write_frame_csv(gen.frame, dir + "/f2.csv");
    CHECK(read_file(dir + "/f1.csv") == read_file(dir + "/f2.csv"));
    const SignalFrame back = ingest_csv(dir + "/f1.csv");
    REQUIRE(back.length() == gen.frame.length());
    for (std::size_t k = 0; k < back.values.size(); ++k)
        CHECK(back.values.raw()[k] == gen.frame.values.raw()[k]);
}
