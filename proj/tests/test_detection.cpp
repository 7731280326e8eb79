#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "qkd/detection.hpp"

using namespace qkd;

TEST_SUITE("detection") {

TEST_CASE("perfect detector clicks at the arrival time") {
    DetectorConfig cfg;
    cfg.efficiency = 1.0;
    cfg.jitter_sigma_ps = 0.0;
    cfg.dead_time_ps = 0.0;
    Detector det(0, cfg);
    Rng rng(1);
    for (int64_t t : {int64_t{0}, int64_t{100}, int64_t{101}, int64_t{5000000}}) {
        const auto click = det.detect(t, rng);
        REQUIRE(click.has_value());
        CHECK(*click == t);
    }
}

TEST_CASE("efficiency thinning is binomial") {
    DetectorConfig cfg;
    cfg.efficiency = 0.30;
    cfg.jitter_sigma_ps = 0.0;
    cfg.dead_time_ps = 0.0;
    Detector det(0, cfg);
    Rng rng(2);
    const int n = 200000;
    int clicks = 0;
    for (int i = 0; i < n; ++i)
        if (det.detect(static_cast<int64_t>(i) * 1000000, rng)) ++clicks;
    const double sigma = std::sqrt(n * 0.3 * 0.7);
    CHECK(std::abs(clicks - 0.3 * n) < 4.0 * sigma);
}

TEST_CASE("dead time suppresses closely spaced clicks") {
    DetectorConfig cfg;
    cfg.efficiency = 1.0;
    cfg.jitter_sigma_ps = 0.0;
    cfg.dead_time_ps = 25000.0;
    Detector det(0, cfg);
    Rng rng(3);
    // arrivals every 10 ns: after each click the next two fall inside the
    // 25 ns dead time, so exactly every third arrival registers
    int clicks = 0;
    for (int i = 0; i < 300; ++i)
        if (det.detect(static_cast<int64_t>(i) * 10000, rng)) ++clicks;
    CHECK(clicks == 100);

    Detector slow(0, cfg);
    int clicks_slow = 0;
    for (int i = 0; i < 300; ++i)
        if (slow.detect(static_cast<int64_t>(i) * 30000, rng)) ++clicks_slow;
    CHECK(clicks_slow == 300);
}

TEST_CASE("timing jitter is zero-mean gaussian with the configured sigma") {
    DetectorConfig cfg;
    cfg.efficiency = 1.0;
    cfg.jitter_sigma_ps = 250.0;
    cfg.dead_time_ps = 0.0;
    Detector det(0, cfg);
    Rng rng(4);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const int64_t t = static_cast<int64_t>(i) * 1000000;
        const auto click = det.detect(t, rng);
        REQUIRE(click.has_value());
        const double r = static_cast<double>(*click - t);
        sum += r;
        sum2 += r * r;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum2 / n - mean * mean);
    CHECK(std::abs(mean) < 5.0);
    CHECK(sd == doctest::Approx(250.0).epsilon(0.02));
}

TEST_CASE("dark counts are a homogeneous poisson process") {
    DetectorConfig cfg;
    cfg.dark_rate_hz = 200.0;
    Rng rng(5);
    const int64_t span_ps = 2000000000000;  // 2 s
    const auto times = dark_count_times(cfg, 0, span_ps, rng);
    const double expected = 200.0 * 2.0;
    CHECK(std::abs(static_cast<double>(times.size()) - expected) < 4.0 * std::sqrt(expected));
    CHECK(std::is_sorted(times.begin(), times.end()));
    for (int64_t t : times) {
        CHECK(t >= 0);
        CHECK(t < span_ps);
    }

    // Kolmogorov-Smirnov test of the gap distribution against the
    // exponential with the configured mean, over many repetitions.
    Rng rng2(6);
    std::vector<double> gaps;
    const auto many = dark_count_times(cfg, 0, 500 * span_ps, rng2);
    for (size_t i = 1; i < many.size(); ++i)
        gaps.push_back(static_cast<double>(many[i] - many[i - 1]));
    std::sort(gaps.begin(), gaps.end());
    const double mean_gap = 1e12 / 200.0;
    double d = 0.0;
    const double n = static_cast<double>(gaps.size());
    for (size_t i = 0; i < gaps.size(); ++i) {
        const double cdf = 1.0 - std::exp(-gaps[i] / mean_gap);
        d = std::max(d, std::abs(cdf - (i + 1) / n));
        d = std::max(d, std::abs(cdf - i / n));
    }
    // alpha = 0.001 critical value
    CHECK(d < 1.95 / std::sqrt(n));

    CHECK(dark_count_times(DetectorConfig{.dark_rate_hz = 0.0}, 0, span_ps, rng).empty());
}

TEST_CASE("standard channel map") {
    const auto map = ChannelMap::standard();
    CHECK(map.size() == 10);
    for (uint8_t ch = 0; ch < 10; ++ch) {
        const auto& c = map.lookup(ch);
        CHECK(map.id_of(c.party, c.basis, c.outcome) == ch);
        CHECK((c.party == (ch < 6 ? Party::Alice : Party::Bob)));
    }
    CHECK(map.lookup(0).basis == 0);
    CHECK(map.lookup(0).outcome == 1);
    CHECK(map.lookup(9).basis == 1);
    CHECK(map.lookup(9).outcome == -1);
    CHECK_THROWS_AS(map.lookup(10), std::out_of_range);
    CHECK_THROWS_AS(map.id_of(Party::Bob, 2, 1), std::out_of_range);
}

TEST_CASE("qtag empty stream round trip") {
    const auto bytes = write_tags({});
    CHECK(bytes.size() == kQtagHeaderSize);
    CHECK(read_tags(bytes).empty());
}

TEST_CASE("qtag round trip preserves tags") {
    std::vector<TimeTag> tags;
    Rng rng(7);
    int64_t t = 0;
    for (int i = 0; i < 5000; ++i) {
        t += static_cast<int64_t>(rng.below(1000000));
        tags.push_back({t, static_cast<uint8_t>(rng.below(10))});
    }
    const auto bytes = write_tags(tags);
    CHECK(bytes.size() == kQtagHeaderSize + kQtagRecordSize * tags.size());
    const auto back = read_tags(bytes);
    CHECK(back == tags);
}

TEST_CASE("qtag timestamp regression reports the record offset") {
    std::vector<TimeTag> tags = {{100, 0}, {200, 1}, {150, 2}, {300, 3}};
    auto bytes = write_tags({{100, 0}, {200, 1}, {250, 2}, {300, 3}});
    // corrupt record 2 in place to regress
    const size_t off = kQtagHeaderSize + 2 * kQtagRecordSize;
    for (int i = 0; i < 8; ++i) bytes[off + i] = (i == 0) ? 150 : 0;
    try {
        read_tags(bytes);
        FAIL("expected TagParseError");
    } catch (const TagParseError& e) {
        CHECK(e.byte_offset == off);
    }
    CHECK_THROWS_AS(write_tags(tags), TagParseError);
}

TEST_CASE("qtag malformed inputs") {
    const auto good = write_tags({{100, 0}});

    auto bad_magic = good;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(read_tags(bad_magic), TagParseError);

    auto bad_version = good;
    bad_version[4] = 9;
    CHECK_THROWS_AS(read_tags(bad_version), TagParseError);

    auto truncated = good;
    truncated.pop_back();
    CHECK_THROWS_AS(read_tags(truncated), TagParseError);

    CHECK_THROWS_AS(read_tags(std::vector<uint8_t>(8, 0)), TagParseError);

    auto bad_channel = good;
    bad_channel[kQtagHeaderSize + 8] = 10;
    CHECK_THROWS_AS(read_tags(bad_channel), TagParseError);

    CHECK_THROWS_AS(write_tags({{0, 10}}), TagParseError);

    auto overflow = good;
    for (int i = 0; i < 8; ++i) overflow[kQtagHeaderSize + i] = 0xff;
    CHECK_THROWS_AS(read_tags(overflow), TagParseError);
}

TEST_CASE("qtag file round trip") {
    const std::string path = "/tmp/qkd_test_tags.qtag";
    std::vector<TimeTag> tags = {{10, 0}, {20, 7}, {20, 3}, {35, 9}};
    write_tags_file(path, tags);
    CHECK(read_tags_file(path) == tags);
    std::remove(path.c_str());
}

TEST_CASE("csv dump") {
    const auto csv = tags_to_csv({{10, 0}, {25, 7}});
    CHECK(csv == "timestamp_ps,channel\n10,0\n25,7\n");
}

TEST_CASE("detector config validation") {
    DetectorConfig cfg;
    cfg.efficiency = -0.1;
    CHECK_THROWS_AS(cfg.validate(), std::domain_error);
    cfg.efficiency = 0.3;
    cfg.jitter_sigma_ps = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::domain_error);
    cfg.jitter_sigma_ps = 100.0;
    cfg.dark_rate_hz = -5.0;
    CHECK_THROWS_AS(cfg.validate(), std::domain_error);
}

}  // TEST_SUITE
