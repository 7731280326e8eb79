#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "qkd/clock.hpp"
#include "qkd/rng.hpp"
#include "qkd/sync.hpp"

using namespace qkd;

namespace {

// O(n^2) reference matcher with the same contract: greedy in Alice order,
// nearest unused Bob tag within half a window, earlier tag on exact ties.
std::vector<std::pair<size_t, size_t>> match_oracle(const std::vector<int64_t>& a,
                                                    const std::vector<int64_t>& b,
                                                    double offset, double window) {
    std::vector<std::pair<size_t, size_t>> out;
    std::vector<bool> used(b.size(), false);
    for (size_t i = 0; i < a.size(); ++i) {
        size_t best = SIZE_MAX;
        double best_res = 0;
        for (size_t j = 0; j < b.size(); ++j) {
            if (used[j]) continue;
            const double res = std::abs(static_cast<double>(b[j]) -
                                        (static_cast<double>(a[i]) - offset));
            if (res <= window / 2.0 && (best == SIZE_MAX || res < best_res)) {
                best = j;
                best_res = res;
            }
        }
        if (best != SIZE_MAX) {
            used[best] = true;
            out.emplace_back(i, best);
        }
    }
    return out;
}

std::vector<int64_t> poisson_times(double rate_hz, double span_s, Rng& rng) {
    std::vector<int64_t> out;
    const double mean_gap_ps = 1e12 / rate_hz;
    double t = 0.0;
    for (;;) {
        t += rng.exponential(mean_gap_ps);
        if (t >= span_s * 1e12) break;
        out.push_back(static_cast<int64_t>(std::llround(t)));
    }
    return out;
}

}  // namespace

TEST_SUITE("sync") {

TEST_CASE("ideal clock is the identity") {
    ClockModel clk;
    for (int64_t t : {int64_t{0}, int64_t{123456}, int64_t{999999999999}})
        CHECK(clk.localize(t) == t);
}

TEST_CASE("constant clock offset") {
    ClockModel clk;
    clk.offset_ps = 1000000.0;
    for (int64_t t : {int64_t{0}, int64_t{777}, int64_t{5000000000}})
        CHECK(clk.localize(t) == t + 1000000);
}

TEST_CASE("disciplined drift error stays within half the interval accumulation") {
    ClockModel clk;
    clk.offset_ps = 250000.0;
    clk.drift = 1e-9;
    clk.discipline_interval_s = 1.0;
    const double bound = 1e-9 * 1e12 / 2.0;  // 500 ps
    for (int64_t t = 0; t < 10000000000000; t += 137000000000) {
        const double err = static_cast<double>(clk.localize(t) - t) - 250000.0;
        CHECK(std::abs(err) <= bound + 1.0);
    }
}

TEST_CASE("discipline jitter has the configured scale and is deterministic") {
    ClockModel clk;
    clk.drift = 0.0;
    clk.discipline_interval_s = 0.001;
    clk.discipline_jitter_ps = 30.0;
    clk.noise_seed = 42;
    double sum = 0.0, sum2 = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const int64_t t = static_cast<int64_t>(i) * 1000000000 + 12345;
        const double e = static_cast<double>(clk.localize(t) - t);
        CHECK(clk.localize(t) == clk.localize(t));
        sum += e;
        sum2 += e * e;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean) < 2.0);
    CHECK(std::sqrt(sum2 / n - mean * mean) == doctest::Approx(30.0).epsilon(0.1));
}

TEST_CASE("clock validation") {
    ClockModel clk;
    clk.drift = 1e-6;
    CHECK_THROWS_AS(clk.validate(), std::domain_error);
    clk.drift = 1e-9;
    clk.discipline_interval_s = 0.0;
    CHECK_THROWS_AS(clk.validate(), std::domain_error);
    clk.discipline_interval_s = 1.0;
    CHECK_THROWS_AS(clk.localize(-1), std::domain_error);
}

TEST_CASE("offset recovery on a constructed shift") {
    Rng rng(1);
    const auto a = poisson_times(50000.0, 0.5, rng);
    const int64_t offset = 437200;
    std::vector<int64_t> b;
    for (int64_t t : a) b.push_back(t - offset);
    const double est = estimate_offset(a, b, 2000000.0, 400.0);
    // a delta-like peak can land anywhere within one bin
    CHECK(std::abs(est - static_cast<double>(offset)) <= 201.0);
}

TEST_CASE("offset recovery with jitter and background singles") {
    Rng rng(2);
    const auto pairs = poisson_times(1000.0, 1.0, rng);
    std::vector<int64_t> a = poisson_times(100000.0, 1.0, rng);
    std::vector<int64_t> b = poisson_times(100000.0, 1.0, rng);
    const int64_t offset = 1000000;
    for (int64_t t : pairs) {
        a.push_back(t + static_cast<int64_t>(std::llround(rng.gaussian(0, 250))));
        b.push_back(t - offset + static_cast<int64_t>(std::llround(rng.gaussian(0, 250))));
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double est = estimate_offset(a, b, 2000000.0, 200.0);
    CHECK(std::abs(est - 1e6) < 100.0);
}

TEST_CASE("uncorrelated streams raise SyncError") {
    Rng rng(3);
    // dense enough that the background mean dominates any accidental peak
    const auto a = poisson_times(200000.0, 0.5, rng);
    const auto b = poisson_times(200000.0, 0.5, rng);
    CHECK_THROWS_AS(estimate_offset(a, b, 1000000.0, 500.0), SyncError);
    CHECK_THROWS_AS(estimate_offset({}, b, 1000000.0, 500.0), SyncError);
    CHECK_THROWS_AS(estimate_offset(a, b, 500.0, 500.0), SyncError);
}

TEST_CASE("offset estimate is shift-covariant") {
    Rng rng(4);
    const auto a = poisson_times(50000.0, 0.2, rng);
    std::vector<int64_t> b;
    for (int64_t t : a) b.push_back(t - 5000);
    const double base = estimate_offset(a, b, 500000.0, 250.0);
    std::vector<int64_t> a_shift;
    for (int64_t t : a) a_shift.push_back(t + 300000);
    const double shifted = estimate_offset(a_shift, b, 500000.0, 250.0);
    CHECK(shifted - base == doctest::Approx(300000.0).epsilon(1e-6));
}

TEST_CASE("matching window edge cases") {
    // residual of 900 ps: outside a 1600 ps window, inside a 2000 ps one
    const std::vector<int64_t> a = {100000};
    const std::vector<int64_t> b = {100900};
    CHECK(match_indices(a, b, 0.0, 1600.0).empty());
    const auto m = match_indices(a, b, 0.0, 2000.0);
    REQUIRE(m.size() == 1);
    CHECK(m[0] == std::pair<size_t, size_t>{0, 0});
    // exactly at the edge counts as inside
    const std::vector<int64_t> edge = {100800};
    CHECK(match_indices(a, edge, 0.0, 1600.0).size() == 1);
    CHECK_THROWS_AS(match_indices(a, b, 0.0, 0.0), SyncError);
}

TEST_CASE("nearest residual wins and ties go to the earlier tag") {
    const std::vector<int64_t> a = {1000};
    const std::vector<int64_t> b1 = {400, 980, 1600};
    const auto m = match_indices(a, b1, 0.0, 2000.0);
    REQUIRE(m.size() == 1);
    CHECK(m[0].second == 1);
    const std::vector<int64_t> b2 = {900, 1100};
    const auto tie = match_indices(a, b2, 0.0, 2000.0);
    REQUIRE(tie.size() == 1);
    CHECK(tie[0].second == 0);
}

TEST_CASE("matcher agrees with the quadratic oracle") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(100 + seed);
        std::vector<int64_t> a, b;
        int64_t t = 0;
        for (int i = 0; i < 300; ++i) {
            t += static_cast<int64_t>(rng.below(3000)) + 1;
            a.push_back(t);
        }
        t = 0;
        for (int i = 0; i < 300; ++i) {
            t += static_cast<int64_t>(rng.below(3000)) + 1;
            b.push_back(t);
        }
        const double offset = static_cast<double>(rng.below(4000)) - 2000.0;
        const auto fast = match_indices(a, b, offset, 2000.0);
        const auto slow = match_oracle(a, b, offset, 2000.0);
        CHECK(fast == slow);
    }
}

TEST_CASE("matches are injective on both sides") {
    Rng rng(5);
    const auto a = poisson_times(200000.0, 0.05, rng);
    const auto b = poisson_times(200000.0, 0.05, rng);
    const auto m = match_indices(a, b, 0.0, 5000.0);
    std::set<size_t> ia, ib;
    for (const auto& [x, y] : m) {
        ia.insert(x);
        ib.insert(y);
    }
    CHECK(ia.size() == m.size());
    CHECK(ib.size() == m.size());
}

TEST_CASE("accidental coincidence rate of independent streams") {
    Rng rng(6);
    const double ra = 100000.0, rb = 100000.0, span = 50.0, window = 2000e-12;
    const auto a = poisson_times(ra, span, rng);
    const auto b = poisson_times(rb, span, rng);
    const auto m = match_indices(a, b, 0.0, 2000.0);
    const double expected = ra * rb * window * span;  // 1000
    CHECK(static_cast<double>(m.size()) == doctest::Approx(expected).epsilon(0.10));
}

TEST_CASE("offset track interpolates and clamps") {
    OffsetTrack track;
    CHECK_THROWS_AS(track.offset_at(0.0), SyncError);
    track.add(1000.0, 10.0);
    track.add(3000.0, 30.0);
    CHECK(track.offset_at(0.0) == doctest::Approx(10.0));
    CHECK(track.offset_at(1000.0) == doctest::Approx(10.0));
    CHECK(track.offset_at(2000.0) == doctest::Approx(20.0));
    CHECK(track.offset_at(3500.0) == doctest::Approx(30.0));
    CHECK_THROWS_AS(track.add(500.0, 0.0), SyncError);
}

TEST_CASE("tracked matching follows a drifting offset") {
    Rng rng(7);
    const auto pairs = poisson_times(5000.0, 2.0, rng);
    std::vector<int64_t> a, b;
    const double drift = 2e-9;  // several windows of change over the span
    for (int64_t t : pairs) {
        a.push_back(t);
        b.push_back(t - 500000 - static_cast<int64_t>(drift * static_cast<double>(t)));
    }
    const auto track = estimate_offset_track(a, b, 0.2e12, 2000000.0, 400.0);
    CHECK(track.size() >= 5);
    const auto matched = match_indices(a, b, track, 2000.0);
    CHECK(static_cast<double>(matched.size()) >= 0.99 * static_cast<double>(a.size()));
    const auto fixed = match_indices(a, b, track.offset_at(0.0), 2000.0);
    CHECK(fixed.size() < matched.size());
}

TEST_CASE("coincidence records carry channel labels") {
    const auto map = ChannelMap::standard();
    std::vector<TimeTag> ta = {{1000, 0}, {5000, 3}};
    std::vector<TimeTag> tb = {{1200, 6}, {5100, 9}};
    const auto recs = match_coincidences(ta, tb, 0.0, 2000.0, map);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].alice_basis == 0);
    CHECK(recs[0].alice_outcome == 1);
    CHECK(recs[0].bob_basis == 0);
    CHECK(recs[0].bob_outcome == 1);
    CHECK(recs[0].delta_ps == -200);
    CHECK(recs[1].alice_basis == 1);
    CHECK(recs[1].alice_outcome == -1);
    CHECK(recs[1].bob_basis == 1);
    CHECK(recs[1].bob_outcome == -1);
    const auto csv = coincidences_to_csv(recs);
    CHECK(csv.find("1000,1200,-200,0,0,1,1\n") != std::string::npos);
}

}  // TEST_SUITE
