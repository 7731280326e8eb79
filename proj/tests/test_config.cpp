#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "qkd/config.hpp"
#include "qkd/emitter.hpp"

using namespace qkd;
using nlohmann::json;

TEST_SUITE("config") {

TEST_CASE("json round trip preserves every field") {
    auto cfg = scenario_preset("fiber-250m");
    cfg.seed = 1234;
    cfg.total_duration_s = 7.2;
    cfg.gate.qber_max = 0.09;
    cfg.scheme.alice_probs = {0.6, 0.2, 0.2};
    const auto j = session_config_to_json(cfg);
    const auto back = session_config_from_json(j);
    CHECK(session_config_to_json(back) == j);
    CHECK(back.seed == 1234);
    CHECK(back.emitter.pair_prob == doctest::Approx(cfg.emitter.pair_prob));
    CHECK(back.channel.kind == ChannelKind::Fiber);
    CHECK(back.clock_bob.offset_ps == doctest::Approx(150000.0));
    CHECK(back.gate.qber_max == doctest::Approx(0.09));
    CHECK(back.scheme.alice_probs[0] == doctest::Approx(0.6));
    REQUIRE(back.emitter.visibility_override.has_value());
    CHECK(*back.emitter.visibility_override == doctest::Approx(0.9326));
}

TEST_CASE("unknown keys are rejected with their path") {
    json j = {{"seeed", 1}};
    try {
        session_config_from_json(j);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("seeed") != std::string::npos);
    }

    json nested = {{"emitter", {{"pair_prop", 0.02}}}};
    try {
        session_config_from_json(nested);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK(what.find("emitter.pair_prop") != std::string::npos);
    }

    json bad_detector = {{"detector_bob", {{"effciency", 0.3}}}};
    CHECK_THROWS_AS(session_config_from_json(bad_detector), ConfigError);
}

TEST_CASE("values are validated after parsing") {
    json j = {{"emitter", {{"pair_prob", 1.5}}}};
    CHECK_THROWS_AS(session_config_from_json(j), ConfigError);
    json bad_type = {{"seed", "not-a-number"}};
    CHECK_THROWS_AS(session_config_from_json(bad_type), ConfigError);
}

TEST_CASE("preset plus overrides") {
    json j = {{"preset", "freespace-270m"},
              {"seed", 77},
              {"emitter", {{"g2_x", 0.01}}},
              {"total_duration_s", 2.4}};
    const auto cfg = session_config_from_json(j);
    CHECK(cfg.seed == 77);
    CHECK(cfg.emitter.g2_x == doctest::Approx(0.01));
    CHECK(cfg.total_duration_s == doctest::Approx(2.4));
    // untouched preset values survive
    CHECK(cfg.channel.kind == ChannelKind::FreeSpace);
    CHECK(cfg.emitter.pair_prob == doctest::Approx(700e3 / 320e6));
    CHECK(cfg.detector_alice.efficiency == doctest::Approx(0.0346));
}

TEST_CASE("scenario presets") {
    const auto ideal = scenario_preset("ideal");
    CHECK(ideal.channel.kind == ChannelKind::Ideal);
    CHECK(ideal.detector_alice.efficiency == doctest::Approx(1.0));
    CHECK(ideal.emitter.g2_x == doctest::Approx(0.0));

    const auto fiber = scenario_preset("fiber-250m");
    CHECK(fiber.emitter.pair_prob == doctest::Approx(620e3 / 320e6));
    CHECK(*fiber.emitter.visibility_override == doctest::Approx(0.9326));
    CHECK(fiber.sync.window_ps == doctest::Approx(1600.0));
    CHECK(fiber.clock_bob.drift == doctest::Approx(2e-9));

    const auto fs = scenario_preset("freespace-270m");
    CHECK(fs.emitter.pair_prob == doctest::Approx(700e3 / 320e6));
    CHECK(*fs.emitter.visibility_override == doctest::Approx(0.920));
    CHECK(fs.emitter.fss_ueV == doctest::Approx(0.35));

    CHECK_THROWS_AS(scenario_preset("nonsense"), ConfigError);
}

TEST_CASE("config file loading") {
    const std::string path = "/tmp/qkd_test_config.json";
    {
        std::ofstream f(path);
        f << R"({"preset": "ideal", "seed": 5, "total_duration_s": 1.2})";
    }
    const auto cfg = load_session_config(path);
    CHECK(cfg.seed == 5);
    CHECK(cfg.total_duration_s == doctest::Approx(1.2));
    {
        std::ofstream f(path);
        f << "{not json";
    }
    CHECK_THROWS_AS(load_session_config(path), ConfigError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_session_config(path), ConfigError);
}

TEST_CASE("singles rate calibration") {
    EmitterConfig e;
    e.rep_rate_hz = 320e6;
    e.g2_x = 0.0;
    CHECK(calibrate_singles_rate(620e3, e).pair_prob == doctest::Approx(1.9375e-3));
    CHECK(calibrate_singles_rate(700e3, e).pair_prob == doctest::Approx(2.1875e-3));
    CHECK(calibrate_singles_rate(0.0, e).pair_prob == doctest::Approx(0.0));

    // the background contribution lowers the fitted pair probability
    e.g2_x = 0.0034;
    const auto cal = calibrate_singles_rate(620e3, e);
    CHECK(cal.pair_prob == doctest::Approx(1.9375e-3 / 1.0034));
    CHECK(cal.efficiency_product == doctest::Approx(1.9375e-3));

    try {
        calibrate_singles_rate(400e6, e);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e2) {
        const std::string what = e2.what();
        CHECK(what.find("exceeds") != std::string::npos);
    }
    CHECK_THROWS_AS(calibrate_singles_rate(-1.0, e), ConfigError);
}

TEST_CASE("calibrated emitter reproduces the target singles rate") {
    EmitterConfig e;
    e.g2_x = 0.0034;
    e.pair_prob = calibrate_singles_rate(620e3, e).pair_prob;
    const int64_t n_pulses = 32000000;  // 0.1 s of excitation
    const auto photons = emit_pulse_train(e, n_pulses, 11);
    double x_count = 0;
    for (const auto& ph : photons)
        if (ph.arm == Arm::X) ++x_count;
    const double rate = x_count / 0.1;
    CHECK(rate == doctest::Approx(620e3).epsilon(0.02));
}

}  // TEST_SUITE
