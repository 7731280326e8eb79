#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "qkd/channel.hpp"

using namespace qkd;

namespace {

PhotonEvent photon_at(int64_t t_ps) {
    PhotonEvent e;
    e.true_time_ps = t_ps;
    e.arm = Arm::X;
    return e;
}

double survival_fraction(ChannelState& ch, int n, int64_t spacing_ps) {
    int alive = 0;
    for (int i = 0; i < n; ++i)
        if (ch.transmit(photon_at(static_cast<int64_t>(i) * spacing_ps)).survives) ++alive;
    return static_cast<double>(alive) / n;
}

}  // namespace

TEST_SUITE("channel") {

TEST_CASE("presets") {
    const auto ideal = ChannelModel::preset("ideal");
    CHECK(ideal.kind == ChannelKind::Ideal);
    CHECK(ideal.static_transmission == doctest::Approx(1.0));

    const auto fiber = ChannelModel::preset("fiber-250m");
    CHECK(fiber.kind == ChannelKind::Fiber);
    CHECK(fiber.static_transmission == doctest::Approx(0.80));
    CHECK(fiber.length_m == doctest::Approx(250.0));

    const auto fs = ChannelModel::preset("freespace-270m");
    CHECK(fs.kind == ChannelKind::FreeSpace);
    CHECK(fs.static_transmission * fs.coupling_mean == doctest::Approx(0.36));
    CHECK(fs.length_m == doctest::Approx(270.0));

    CHECK_THROWS_AS(ChannelModel::preset("bogus"), std::invalid_argument);
}

TEST_CASE("ideal channel passes everything") {
    ChannelState ch(ChannelModel::preset("ideal"), 1);
    CHECK(survival_fraction(ch, 10000, 1000) == doctest::Approx(1.0));
}

TEST_CASE("fiber survival fraction matches its transmission") {
    ChannelState ch(ChannelModel::preset("fiber-250m"), 2);
    CHECK(survival_fraction(ch, 200000, 1000) == doctest::Approx(0.800).epsilon(0.005));
}

TEST_CASE("free-space survival fraction matches attenuation times coupling") {
    // span many coupling correlation times so the fluctuation averages out
    ChannelState ch(ChannelModel::preset("freespace-270m"), 3);
    const double frac = survival_fraction(ch, 500000, 100000000);
    CHECK(frac == doctest::Approx(0.360).epsilon(0.04));
}

TEST_CASE("instantaneous coupling is a stationary AR(1) process") {
    ChannelModel m = ChannelModel::preset("freespace-270m");
    m.coupling_mean = 0.5;  // keep clipping negligible
    m.coupling_sigma = 0.08;
    m.coupling_tau_s = 0.01;
    ChannelState ch(m, 4);
    const int n = 200000;
    const double dt = 1e-4;  // 100 samples per correlation time
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = ch.instantaneous_coupling(i * dt);

    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.01));

    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;
    CHECK(std::sqrt(var) == doctest::Approx(0.08).epsilon(0.05));

    // autocorrelation one correlation time apart should sit near 1/e
    const int lag = static_cast<int>(m.coupling_tau_s / dt);
    double acf = 0.0;
    for (int i = 0; i + lag < n; ++i) acf += (x[i] - mean) * (x[i + lag] - mean);
    acf /= (n - lag) * var;
    CHECK(acf == doctest::Approx(std::exp(-1.0)).epsilon(0.10));
}

TEST_CASE("zero-sigma coupling is constant") {
    ChannelModel m = ChannelModel::preset("fiber-250m");
    ChannelState ch(m, 5);
    for (int i = 0; i < 100; ++i)
        CHECK(ch.instantaneous_coupling(i * 0.01) == doctest::Approx(1.0));
}

TEST_CASE("propagation delay follows the group index") {
    constexpr double c_m_per_s = 2.99792458e8;
    const auto fiber = ChannelModel::preset("fiber-250m");
    const double expect_fiber = 250.0 * 1.47 / c_m_per_s * 1e12;
    CHECK(static_cast<double>(fiber.propagation_delay_ps()) ==
          doctest::Approx(expect_fiber).epsilon(0.01));

    const auto fs = ChannelModel::preset("freespace-270m");
    const double expect_air = 270.0 * 1.0003 / c_m_per_s * 1e12;
    CHECK(static_cast<double>(fs.propagation_delay_ps()) ==
          doctest::Approx(expect_air).epsilon(0.01));
    CHECK(ChannelModel::preset("ideal").propagation_delay_ps() == 0);
}

TEST_CASE("polarization drift grows linearly modulo pi") {
    ChannelModel m = ChannelModel::preset("ideal");
    m.drift_rate_rad_s = 0.25;
    ChannelState ch(m, 6);
    const double t_s = 2.0;
    const auto r = ch.transmit(photon_at(static_cast<int64_t>(t_s * 1e12)));
    CHECK(r.rotation_rad == doctest::Approx(0.5));
    const auto r2 = ch.transmit(photon_at(static_cast<int64_t>(20.0 * 1e12)));
    CHECK(r2.rotation_rad ==
          doctest::Approx(std::fmod(0.25 * 20.0, 3.14159265358979323846)));
}

TEST_CASE("deterministic under a fixed seed") {
    ChannelState a(ChannelModel::preset("freespace-270m"), 7);
    ChannelState b(ChannelModel::preset("freespace-270m"), 7);
    for (int i = 0; i < 5000; ++i) {
        const auto ra = a.transmit(photon_at(i * 100000));
        const auto rb = b.transmit(photon_at(i * 100000));
        CHECK(ra.survives == rb.survives);
        CHECK(ra.rotation_rad == rb.rotation_rad);
    }
}

TEST_CASE("model validation") {
    ChannelModel m;
    m.static_transmission = 1.5;
    CHECK_THROWS_AS(m.validate(), std::domain_error);
    m.static_transmission = 0.8;
    m.coupling_sigma = -0.1;
    CHECK_THROWS_AS(m.validate(), std::domain_error);
    m.coupling_sigma = 0.1;
    m.coupling_tau_s = 0.0;
    CHECK_THROWS_AS(m.validate(), std::domain_error);
}

}  // TEST_SUITE
