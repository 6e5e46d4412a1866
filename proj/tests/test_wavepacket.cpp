#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <vector>

#include "atomdetect/wavepacket.hpp"

using namespace atomdetect;

namespace {

const AtomSpecies cs = cesium_default();

LaserProfile laser(double rabi, double detuning = 0.0)
{
    LaserProfile p;
    p.species = cs;
    p.segments = {{10.0, detuning, rabi}};
    return p;
}

std::vector<double> times_to(double t_max, int n)
{
    std::vector<double> t(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i)
        t[static_cast<std::size_t>(i)] = t_max * i / n;
    return t;
}

double integrate(const std::vector<DetectionRecord>& r)
{
    double s = 0.0;
    for (std::size_t i = 1; i < r.size(); ++i)
        s += 0.5 * (r[i].Pi_t + r[i - 1].Pi_t) * (r[i].t - r[i - 1].t);
    return s;
}

} // namespace

TEST_CASE("packet construction")
{
    WavepacketSpec s{1.0, 5.0, -30.0};
    CHECK_NOTHROW(s.validate(cs));
    // normalized amplitude: integral of |psi~|^2 over k
    const double k0 = s.mean_wavenumber(cs), dk = 1e-3;
    double norm = 0.0;
    for (double k = k0 - 2.0; k <= k0 + 2.0; k += dk)
        norm += std::norm(s.amplitude(k, cs)) * dk;
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-9));

    WavepacketSpec broad{0.2, 0.3, -30.0};   // k0 sigma too small: weight at k <= 0
    CHECK_THROWS_AS(broad.validate(cs), std::invalid_argument);
    WavepacketSpec bad{1.0, -1.0, -30.0};
    CHECK_THROWS_AS(bad.validate(cs), std::invalid_argument);
}

TEST_CASE("preconditions")
{
    const auto p = laser(0.1033);
    WavepacketSpec close{1.0, 5.0, -20.0};   // only 4 sigma from the laser
    const std::vector<double> t = {0.0};
    CHECK_THROWS_AS(propagate(close, p, t, ChannelMode::one_channel), std::invalid_argument);
    WavepacketSpec ok{1.0, 5.0, -30.0};
    const std::vector<double> negative = {-1.0};
    CHECK_THROWS_AS(propagate(ok, p, negative, ChannelMode::one_channel), std::invalid_argument);
    CHECK(propagate(ok, p, std::vector<double>{}, ChannelMode::one_channel).empty());
}

TEST_CASE("free evolution emits no photons")
{
    WavepacketSpec s{1.0, 5.0, -30.0};
    const auto p = laser(0.0);
    const auto t = times_to(suggested_horizon(s, p), 20);
    for (auto mode : {ChannelMode::one_channel, ChannelMode::two_channel}) {
        const auto r = propagate(s, p, t, mode);
        for (const auto& rec : r) {
            CHECK(std::abs(rec.N_t - 1.0) < 1e-6);
            CHECK(std::abs(rec.Pi_t) < 1e-6);
        }
    }
}

TEST_CASE("detection probability of a weak laser")
{
    WavepacketSpec s{1.0, 5.0, -30.0};
    const auto p = laser(0.1033);
    const double horizon = suggested_horizon(s, p);
    const auto t = times_to(horizon, 150);
    PropagationDiagnostics diag;
    const auto r = propagate(s, p, t, ChannelMode::one_channel, 1, &diag);

    CHECK(diag.k_truncation_residual < 1e-8);
    CHECK(diag.box_residual < 1e-6);
    CHECK(r.front().Pi_t < 1e-6);
    CHECK(std::abs(r.front().N_t - 1.0) < 1e-6);
    for (std::size_t i = 1; i < r.size(); ++i)
        CHECK(r[i].N_t <= r[i - 1].N_t + 1e-12);
    for (const auto& rec : r)
        CHECK(rec.Pi_t >= -1e-9);

    const double expected = expected_detection(s, p, ChannelMode::one_channel);
    CHECK(integrate(r) == doctest::Approx(expected).epsilon(0.01));
    // survivors: N_inf = 1 - detected
    CHECK(r.back().N_t == doctest::Approx(1.0 - expected).epsilon(0.01));
}

TEST_CASE("two-channel photon densities agree")
{
    WavepacketSpec s{2.0, 4.0, -25.0};
    const auto p = laser(2.0, -5.0);
    const auto t = times_to(suggested_horizon(s, p), 80);
    const auto r = propagate(s, p, t, ChannelMode::two_channel);
    std::size_t peak = 0;
    for (std::size_t i = 0; i < r.size(); ++i)
        if (r[i].Pi_t > r[peak].Pi_t)
            peak = i;
    CHECK(r[peak].Pi_t > 0.0);
    CHECK(std::abs(r[peak].Pi_t - r[peak].minus_dN_dt) <= 1e-3 * r[peak].Pi_t);
    CHECK(r[peak].Pi_t == doctest::Approx(cs.gamma * r[peak].P2_t).epsilon(1e-14));
    for (std::size_t i = 1; i < r.size(); ++i)
        CHECK(r[i].N_t <= r[i - 1].N_t + 1e-12);
    const double expected = expected_detection(s, p, ChannelMode::two_channel);
    CHECK(integrate(r) == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("records follow the requested order and are reproducible")
{
    WavepacketSpec s{3.0, 3.0, -20.0};
    const auto p = laser(1.0);
    const std::vector<double> t = {500.0, 0.0, 250.0};
    const auto a = propagate(s, p, t, ChannelMode::one_channel, 1);
    const auto b = propagate(s, p, t, ChannelMode::one_channel, 2);
    REQUIRE(a.size() == 3);
    CHECK(a[0].t == 500.0);
    CHECK(a[1].t == 0.0);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(a[i].N_t == doctest::Approx(b[i].N_t).epsilon(1e-13));
}
