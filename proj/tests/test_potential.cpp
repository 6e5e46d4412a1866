#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <random>

#include "atomdetect/potential.hpp"

using namespace atomdetect;

namespace {

bool close(cplx a, cplx b, double rel)
{
    return std::abs(a - b) <= rel * std::max(std::abs(b), 1e-300);
}

} // namespace

TEST_CASE("potential at resonance and at half-width detuning")
{
    const auto cs = cesium_default();
    const double g = cs.gamma, om = 2.7;
    CHECK(close(potential_from_laser({1.0, 0.0, om}, cs), cplx(0.0, -om * om / (2.0 * g)), 1e-14));
    CHECK(close(potential_from_laser({1.0, g / 2.0, om}, cs), om * om * cplx(1.0, -1.0) / (4.0 * g), 1e-14));
    const cplx zero = potential_from_laser({1.0, 5.0, 0.0}, cs);
    CHECK(zero.real() == 0.0);
    CHECK(zero.imag() == 0.0);
}

TEST_CASE("inverse map")
{
    const auto cs = cesium_default();
    const double g = cs.gamma, om0 = 3.1;
    const auto p = laser_from_potential(om0 * om0 * cplx(1.0, -1.0) / (4.0 * g), cs);
    CHECK(p.detuning == doctest::Approx(g / 2.0).epsilon(1e-14));
    CHECK(p.rabi == doctest::Approx(om0).epsilon(1e-14));

    const double c = 0.37;
    const auto q = laser_from_potential(cplx(0.0, -c), cs);
    CHECK(q.detuning == 0.0);
    CHECK(q.rabi == doctest::Approx(std::sqrt(2.0 * g * c)).epsilon(1e-14));

    CHECK_THROWS_AS(laser_from_potential(cplx(1.0, 1e-3), cs), std::domain_error);
    CHECK_THROWS_AS(laser_from_potential(cplx(1.0, 0.0), cs), std::domain_error);
    try {
        laser_from_potential(cplx(0.0, 1e-3), cs);
    } catch (const std::domain_error& e) {
        CHECK(std::string(e.what()).find("non-absorbing potential has no laser realization") != std::string::npos);
    }
}

TEST_CASE("round trip of random segments")
{
    const auto cs = cesium_default();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> det(-30.0 * cs.gamma, 30.0 * cs.gamma);
    std::uniform_real_distribution<double> rabi(1e-3, 12.0 * cs.gamma);
    for (int i = 0; i < 10000; ++i) {
        const Segment s{1.0, det(rng), rabi(rng)};
        const cplx v = potential_from_laser(s, cs);
        const auto back = laser_from_potential(v, cs);
        REQUIRE(back.rabi == doctest::Approx(s.rabi).epsilon(1e-10));
        REQUIRE(std::abs(back.detuning - s.detuning) <= 1e-10 * std::max(std::abs(s.detuning), cs.gamma));
        REQUIRE(close(potential_from_laser({1.0, back.detuning, back.rabi}, cs), v, 1e-10));
    }
}

TEST_CASE("sign properties and monotonicity in the Rabi frequency")
{
    const auto cs = cesium_default();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> det(-100.0, 100.0);
    std::uniform_real_distribution<double> rabi(1e-3, 100.0);
    for (int i = 0; i < 2000; ++i) {
        const double d = det(rng), om = rabi(rng);
        const cplx v = potential_from_laser({1.0, d, om}, cs);
        CHECK(v.imag() < 0.0);
        CHECK((v.real() > 0.0) == (d > 0.0));
        CHECK(std::abs(potential_from_laser({1.0, d, om * 1.01}, cs)) > std::abs(v));
    }
    CHECK(potential_from_laser({1.0, 0.0, 4.0}, cs).real() == 0.0);
}

TEST_CASE("potential derivatives match finite differences")
{
    const double g = 33.3;
    for (double d : {-40.0, -3.0, 0.0, 5.0, 70.0})
        for (double om : {0.1, 2.0, 50.0}) {
            const double hd = 1e-6 * std::max(1.0, std::abs(d)), ho = 1e-6 * om;
            const cplx fd_d = (potential_from_laser(d + hd, om, g) - potential_from_laser(d - hd, om, g)) / (2.0 * hd);
            const cplx fd_o = (potential_from_laser(d, om + ho, g) - potential_from_laser(d, om - ho, g)) / (2.0 * ho);
            CHECK(std::abs(potential_d_detuning(d, om, g) - fd_d) <= 1e-7 * std::abs(fd_d) + 1e-14);
            CHECK(std::abs(potential_d_rabi(d, om, g) - fd_o) <= 1e-7 * std::abs(fd_o) + 1e-14);
        }
}

TEST_CASE("weak driving ratios")
{
    const auto cs = cesium_default();
    const double g = cs.gamma;
    const auto r = weak_driving_ratio({1.0, 0.0, 0.1 * g}, 0.0, cs);
    CHECK(r.r_omega == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(r.r_energy == 0.0);
    CHECK(r.valid(0.2));

    const auto strong = weak_driving_ratio({1.0, 0.0, 5.0 * g}, 0.0, cs);
    CHECK(strong.r_omega == doctest::Approx(5.0).epsilon(1e-14));
    CHECK_FALSE(strong.valid(0.99));

    double prev = 1e300;
    for (double d : {1.0, 10.0, 1e3, 1e6, 1e9}) {
        const double ro = weak_driving_ratio({1.0, d, g}, 0.0, cs).r_omega;
        CHECK(ro < prev);
        prev = ro;
    }
    CHECK(prev < 1e-7);

    const auto e = weak_driving_ratio({1.0, 0.0, 1.0}, 3.0, cs);
    CHECK(e.r_energy == doctest::Approx(3.0 / (0.5 * g)).epsilon(1e-14));
}

TEST_CASE("profile to potential")
{
    LaserProfile p;
    p.species = cesium_default();
    p.x_start = 2.0;
    CHECK(profile_to_potential(p).empty());

    p.segments = {{4.0, 0.0, 1.5}};
    auto v = profile_to_potential(p);
    REQUIRE(v.segments.size() == 1);
    CHECK(close(v.segments[0].value, cplx(0.0, -1.5 * 1.5 / (2.0 * p.species.gamma)), 1e-14));
    CHECK(v.x_start == 2.0);

    p.segments = {{4.0, -3.0, 1.5}, {6.0, 8.0, 0.5}};
    v = profile_to_potential(p);
    REQUIRE(v.segments.size() == 2);
    CHECK(v.segments[0].width == 4.0);
    CHECK(v.segments[1].width == 6.0);
    CHECK(v.segments[0].value.real() < 0.0);
    CHECK(v.segments[1].value.real() > 0.0);
    CHECK(v.total_length() == doctest::Approx(10.0));
    CHECK(p.x_end() == doctest::Approx(12.0));
}

TEST_CASE("profile validation")
{
    LaserProfile p;
    p.species = cesium_default();
    p.segments = {{0.0, 0.0, 1.0}};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.segments = {{1.0, 0.0, -1.0}};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.segments = {{1.0, 0.0, 1.0}};
    CHECK_NOTHROW(p.validate());
}
