#pragma once

#include <random>

#include "atomdetect/potential.hpp"
#include "atomdetect/units.hpp"

namespace test_support {

using namespace atomdetect;

inline double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double k_of(double v_cm_per_s)
{
    return velocity_to_wavenumber(convert::cm_per_s_to_um_per_us(v_cm_per_s), cesium_default());
}

// k uniformly over the 0.2 - 9 cm/s window.
inline double random_k(std::mt19937_64& rng)
{
    return k_of(uniform(rng, 0.2, 9.0));
}

inline ComplexPotentialProfile random_potential(std::mt19937_64& rng, bool absorbing, double v_max = 100.0,
                                                int max_segments = 8)
{
    ComplexPotentialProfile p;
    p.x_start = uniform(rng, -5.0, 5.0);
    const int n = std::uniform_int_distribution<int>(1, max_segments)(rng);
    for (int j = 0; j < n; ++j) {
        const double re = uniform(rng, -v_max, v_max);
        const double im = absorbing ? -uniform(rng, 0.0, v_max) : 0.0;
        p.segments.push_back({uniform(rng, 0.5, 10.0), cplx(re, im)});
    }
    return p;
}

inline LaserProfile random_laser(std::mt19937_64& rng, int max_segments, double delta_scale, double rabi_max,
                                 double length = 10.0)
{
    LaserProfile p;
    p.species = cesium_default();
    const int n = std::uniform_int_distribution<int>(1, max_segments)(rng);
    for (int j = 0; j < n; ++j)
        p.segments.push_back({length / n, uniform(rng, -delta_scale, delta_scale), uniform(rng, 0.0, rabi_max)});
    return p;
}

} // namespace test_support
