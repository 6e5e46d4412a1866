#include "atomdetect/potential.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace atomdetect {

double LaserProfile::total_length() const
{
    return std::accumulate(segments.begin(), segments.end(), 0.0,
                           [](double acc, const Segment& s) { return acc + s.width; });
}

void LaserProfile::validate() const
{
    species.validate();
    if (!std::isfinite(x_start))
        throw std::invalid_argument("profile x_start must be finite");
    for (std::size_t j = 0; j < segments.size(); ++j) {
        const auto& s = segments[j];
        if (!(s.width > 0.0) || !std::isfinite(s.width))
            throw std::invalid_argument("segment " + std::to_string(j) + ": width must be positive");
        if (!(s.rabi >= 0.0) || !std::isfinite(s.rabi))
            throw std::invalid_argument("segment " + std::to_string(j) + ": rabi must be >= 0");
        if (!std::isfinite(s.detuning))
            throw std::invalid_argument("segment " + std::to_string(j) + ": detuning must be finite");
    }
}

double ComplexPotentialProfile::total_length() const
{
    return std::accumulate(segments.begin(), segments.end(), 0.0,
                           [](double acc, const PotentialSegment& s) { return acc + s.width; });
}

cplx potential_from_laser(double detuning, double rabi, double gamma)
{
    // Written in real/imaginary form so that Omega = 0 gives an exact zero.
    const double denom = 4.0 * detuning * detuning + gamma * gamma;
    const double w2 = rabi * rabi;
    return {detuning * w2 / denom, -0.5 * gamma * w2 / denom};
}

cplx potential_from_laser(const Segment& segment, const AtomSpecies& species)
{
    return potential_from_laser(segment.detuning, segment.rabi, species.gamma);
}

cplx potential_d_detuning(double detuning, double rabi, double gamma)
{
    const cplx d{2.0 * detuning, gamma};
    return -rabi * rabi / (d * d);
}

cplx potential_d_rabi(double detuning, double rabi, double gamma)
{
    return rabi / cplx{2.0 * detuning, gamma};
}

LaserParameters laser_from_potential(cplx potential, const AtomSpecies& species)
{
    if (!(potential.imag() < 0.0))
        throw std::domain_error("non-absorbing potential has no laser realization");
    const double gamma = species.gamma;
    LaserParameters p;
    p.detuning = -gamma * potential.real() / (2.0 * potential.imag());
    p.rabi = std::abs(potential) * std::sqrt(2.0 * gamma / (-potential.imag()));
    return p;
}

WeakDrivingRatios weak_driving_ratio(const Segment& segment, double e_max,
                                     const AtomSpecies& species)
{
    const double scale = std::hypot(2.0 * segment.detuning, species.gamma);
    return {segment.rabi / scale, e_max / (0.5 * scale)};
}

ComplexPotentialProfile profile_to_potential(const LaserProfile& profile)
{
    ComplexPotentialProfile out;
    out.x_start = profile.x_start;
    out.segments.reserve(profile.segments.size());
    for (const auto& s : profile.segments)
        out.segments.push_back({s.width, potential_from_laser(s, profile.species)});
    return out;
}

} // namespace atomdetect
