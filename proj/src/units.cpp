#include "atomdetect/units.hpp"

#include <cmath>
#include <stdexcept>

namespace atomdetect {

void AtomSpecies::validate() const
{
    auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
    if (!positive(mass_over_hbar))
        throw std::invalid_argument("species '" + name + "': mass_over_hbar must be positive");
    if (!positive(gamma))
        throw std::invalid_argument("species '" + name + "': gamma must be positive");
    if (!positive(lambda_laser))
        throw std::invalid_argument("species '" + name + "': lambda_laser must be positive");
}

AtomSpecies cesium_default()
{
    // Cs D2 line, 6S1/2 F=4 -> 6P3/2 F=5.
    AtomSpecies cs;
    cs.name = "Cs";
    cs.mass_over_hbar = convert::s_per_m2_to_us_per_um2(si::cesium_mass / si::hbar);
    cs.gamma = convert::per_s_to_per_us(33.3e6);
    cs.lambda_laser = convert::nm_to_um(852.0);
    return cs;
}

double recoil_velocity(const AtomSpecies& species)
{
    return species.laser_wavenumber() / species.mass_over_hbar;
}

double velocity_to_wavenumber(double v, const AtomSpecies& species)
{
    if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument("velocity must be positive");
    return species.mass_over_hbar * v;
}

double wavenumber_to_velocity(double k, const AtomSpecies& species)
{
    return k / species.mass_over_hbar;
}

double kinetic_energy(double k, const AtomSpecies& species)
{
    return k * k / (2.0 * species.mass_over_hbar);
}

} // namespace atomdetect
