#pragma once

#include <numbers>
#include <string>

// Internal unit system: hbar = 1, lengths in um, times in us.
// Energies are therefore in hbar/us, rates (gamma, Rabi, detuning) in 1/us,
// velocities in um/us (= m/s) and wavenumbers in 1/um.

namespace atomdetect {

inline constexpr double kPi = std::numbers::pi;

namespace si {
inline constexpr double hbar = 1.054571817e-34;     // J s
inline constexpr double cesium_mass = 2.2069e-25;   // kg
} // namespace si

struct AtomSpecies
{
    std::string name;
    double mass_over_hbar = 0.0;   // us / um^2
    double gamma = 0.0;            // 1/us
    double lambda_laser = 0.0;     // um

    /// Throws std::invalid_argument unless all constants are finite and positive.
    void validate() const;

    double laser_wavenumber() const { return 2.0 * kPi / lambda_laser; }
};

AtomSpecies cesium_default();

/// hbar k_L / m, in um/us.
double recoil_velocity(const AtomSpecies& species);

/// k = (m/hbar) v; v in um/us, must be positive.
double velocity_to_wavenumber(double v, const AtomSpecies& species);
double wavenumber_to_velocity(double k, const AtomSpecies& species);

/// Kinetic energy k^2 / (2 m/hbar) in hbar/us.
double kinetic_energy(double k, const AtomSpecies& species);

// Boundary conversions between experimentalist units and internal units.
namespace convert {
inline constexpr double cm_per_s_to_um_per_us(double v) { return v * 1e-2; }
inline constexpr double um_per_us_to_cm_per_s(double v) { return v * 1e2; }
inline constexpr double per_s_to_per_us(double rate) { return rate * 1e-6; }
inline constexpr double per_us_to_per_s(double rate) { return rate * 1e6; }
inline constexpr double nm_to_um(double x) { return x * 1e-3; }
inline constexpr double um_to_nm(double x) { return x * 1e3; }
// m/hbar in s/m^2 -> us/um^2
inline constexpr double s_per_m2_to_us_per_um2(double x) { return x * 1e-6; }
inline constexpr double us_per_um2_to_s_per_m2(double x) { return x * 1e6; }
} // namespace convert

} // namespace atomdetect
