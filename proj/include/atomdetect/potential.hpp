#pragma once

#include <complex>
#include <vector>

#include "atomdetect/units.hpp"

namespace atomdetect {

using cplx = std::complex<double>;

/// One square barrier of constant laser parameters.
struct Segment
{
    double width = 0.0;      // um
    double detuning = 0.0;   // Delta = omega_L - omega, 1/us
    double rabi = 0.0;       // Omega >= 0, 1/us
};

struct LaserProfile
{
    AtomSpecies species;
    double x_start = 0.0;
    std::vector<Segment> segments;

    double total_length() const;
    double x_end() const { return x_start + total_length(); }
    void validate() const;
};

struct PotentialSegment
{
    double width = 0.0;
    cplx value;   // hbar/us
};

struct ComplexPotentialProfile
{
    double x_start = 0.0;
    std::vector<PotentialSegment> segments;

    double total_length() const;
    bool empty() const { return segments.empty(); }
};

struct LaserParameters
{
    double detuning = 0.0;
    double rabi = 0.0;
};

/// Adiabatically eliminated excited state:
/// V = (Omega^2 / 2) / (2 Delta + i gamma).
cplx potential_from_laser(const Segment& segment, const AtomSpecies& species);
cplx potential_from_laser(double detuning, double rabi, double gamma);

/// dV/dDelta and dV/dOmega at fixed gamma.
cplx potential_d_detuning(double detuning, double rabi, double gamma);
cplx potential_d_rabi(double detuning, double rabi, double gamma);

/// Inverse map. Throws std::domain_error if Im V >= 0.
LaserParameters laser_from_potential(cplx potential, const AtomSpecies& species);

struct WeakDrivingRatios
{
    double r_omega = 0.0;    // Omega / |2 Delta + i gamma|
    double r_energy = 0.0;   // E_max / (|2 Delta + i gamma| / 2)

    bool valid(double kappa) const { return r_omega <= kappa && r_energy <= kappa; }
};

WeakDrivingRatios weak_driving_ratio(const Segment& segment, double e_max,
                                     const AtomSpecies& species);

ComplexPotentialProfile profile_to_potential(const LaserProfile& profile);

} // namespace atomdetect
