#pragma once

#include <span>
#include <vector>

#include "atomdetect/potential.hpp"

namespace atomdetect {

/// Incident Gaussian packet
///   psi~(k) = (2 sigma^2 / pi)^{1/4} exp(-sigma^2 (k - k0)^2) exp(-i k x0).
struct WavepacketSpec
{
    double v_mean = 1.0;    // cm/s
    double sigma_x = 5.0;   // um
    double x0 = -40.0;      // um

    /// Throws std::invalid_argument unless sigma_x > 0, v_mean > 0 and the
    /// momentum weight at k <= 0 is below 1e-8.
    void validate(const AtomSpecies& species) const;
    double mean_wavenumber(const AtomSpecies& species) const;
    double wavenumber_spread() const { return 0.5 / sigma_x; }   // std dev of |psi~|^2
    cplx amplitude(double k, const AtomSpecies& species) const;
};

enum class ChannelMode { one_channel, two_channel };

struct DetectionRecord
{
    double t = 0.0;          // us
    double N_t = 0.0;        // no-photon probability
    double Pi_t = 0.0;       // first-photon density, 1/us
    double P2_t = 0.0;       // excited population (two-channel mode, else 0)
    double minus_dN_dt = 0.0;   // centered difference, both modes
};

struct PropagationDiagnostics
{
    std::size_t k_points = 0;
    std::size_t x_points = 0;
    double box_lo = 0.0, box_hi = 0.0;
    double k_truncation_residual = 0.0;   // |psi~|^2 weight outside the k-grid
    double box_residual = 0.0;            // largest sigma_x |Psi|^2 at the box edges
};

/// Psi(x, t) as a k-space superposition of stationary scattering states,
/// with N_t the spatial norm on a finite box and Pi_t = gamma P2 (two-channel)
/// or -dN/dt (one-channel). Throws NumericalError when the truncation or box
/// residual exceeds its tolerance.
std::vector<DetectionRecord> propagate(const WavepacketSpec& spec, const LaserProfile& profile,
                                       std::span<const double> times, ChannelMode mode,
                                       unsigned threads = 1, PropagationDiagnostics* diagnostics = nullptr);

/// Integral of |psi~(k)|^2 A(k) dk from the stationary solver, by composite
/// Simpson quadrature over k0 +- 8 spread.
double expected_detection(const WavepacketSpec& spec, const LaserProfile& profile, ChannelMode mode,
                          int intervals = 2000);

/// Time after which the packet (down to k0 - 4 spread) has left the laser.
double suggested_horizon(const WavepacketSpec& spec, const LaserProfile& profile);

} // namespace atomdetect
