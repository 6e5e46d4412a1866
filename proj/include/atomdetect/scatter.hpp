#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "atomdetect/potential.hpp"

namespace atomdetect {

/// Principal root of k^2 - 2 (m/hbar) V, so Im >= 0.
cplx local_wavenumber(double k, cplx potential, double mass_over_hbar);

/// Propagation of the pair (psi, psi') across a constant-potential segment,
/// stored as matrix * exp(log_scale). The growing exponential exp(|Im k| w)
/// is factored out so `matrix` stays O(1) for any absorption strength.
struct ScaledTransfer
{
    Eigen::Matrix2cd matrix;
    double log_scale = 0.0;

    Eigen::Matrix2cd unscaled() const { return matrix * std::exp(log_scale); }
};

ScaledTransfer transfer_matrix_segment(cplx k_local, double width);

struct ScatteringAmplitudes
{
    double k = 0.0;
    cplx R1;
    cplx T1;
    double A = 0.0;
    /// log10 of the 2-norm condition number of the full transfer product in
    /// the dimensionless (psi, psi'/k) basis.
    double log10_condition = 0.0;
    bool ill_conditioned = false;
};

inline constexpr double kIllConditionedLog10 = 12.0;

/// Transfer-matrix solution with e^{ikx} + R1 e^{-ikx} on the left and
/// T1 e^{ikx} on the right (global x). Throws std::invalid_argument for k <= 0.
ScatteringAmplitudes solve_one_channel(double k, const ComplexPotentialProfile& potential,
                                       const AtomSpecies& species);

/// Independent check of solve_one_channel by direct integration of the
/// stationary equation (see ode_oracle.hpp). Throws NumericalError when the
/// step-halving does not converge.
ScatteringAmplitudes solve_one_channel_oracle(double k, const ComplexPotentialProfile& potential,
                                              const AtomSpecies& species);

struct GradientRecord
{
    double A = 0.0;
    std::vector<double> dA_dReV;
    std::vector<double> dA_dImV;
    std::vector<double> dA_dDelta;
    std::vector<double> dA_dRabi;
    std::vector<double> dA_dWidth;   // at fixed positions of all other segments' widths
};

/// Analytic derivatives of A(k) by differentiating the transfer product
/// factor by factor, chain-ruled to the laser parameters of each segment.
GradientRecord absorption_gradient(double k, const LaserProfile& profile);

/// Same derivatives w.r.t. the complex potential only (dA_dDelta/dA_dRabi empty).
GradientRecord absorption_gradient(double k, const ComplexPotentialProfile& potential,
                                   const AtomSpecies& species);

/// Stationary one-channel state (without the 1/sqrt(2 pi) prefactor) at the
/// requested positions, for the amplitudes previously returned by
/// solve_one_channel.
std::vector<cplx> one_channel_wavefunction(double k, const ComplexPotentialProfile& potential,
                                           const AtomSpecies& species,
                                           std::span<const double> xs);

} // namespace atomdetect
