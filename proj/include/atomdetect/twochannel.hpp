#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "atomdetect/potential.hpp"

namespace atomdetect {

/// Amplitudes of the two-level conditional Hamiltonian for incidence in the
/// ground channel from the left. Ground-channel amplitudes use global x,
/// as in e^{ikx} + R1 e^{-ikx}. Excited-channel amplitudes are referenced
/// at the nearest laser edge: R2 e^{-iq (x - x_start)} on the left and
/// T2 e^{i q_right (x - x_end)} on the right, since with Im q > 0 a global
/// reference would overflow.
struct TwoChannelAmplitudes
{
    double k = 0.0;
    cplx q;         // left exterior, q^2 = 2(m/hbar)(E + Delta_first + i gamma/2)
    cplx q_right;   // right exterior, with Delta of the last segment
    cplx R1, T1, R2, T2;
    double A = 0.0;
    bool used_fallback = false;   // near-defective segment, solved by the ODE path
};

/// Eigenvector condition number above which a segment matrix is treated as
/// defective.
inline constexpr double kDefectiveCondition = 1e8;

TwoChannelAmplitudes solve_two_channel(double k, const LaserProfile& profile);

/// Direct integration of the coupled equations (independent of the mode path).
TwoChannelAmplitudes solve_two_channel_oracle(double k, const LaserProfile& profile);

/// Ground/excited components (without 1/sqrt(2 pi)) at the requested
/// positions. Throws NumericalError for near-defective segments.
std::vector<Eigen::Vector2cd> two_channel_wavefunction(double k, const LaserProfile& profile,
                                                       std::span<const double> xs);

struct ChannelComparisonRow
{
    double k = 0.0;
    double a_one_channel = 0.0;
    double a_two_channel = 0.0;
    double abs_diff = 0.0;
};

struct ChannelComparison
{
    std::vector<ChannelComparisonRow> rows;
    double max_abs_diff = 0.0;
    double max_r_omega = 0.0;
    double max_r_energy = 0.0;
    bool weak_driving_valid = false;   // both ratios <= kappa in every segment
};

ChannelComparison compare_channels(std::span<const double> k_grid, const LaserProfile& profile,
                                   double kappa, unsigned threads = 1);

} // namespace atomdetect
