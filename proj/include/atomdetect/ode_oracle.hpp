#pragma once

#include <vector>

#include <Eigen/Core>

namespace atomdetect::ode {

/// Psi'' = F(x) Psi on [x_start, x_start + sum(widths)] with F constant on
/// each segment, and free exterior waves with wavenumbers kappa_left /
/// kappa_right (Im >= 0) per channel. Incidence is in channel 0 from the left.
struct CoupledChannelProblem
{
    int channels = 1;
    double x_start = 0.0;
    std::vector<double> widths;
    std::vector<Eigen::MatrixXcd> coupling;
    Eigen::VectorXcd kappa_left;
    Eigen::VectorXcd kappa_right;
};

/// Edge-referenced amplitudes: on the left
/// Psi_c = delta_c0 e^{i kl_0 (x - x_s)} + reflection_c e^{-i kl_c (x - x_s)},
/// on the right Psi_c = transmission_c e^{i kr_c (x - x_e)}.
struct ScatteringSolution
{
    Eigen::VectorXcd reflection;
    Eigen::VectorXcd transmission;
    int halvings = 0;
    long steps = 0;
    double last_change = 0.0;
};

struct IntegrationOptions
{
    double tolerance = 1e-10;        // max abs change between successive halvings
    double initial_step_phase = 0.5; // h * max|eigenvalue| on the first pass
    int max_halvings = 14;
    long max_steps = 20'000'000;
};

/// Gauss-Legendre (3-stage, order 6) integration from the right edge to the
/// left edge with QR re-orthonormalization after each step, repeated with
/// halved steps until converged. Throws NumericalError otherwise.
ScatteringSolution integrate_scattering(const CoupledChannelProblem& problem,
                                        const IntegrationOptions& options = {});

} // namespace atomdetect::ode
