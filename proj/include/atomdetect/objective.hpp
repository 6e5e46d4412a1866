#pragma once

#include <cstdint>
#include <vector>

#include "atomdetect/potential.hpp"

namespace atomdetect {

/// Discrete wavenumber set with weights summing to one.
struct KGrid
{
    std::vector<double> k;
    std::vector<double> weight;

    std::size_t size() const { return k.size(); }
    double max_energy(const AtomSpecies& species) const;
    double median_k() const;
    void validate() const;
};

/// n equally spaced velocities (cm/s, endpoints included), W_j = 1/n.
KGrid uniform_velocity_grid(double v_min_cm_per_s, double v_max_cm_per_s, int n,
                            const AtomSpecies& species);

/// Weighted absorption sum_j A(k_j) W_j with the one-channel solver.
double objective_value(const LaserProfile& profile, const KGrid& grid, unsigned threads = 1);

/// Per-k absorption A(k_j).
std::vector<double> absorption_curve(const LaserProfile& profile, const KGrid& grid,
                                     unsigned threads = 1);

/// d(objective)/d(Delta_1, Omega_1, ..., Delta_n, Omega_n), internal units.
std::vector<double> objective_gradient(const LaserProfile& profile, const KGrid& grid,
                                       unsigned threads = 1);

struct ParameterBounds
{
    double detuning_min = 0.0;
    double detuning_max = 0.0;
    double rabi_max = 0.0;

    /// Symmetric detuning box of 30 gamma and Rabi frequency up to 12 gamma.
    static ParameterBounds defaults(const AtomSpecies& species);
};

struct OptimizationProblem
{
    AtomSpecies species;
    KGrid grid;
    int n_segments = 1;
    double total_length = 10.0;   // um
    double x_start = 0.0;
    double kappa = 0.2;
    ParameterBounds bounds;
    int multistart = 16;
    std::uint64_t seed = 0;
    bool tie_detuning = false;
    bool free_widths = false;
    double min_width_fraction = 0.02;   // of total_length, used with free_widths
    unsigned threads = 1;
    /// Extra starting profiles (e.g. a coarser optimum); resampled onto
    /// n_segments equal segments and clipped into the feasible set.
    std::vector<LaserProfile> warm_starts;

    void validate() const;
};

struct RestartSummary
{
    int index = 0;
    enum class Origin { deterministic, random, warm } origin = Origin::random;
    double objective = 0.0;
    bool accepted = false;
    int iterations = 0;
    double kkt_residual = 0.0;
    double max_violation = 0.0;
};

inline constexpr double kKktTolerance = 1e-6;
inline constexpr double kFeasibilityTolerance = 1e-8;

struct OptimizationResult
{
    LaserProfile profile;
    double objective = 0.0;
    std::vector<double> per_k_absorption;
    int iterations = 0;
    bool converged = false;
    double kkt_residual = 0.0;
    double max_violation = 0.0;
    double e_max = 0.0;
    std::vector<WeakDrivingRatios> ratios;   // per segment at the optimum
    std::vector<RestartSummary> restarts;
};

/// Maximizes the weighted absorption over the segment laser parameters
/// subject to box bounds and Omega <= kappa |2 Delta + i gamma|,
/// E_max <= kappa |2 Delta + i gamma| / 2 in every segment. Throws
/// NumericalError if no feasible start exists or no restart converges.
OptimizationResult optimize(const OptimizationProblem& problem);

} // namespace atomdetect
