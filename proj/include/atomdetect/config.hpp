#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "atomdetect/objective.hpp"
#include "atomdetect/wavepacket.hpp"

namespace atomdetect::config {

/// Invalid configuration; the message carries "line N:" when the source
/// position is known.
class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// All values are kept in the units they are written in, so that a parsed
// config serializes back to the same numbers.

struct SpeciesConfig
{
    std::string name = "cesium";
    std::optional<double> mass_kg;
    std::optional<double> gamma_per_s;
    std::optional<double> wavelength_nm;

    bool operator==(const SpeciesConfig&) const = default;
};

struct SegmentConfig
{
    double width_um = 10.0;
    double detuning_per_s = 0.0;
    double rabi_per_s = 0.0;

    bool operator==(const SegmentConfig&) const = default;
};

struct ProfileConfig
{
    double x_start_um = 0.0;
    std::vector<SegmentConfig> segments{SegmentConfig{}};

    bool operator==(const ProfileConfig&) const = default;
};

struct GridConfig
{
    double v_min_cm_per_s = 0.2;
    double v_max_cm_per_s = 9.0;
    int n = 100;
    std::vector<double> weights;   // empty: uniform; otherwise n entries, normalized on use

    bool operator==(const GridConfig&) const = default;
};

struct OptimizeConfig
{
    int n_segments = 1;
    double length_um = 10.0;
    double x_start_um = 0.0;
    double kappa = 0.2;
    int multistart = 16;
    std::uint64_t seed = 0;
    bool tie_detuning = false;
    bool free_widths = false;
    double min_width_fraction = 0.02;
    std::optional<double> detuning_min_per_s;
    std::optional<double> detuning_max_per_s;
    std::optional<double> rabi_max_per_s;

    bool operator==(const OptimizeConfig&) const = default;
};

struct WavepacketConfig
{
    double v_mean_cm_per_s = 1.0;
    double sigma_x_um = 5.0;
    double x0_um = -30.0;
    ChannelMode mode = ChannelMode::two_channel;
    std::optional<double> t_max_us;   // default: packet has left the laser
    int n_times = 200;

    bool operator==(const WavepacketConfig&) const = default;
};

struct ValidateConfig
{
    double kappa = 0.1;   // weak-driving threshold for the validity flag

    bool operator==(const ValidateConfig&) const = default;
};

struct OutputConfig
{
    std::string directory = "out";

    bool operator==(const OutputConfig&) const = default;
};

struct RunConfig
{
    SpeciesConfig species;
    ProfileConfig profile;
    GridConfig grid;
    OptimizeConfig optimize;
    WavepacketConfig wavepacket;
    ValidateConfig validate;
    OutputConfig output;
    unsigned threads = 1;

    bool operator==(const RunConfig&) const = default;
};

/// Parses YAML text. Every section and key is optional; unknown keys,
/// wrong types and out-of-range values raise ConfigError with the line.
RunConfig parse(const std::string& text);
RunConfig load(const std::string& path);
std::string serialize(const RunConfig& config);

/// Applies PREFIX<SECTION>__<KEY>=value overrides (e.g.
/// ATOMDETECT_OPTIMIZE__SEED=7) found in `environment` ("NAME=value" entries).
RunConfig apply_environment(const RunConfig& config, const std::vector<std::string>& environment,
                            const std::string& prefix = "ATOMDETECT_");

// Conversions to the internal unit system (hbar = 1, um, us).
AtomSpecies make_species(const RunConfig& config);
LaserProfile make_profile(const RunConfig& config);
KGrid make_grid(const RunConfig& config);
std::vector<double> grid_velocities(const RunConfig& config);   // cm/s
OptimizationProblem make_problem(const RunConfig& config);
WavepacketSpec make_wavepacket(const RunConfig& config);

} // namespace atomdetect::config
