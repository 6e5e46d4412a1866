#include "atomdetect/commands.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "atomdetect/errors.hpp"
#include "atomdetect/objective.hpp"
#include "atomdetect/parallel.hpp"
#include "atomdetect/scatter.hpp"
#include "atomdetect/twochannel.hpp"
#include "atomdetect/wavepacket.hpp"

namespace atomdetect::cli {

namespace fs = std::filesystem;

std::string format_number(double value)
{
    if (value == 0.0)
        value = 0.0;   // drop the sign of -0
    return fmt::format("{:.11e}", value);
}

namespace {

class TextFile
{
public:
    TextFile(const fs::path& dir, const std::string& name, CommandOutput& out) : path_(dir / name)
    {
        fs::create_directories(dir);
        stream_.open(path_, std::ios::binary | std::ios::trunc);
        if (!stream_)
            throw std::runtime_error("cannot write " + path_.string());
        out.files.push_back(path_);
    }

    void line(const std::string& text) { stream_ << text << '\n'; }

    void row(std::initializer_list<double> values)
    {
        std::string s;
        for (double v : values) {
            if (!s.empty())
                s += ',';
            s += format_number(v);
        }
        line(s);
    }

private:
    fs::path path_;
    std::ofstream stream_;
};

const char* yes_no(bool b)
{
    return b ? "true" : "false";
}

const char* origin_name(RestartSummary::Origin o)
{
    switch (o) {
    case RestartSummary::Origin::deterministic:
        return "deterministic";
    case RestartSummary::Origin::warm:
        return "warm";
    default:
        return "random";
    }
}

} // namespace

CommandOutput cmd_scan(const config::RunConfig& config, const fs::path& dir)
{
    const auto profile = config::make_profile(config);
    const auto grid = config::make_grid(config);
    const auto v = config::grid_velocities(config);
    const auto a = absorption_curve(profile, grid, config.threads);

    CommandOutput out;
    TextFile csv(dir, "scan.csv", out);
    csv.line("v_cm_per_s,absorption");
    for (std::size_t j = 0; j < v.size(); ++j)
        csv.row({v[j], a[j]});
    out.summary = fmt::format("scan: {} velocities", v.size());
    return out;
}

CommandOutput cmd_detect(const config::RunConfig& config, const fs::path& dir)
{
    const auto profile = config::make_profile(config);
    const auto grid = config::make_grid(config);
    const auto v = config::grid_velocities(config);
    std::vector<double> a(v.size());
    parallel_for(v.size(), config.threads, [&](std::size_t j) { a[j] = solve_two_channel(grid.k[j], profile).A; });

    CommandOutput out;
    TextFile csv(dir, "detect.csv", out);
    csv.line("v_cm_per_s,detection_probability");
    for (std::size_t j = 0; j < v.size(); ++j)
        csv.row({v[j], a[j]});
    out.summary = fmt::format("detect: {} velocities", v.size());
    return out;
}

CommandOutput cmd_optimize(const config::RunConfig& config, const fs::path& dir)
{
    const auto problem = config::make_problem(config);
    const auto result = optimize(problem);
    const auto v = config::grid_velocities(config);
    const auto& sp = problem.species;
    const auto& segs = result.profile.segments;

    CommandOutput out;
    {
        TextFile csv(dir, "optimize_profile.csv", out);
        csv.line("segment,x_left_um,width_um,detuning_per_s,rabi_per_s,re_V_per_s,im_V_per_s");
        double x = result.profile.x_start;
        for (std::size_t j = 0; j < segs.size(); ++j) {
            const cplx pot = potential_from_laser(segs[j], sp);
            csv.line(fmt::format("{},{},{},{},{},{},{}", j, format_number(x), format_number(segs[j].width),
                                 format_number(convert::per_us_to_per_s(segs[j].detuning)),
                                 format_number(convert::per_us_to_per_s(segs[j].rabi)),
                                 format_number(convert::per_us_to_per_s(pot.real())),
                                 format_number(convert::per_us_to_per_s(pot.imag()))));
            x += segs[j].width;
        }
    }
    {
        TextFile csv(dir, "optimize_absorption.csv", out);
        csv.line("v_cm_per_s,absorption");
        for (std::size_t j = 0; j < v.size(); ++j)
            csv.row({v[j], result.per_k_absorption[j]});
    }

    bool all_negative = true, non_decreasing = true;
    for (std::size_t j = 0; j < segs.size(); ++j) {
        all_negative = all_negative && segs[j].detuning < 0.0;
        if (j > 0)
            non_decreasing = non_decreasing && segs[j].rabi >= segs[j - 1].rabi;
    }
    int accepted = 0;
    for (const auto& r : result.restarts)
        accepted += r.accepted ? 1 : 0;

    {
        TextFile rep(dir, "optimize_report.txt", out);
        rep.line(fmt::format("mean_absorption: {}", format_number(result.objective)));
        rep.line(fmt::format("n_segments: {}", segs.size()));
        rep.line(fmt::format("seed: {}", problem.seed));
        rep.line(fmt::format("kappa: {}", format_number(problem.kappa)));
        rep.line(fmt::format("tie_detuning: {}", yes_no(problem.tie_detuning)));
        rep.line(fmt::format("free_widths: {}", yes_no(problem.free_widths)));
        rep.line(fmt::format("e_max_per_s: {}", format_number(convert::per_us_to_per_s(result.e_max))));
        rep.line(fmt::format("kkt_residual: {}", format_number(result.kkt_residual)));
        rep.line(fmt::format("max_violation: {}", format_number(result.max_violation)));
        rep.line(fmt::format("iterations: {}", result.iterations));
        rep.line(fmt::format("all_detuning_negative: {}", yes_no(all_negative)));
        rep.line(fmt::format("rabi_non_decreasing: {}", yes_no(non_decreasing)));
        rep.line(fmt::format("restarts: {} run, {} accepted", result.restarts.size(), accepted));
        rep.line("# index origin mean_absorption accepted iterations kkt_residual max_violation");
        for (const auto& r : result.restarts)
            rep.line(fmt::format("  {} {} {} {} {} {} {}", r.index, origin_name(r.origin), format_number(r.objective),
                                 yes_no(r.accepted), r.iterations, format_number(r.kkt_residual),
                                 format_number(r.max_violation)));
        // Slacks in 1/s: kappa|2D+ig| - Omega, kappa|2D+ig|/2 - E_max, and the box bounds.
        rep.line("constraint_slacks:");
        rep.line("# segment rabi_per_s energy_per_s detuning_lower_per_s detuning_upper_per_s rabi_upper_per_s");
        for (std::size_t j = 0; j < segs.size(); ++j) {
            const double scale = problem.kappa * std::hypot(2.0 * segs[j].detuning, sp.gamma);
            auto s = [](double x) { return format_number(convert::per_us_to_per_s(x)); };
            rep.line(fmt::format("  {} {} {} {} {} {}", j, s(scale - segs[j].rabi), s(0.5 * scale - result.e_max),
                                 s(segs[j].detuning - problem.bounds.detuning_min),
                                 s(problem.bounds.detuning_max - segs[j].detuning),
                                 s(problem.bounds.rabi_max - segs[j].rabi)));
        }
        rep.line("weak_driving_ratios:");
        rep.line("# segment r_omega r_energy");
        for (std::size_t j = 0; j < result.ratios.size(); ++j)
            rep.line(fmt::format("  {} {} {}", j, format_number(result.ratios[j].r_omega),
                                 format_number(result.ratios[j].r_energy)));
    }
    out.summary = fmt::format("optimize: mean absorption {} over {} segments ({} of {} restarts accepted)",
                              format_number(result.objective), segs.size(), accepted, result.restarts.size());
    return out;
}

CommandOutput cmd_propagate(const config::RunConfig& config, const fs::path& dir)
{
    const auto profile = config::make_profile(config);
    const auto spec = config::make_wavepacket(config);
    const auto& wc = config.wavepacket;
    const double t_max = wc.t_max_us ? *wc.t_max_us : suggested_horizon(spec, profile);
    std::vector<double> times(static_cast<std::size_t>(wc.n_times));
    for (int i = 0; i < wc.n_times; ++i)
        times[static_cast<std::size_t>(i)] = t_max * i / (wc.n_times - 1);

    const auto records = propagate(spec, profile, times, wc.mode, config.threads);
    const bool two = wc.mode == ChannelMode::two_channel;

    CommandOutput out;
    TextFile csv(dir, "propagate.csv", out);
    csv.line(two ? "t_us,N_t,Pi_per_us,P2" : "t_us,N_t,Pi_per_us");
    double detected = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (two)
            csv.row({r.t, r.N_t, r.Pi_t, r.P2_t});
        else
            csv.row({r.t, r.N_t, r.Pi_t});
        if (i > 0)
            detected += 0.5 * (r.Pi_t + records[i - 1].Pi_t) * (r.t - records[i - 1].t);
    }
    out.summary = fmt::format("propagate: {} times up to {} us, integrated detection {}", records.size(),
                              format_number(t_max), format_number(detected));
    return out;
}

CommandOutput cmd_validate(const config::RunConfig& config, const fs::path& dir)
{
    const auto profile = config::make_profile(config);
    const auto grid = config::make_grid(config);
    const auto v = config::grid_velocities(config);
    const auto cmp = compare_channels(grid.k, profile, config.validate.kappa, config.threads);

    CommandOutput out;
    {
        TextFile csv(dir, "validate.csv", out);
        csv.line("v_cm_per_s,A_one_channel,A_two_channel,abs_diff");
        for (std::size_t j = 0; j < v.size(); ++j)
            csv.row({v[j], cmp.rows[j].a_one_channel, cmp.rows[j].a_two_channel, cmp.rows[j].abs_diff});
    }
    out.summary = fmt::format("max_abs_diff={} max_r_omega={} max_r_energy={} kappa={} weak_driving_valid={}",
                              format_number(cmp.max_abs_diff), format_number(cmp.max_r_omega),
                              format_number(cmp.max_r_energy), format_number(config.validate.kappa),
                              yes_no(cmp.weak_driving_valid));
    {
        TextFile summary(dir, "validate_summary.txt", out);
        summary.line(out.summary);
    }
    return out;
}

CommandOutput run_command(const std::string& name, const config::RunConfig& config, const fs::path& dir)
{
    if (name == "scan")
        return cmd_scan(config, dir);
    if (name == "detect")
        return cmd_detect(config, dir);
    if (name == "optimize")
        return cmd_optimize(config, dir);
    if (name == "propagate")
        return cmd_propagate(config, dir);
    if (name == "validate")
        return cmd_validate(config, dir);
    throw std::invalid_argument("unknown command '" + name + "'");
}

} // namespace atomdetect::cli
