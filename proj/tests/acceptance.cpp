// Acceptance checks. One line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <unistd.h>

#include "atomdetect/objective.hpp"
#include "atomdetect/scatter.hpp"
#include "atomdetect/twochannel.hpp"
#include "atomdetect/units.hpp"
#include "atomdetect/wavepacket.hpp"

using namespace atomdetect;
namespace fs = std::filesystem;

namespace {

struct Outcome
{
    bool pass = false;
    std::string detail;
};

const AtomSpecies cs = cesium_default();

double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi)
{
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double k_of(double v_cm_per_s)
{
    return velocity_to_wavenumber(convert::cm_per_s_to_um_per_us(v_cm_per_s), cs);
}

LaserProfile laser(std::vector<Segment> segments)
{
    LaserProfile p;
    p.species = cs;
    p.segments = std::move(segments);
    return p;
}

LaserProfile random_laser(std::mt19937_64& rng, int max_segments, double detuning, double rabi)
{
    std::vector<Segment> segs;
    const int n = uniform_int(rng, 1, max_segments);
    for (int j = 0; j < n; ++j)
        segs.push_back({10.0 / n, uniform(rng, -detuning, detuning), uniform(rng, 0.0, rabi)});
    return laser(segs);
}

ComplexPotentialProfile random_potential(std::mt19937_64& rng, bool absorbing, double v_max)
{
    ComplexPotentialProfile p;
    p.x_start = uniform(rng, -5.0, 5.0);
    const int n = uniform_int(rng, 1, 8);
    for (int j = 0; j < n; ++j)
        p.segments.push_back({uniform(rng, 0.5, 10.0),
                              cplx(uniform(rng, -v_max, v_max), absorbing ? -uniform(rng, 0.0, v_max) : 0.0)});
    return p;
}

// AC-1
Outcome flux_conservation()
{
    std::mt19937_64 rng(1001);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto p = random_potential(rng, false, 100.0);
        const auto a = solve_one_channel(k_of(uniform(rng, 0.2, 9.0)), p, cs);
        worst = std::max(worst, std::abs(std::norm(a.R1) + std::norm(a.T1) - 1.0));
    }
    return {worst <= 1e-10, fmt::format("1000 cases, max ||R|^2+|T|^2-1| = {:.3e} (tol 1e-10)", worst)};
}

// AC-2
Outcome oracle_equivalence()
{
    std::mt19937_64 rng(2002);
    double one = 0.0;
    for (int i = 0; i < 100; ++i) {
        // absorbing lasers over the operating range, expressed as potentials
        const auto p = profile_to_potential(random_laser(rng, 8, 3.0 * cs.gamma, 2.0 * cs.gamma));
        const double k = k_of(uniform(rng, 0.2, 9.0));
        const auto a = solve_one_channel(k, p, cs);
        const auto b = solve_one_channel_oracle(k, p, cs);
        one = std::max({one, std::abs(a.R1 - b.R1), std::abs(a.T1 - b.T1)});
    }
    double two = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto p = random_laser(rng, 4, 3.0 * cs.gamma, 2.0 * cs.gamma);
        const double k = k_of(uniform(rng, 0.2, 9.0));
        const auto a = solve_two_channel(k, p);
        const auto b = solve_two_channel_oracle(k, p);
        two = std::max({two, std::abs(a.R1 - b.R1), std::abs(a.T1 - b.T1), std::abs(a.R2 - b.R2),
                        std::abs(a.T2 - b.T2)});
    }
    return {one <= 1e-8 && two <= 1e-8,
            fmt::format("one-channel 100 cases max diff {:.3e}, two-channel 50 cases max diff {:.3e} (tol 1e-8)",
                        one, two)};
}

// AC-3: norm-wise relative error of the gradient against central differences
Outcome gradient_correctness()
{
    std::mt19937_64 rng(3003);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto p = random_laser(rng, 6, 3.0 * cs.gamma, 1.5 * cs.gamma);
        KGrid grid;
        grid.k = {k_of(uniform(rng, 0.2, 9.0))};
        grid.weight = {1.0};
        const auto g = objective_gradient(p, grid);
        double err = 0.0, scale = 0.0;
        for (std::size_t j = 0; j < p.segments.size(); ++j)
            for (int part = 0; part < 2; ++part) {
                auto up = p, dn = p;
                double& u = part == 0 ? up.segments[j].detuning : up.segments[j].rabi;
                double& d = part == 0 ? dn.segments[j].detuning : dn.segments[j].rabi;
                const double h = 1e-5 * std::max(1.0, std::abs(u));
                u += h;
                d -= h;
                const double fd = (objective_value(up, grid) - objective_value(dn, grid)) / (2.0 * h);
                err = std::max(err, std::abs(g[2 * j + static_cast<std::size_t>(part)] - fd));
                scale = std::max(scale, std::abs(fd));
            }
        if (scale > 0.0)
            worst = std::max(worst, err / scale);
    }
    return {worst < 1e-6, fmt::format("100 cases, max relative error {:.3e} (tol 1e-6)", worst)};
}

// AC-4
Outcome recoil_sanity()
{
    const double v = convert::um_per_us_to_cm_per_s(recoil_velocity(cs));
    return {v >= 0.34 && v <= 0.36, fmt::format("v_rec = {:.5f} cm/s (range [0.34, 0.36])", v)};
}

// AC-5
Outcome one_channel_validity()
{
    std::mt19937_64 rng(5005);
    const auto grid = uniform_velocity_grid(0.2, 9.0, 100, cs);
    const double e_max = grid.max_energy(cs);
    double worst = 0.0, worst_red = 0.0, a_max = 0.0;
    int n_red = 0;
    // r_energy <= 0.05 over this grid needs |Delta| above about 5 gamma
    const double d_min = std::sqrt(std::pow(e_max / 0.05, 2.0) - cs.gamma * cs.gamma) / 2.0;
    int tried = 0, kept = 0;
    while (kept < 40 && tried < 100000) {
        ++tried;
        std::vector<Segment> segs;
        const int n = uniform_int(rng, 1, 8);
        for (int j = 0; j < n; ++j) {
            const double delta = (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0) * uniform(rng, d_min, 3.0 * d_min);
            segs.push_back({10.0 / n, delta, uniform(rng, 0.0, 0.1) * std::hypot(2.0 * delta, cs.gamma)});
        }
        const auto p = laser(segs);
        bool ok = true;
        for (const auto& s : p.segments) {
            const auto r = weak_driving_ratio(s, e_max, cs);
            ok = ok && r.r_omega <= 0.1 && r.r_energy <= 0.05;
        }
        if (!ok)
            continue;
        ++kept;
        const auto cmp = compare_channels(grid.k, p, 0.2);
        worst = std::max(worst, cmp.max_abs_diff);
        // Delta < 0 everywhere keeps the excited channel closed outside and inside the laser
        if (std::all_of(segs.begin(), segs.end(), [](const Segment& s) { return s.detuning < 0.0; })) {
            ++n_red;
            worst_red = std::max(worst_red, cmp.max_abs_diff);
        }
        for (const auto& row : cmp.rows)
            a_max = std::max(a_max, row.a_two_channel);
    }
    return {kept == 40 && worst <= 0.02,
            fmt::format("{} weak profiles (largest A {:.3f}), max |A1-A2| = {:.3e} (tol 0.02); "
                        "subset with all Delta < 0 ({} profiles): {:.3e}",
                        kept, a_max, worst, n_red, worst_red)};
}

// AC-6
Outcome drive_regimes()
{
    auto curve = [](double rabi) {
        const auto p = laser({{10.0, 0.0, rabi}});
        std::vector<double> a;
        for (int i = 0; i < 45; ++i)
            a.push_back(solve_two_channel(k_of(0.2 + 0.2 * i), p).A);
        return a;
    };
    const auto strong = curve(5.0 * cs.gamma);
    const bool strong_ok = strong.back() - strong.front() >= 0.3;

    const auto weak = curve(convert::per_s_to_per_us(0.1033e6));
    bool monotone = true;
    for (std::size_t i = 1; i < weak.size(); ++i)
        monotone = monotone && weak[i] <= weak[i - 1];
    const bool weak_ok = weak.front() >= 0.9 && weak.back() < 0.5 && monotone;
    return {strong_ok && weak_ok,
            fmt::format("strong: A(0.2)={:.4f} A(9)={:.4f} gap {:.4f} (need >= 0.3) {}; weak: A(0.2)={:.4f} "
                        "(need >= 0.9) A(9)={:.4f} (need < 0.5) monotone={} {}",
                        strong.front(), strong.back(), strong.back() - strong.front(), strong_ok ? "ok" : "FAIL",
                        weak.front(), weak.back(), monotone, weak_ok ? "ok" : "FAIL")};
}

// AC-7
Outcome optimization_dominance()
{
    OptimizationProblem base;
    base.species = cs;
    base.grid = uniform_velocity_grid(0.2, 9.0, 100, cs);
    base.bounds = ParameterBounds::defaults(cs);
    base.kappa = 0.2;
    base.multistart = 16;
    base.seed = 20240607;

    auto run = [&](int n, const std::vector<LaserProfile>& warm) {
        auto p = base;
        p.n_segments = n;
        p.warm_starts = warm;
        return optimize(p);
    };
    const auto r1 = run(1, {});
    const auto r2 = run(2, {r1.profile});
    const auto r8 = run(8, {r1.profile, r2.profile});

    std::string signs, rabi;
    bool non_decreasing = true;
    for (std::size_t j = 0; j < r8.profile.segments.size(); ++j) {
        const auto& s = r8.profile.segments[j];
        signs += s.detuning < 0.0 ? '-' : '+';
        rabi += fmt::format("{}{:.3f}", j ? "," : "", s.rabi / cs.gamma);
        if (j > 0)
            non_decreasing = non_decreasing && s.rabi >= r8.profile.segments[j - 1].rabi;
    }
    const bool pass = r2.objective >= r1.objective && r8.objective >= r2.objective &&
                      r2.objective - r1.objective > 0.01;
    return {pass, fmt::format("A(1)={:.6f} A(2)={:.6f} A(8)={:.6f} gain(2-1)={:.4f} (need > 0.01); "
                              "8-segment detuning signs {} rabi/gamma [{}] non-decreasing={}",
                              r1.objective, r2.objective, r8.objective, r2.objective - r1.objective, signs, rabi,
                              non_decreasing)};
}

// AC-8: grid over (Delta, fraction of the largest feasible Omega) so that
// the constraint boundary is sampled exactly.
Outcome brute_force_optimality()
{
    OptimizationProblem p;
    p.species = cs;
    p.grid.k = {k_of(1.0)};
    p.grid.weight = {1.0};
    p.bounds = ParameterBounds::defaults(cs);
    p.seed = 8;
    const auto r = optimize(p);

    const double e_max = p.grid.max_energy(cs);
    double best = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double delta = p.bounds.detuning_min + (p.bounds.detuning_max - p.bounds.detuning_min) * i / 199.0;
        const double scale = p.kappa * std::hypot(2.0 * delta, cs.gamma);
        if (e_max > 0.5 * scale)
            continue;
        const double top = std::min(p.bounds.rabi_max, scale);
        for (int j = 0; j < 200; ++j) {
            const auto lp = laser({{p.total_length, delta, top * j / 199.0}});
            best = std::max(best, objective_value(lp, p.grid));
        }
    }
    const double gap = best - r.objective;
    return {gap <= 1e-4, fmt::format("optimizer {:.8f}, grid scan {:.8f}, scan - optimizer = {:.3e} (tol 1e-4)",
                                     r.objective, best, gap)};
}

// AC-9
Outcome wavepacket_consistency()
{
    struct Case
    {
        const char* name;
        LaserProfile profile;
        ChannelMode mode;
    };
    const std::vector<Case> cases{
        {"weak/2ch", laser({{10.0, 0.0, convert::per_s_to_per_us(0.1033e6)}}), ChannelMode::two_channel},
        {"weak/1ch", laser({{10.0, 0.0, convert::per_s_to_per_us(0.1033e6)}}), ChannelMode::one_channel},
        {"moderate/2ch", laser({{5.0, -0.5 * cs.gamma, 0.3 * cs.gamma}, {5.0, -0.2 * cs.gamma, 0.6 * cs.gamma}}),
         ChannelMode::two_channel},
    };
    WavepacketSpec spec;
    spec.v_mean = 1.0;
    spec.sigma_x = 5.0;
    spec.x0 = -30.0;

    bool pass = true;
    std::string detail;
    for (const auto& c : cases) {
        const double t_max = suggested_horizon(spec, c.profile);
        std::vector<double> times(401);
        for (std::size_t i = 0; i < times.size(); ++i)
            times[i] = t_max * static_cast<double>(i) / 400.0;
        const auto rec = propagate(spec, c.profile, times, c.mode);
        double integral = 0.0;
        bool monotone = true;
        for (std::size_t i = 1; i < rec.size(); ++i) {
            integral += 0.5 * (rec[i].Pi_t + rec[i - 1].Pi_t) * (rec[i].t - rec[i - 1].t);
            monotone = monotone && rec[i].N_t <= rec[i - 1].N_t + 1e-12;
        }
        const double ref = expected_detection(spec, c.profile, c.mode);
        const double rel = std::abs(integral - ref) / ref;
        pass = pass && rel <= 0.01 && monotone;
        detail += fmt::format("{}{}: int Pi {:.6f} vs {:.6f} rel {:.2e}, N_t monotone={}", detail.empty() ? "" : "; ",
                              c.name, integral, ref, rel, monotone);
    }
    return {pass, detail + " (tol 1%)"};
}

// AC-10
std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism()
{
    const fs::path root = fs::temp_directory_path() / fmt::format("atomdetect_ac10_{}", ::getpid());
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path cfg = root / "run.yaml";
    std::ofstream(cfg) << "profile:\n"
                          "  segments:\n"
                          "    - {width_um: 5, detuning_per_s: -20.0e6, rabi_per_s: 4.0e6}\n"
                          "    - {width_um: 5, detuning_per_s: -5.0e6, rabi_per_s: 8.0e6}\n"
                          "grid: {v_min_cm_per_s: 0.2, v_max_cm_per_s: 9, n: 25}\n"
                          "optimize: {n_segments: 2, multistart: 4}\n"
                          "wavepacket: {n_times: 60}\n";
    bool pass = true;
    int compared = 0;
    std::string bad;
    for (const char* cmd : {"scan", "detect", "optimize", "propagate", "validate"}) {
        for (const char* run : {"a", "b"}) {
            const std::string line =
                fmt::format("\"{}\" {} --config \"{}\" --out \"{}\" --seed 11 --threads 2 > /dev/null 2>&1",
                            ATOMDETECT_BINARY, cmd, cfg.string(), (root / cmd / run).string());
            if (std::system(line.c_str()) != 0) {
                pass = false;
                bad += fmt::format(" {}:exit", cmd);
            }
        }
        for (const auto& entry : fs::directory_iterator(root / cmd / "a")) {
            ++compared;
            const auto other = root / cmd / "b" / entry.path().filename();
            if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
                pass = false;
                bad += " " + entry.path().filename().string();
            }
        }
    }
    fs::remove_all(root);
    pass = pass && compared >= 7;
    return {pass, fmt::format("5 commands run twice, {} files compared, mismatches:{}", compared,
                              bad.empty() ? " none" : bad)};
}

} // namespace

int main()
{
    struct Criterion
    {
        const char* id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all{
        {"AC-1", "flux conservation", 10.0, flux_conservation},
        {"AC-2", "oracle equivalence", 60.0, oracle_equivalence},
        {"AC-3", "gradient correctness", 30.0, gradient_correctness},
        {"AC-4", "recoil sanity", 1.0, recoil_sanity},
        {"AC-5", "one-channel validity", 120.0, one_channel_validity},
        {"AC-6", "strong and weak drive regimes", 10.0, drive_regimes},
        {"AC-7", "optimization dominance", 300.0, optimization_dominance},
        {"AC-8", "brute-force optimality", 60.0, brute_force_optimality},
        {"AC-9", "wavepacket consistency", 120.0, wavepacket_consistency},
        {"AC-10", "determinism", 300.0, determinism},
    };
    int failed = 0;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.budget_s;
        const bool pass = o.pass && in_time;
        failed += pass ? 0 : 1;
        std::printf("%s %s %s: %s [%.1f s, budget %.0f s%s]\n", c.id, pass ? "PASS" : "FAIL", c.name,
                    o.detail.c_str(), secs, c.budget_s, in_time ? "" : ", over budget");
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
    return failed == 0 ? 0 : 1;
}
