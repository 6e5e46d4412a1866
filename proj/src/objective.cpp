#include "atomdetect/objective.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "atomdetect/errors.hpp"
#include "atomdetect/parallel.hpp"
#include "atomdetect/scatter.hpp"
#include "atomdetect/sqp.hpp"

namespace atomdetect {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double KGrid::max_energy(const AtomSpecies& species) const
{
    double e = 0.0;
    for (double kj : k)
        e = std::max(e, kinetic_energy(kj, species));
    return e;
}

double KGrid::median_k() const
{
    std::vector<double> sorted = k;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    return n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

void KGrid::validate() const
{
    if (k.empty() || k.size() != weight.size())
        throw std::invalid_argument("k-grid needs one weight per point and at least one point");
    double sum = 0.0;
    for (std::size_t j = 0; j < k.size(); ++j) {
        if (!(k[j] > 0.0) || !std::isfinite(k[j]))
            throw std::invalid_argument("k-grid wavenumbers must be positive");
        if (!(weight[j] >= 0.0) || !std::isfinite(weight[j]))
            throw std::invalid_argument("k-grid weights must be non-negative");
        sum += weight[j];
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("k-grid weights must sum to 1");
}

KGrid uniform_velocity_grid(double v_min_cm_per_s, double v_max_cm_per_s, int n,
                            const AtomSpecies& species)
{
    if (!(v_min_cm_per_s > 0.0) || !(v_max_cm_per_s > v_min_cm_per_s) || n < 2)
        throw std::invalid_argument("velocity grid needs 0 < v_min < v_max and n >= 2");
    KGrid grid;
    grid.k.resize(static_cast<std::size_t>(n));
    grid.weight.assign(static_cast<std::size_t>(n), 1.0 / n);
    for (int j = 0; j < n; ++j) {
        const double v = v_min_cm_per_s + (v_max_cm_per_s - v_min_cm_per_s) * j / (n - 1);
        grid.k[static_cast<std::size_t>(j)] =
            velocity_to_wavenumber(convert::cm_per_s_to_um_per_us(v), species);
    }
    return grid;
}

std::vector<double> absorption_curve(const LaserProfile& profile, const KGrid& grid, unsigned threads)
{
    const auto potential = profile_to_potential(profile);
    std::vector<double> a(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t j) {
        a[j] = solve_one_channel(grid.k[j], potential, profile.species).A;
    });
    return a;
}

double objective_value(const LaserProfile& profile, const KGrid& grid, unsigned threads)
{
    const auto a = absorption_curve(profile, grid, threads);
    double sum = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        sum += a[j] * grid.weight[j];
    return sum;
}

namespace {

struct WeightedGradient
{
    double value = 0.0;
    std::vector<double> d_delta, d_rabi, d_width;
};

// The potential does not depend on k, so dA/dV is summed over the grid
// first and chain-ruled to (Delta, Omega) once.
WeightedGradient weighted_gradient(const LaserProfile& profile, const KGrid& grid, unsigned threads)
{
    const auto potential = profile_to_potential(profile);
    const std::size_t n = profile.segments.size();
    std::vector<GradientRecord> per_k(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t j) {
        per_k[j] = absorption_gradient(grid.k[j], potential, profile.species);
    });

    std::vector<double> d_re(n, 0.0), d_im(n, 0.0);
    WeightedGradient out;
    out.d_width.assign(n, 0.0);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double w = grid.weight[j];
        out.value += w * per_k[j].A;
        for (std::size_t s = 0; s < n; ++s) {
            d_re[s] += w * per_k[j].dA_dReV[s];
            d_im[s] += w * per_k[j].dA_dImV[s];
            out.d_width[s] += w * per_k[j].dA_dWidth[s];
        }
    }
    const double gamma = profile.species.gamma;
    out.d_delta.resize(n);
    out.d_rabi.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        const auto& seg = profile.segments[s];
        const cplx dv_dd = potential_d_detuning(seg.detuning, seg.rabi, gamma);
        const cplx dv_dr = potential_d_rabi(seg.detuning, seg.rabi, gamma);
        out.d_delta[s] = d_re[s] * dv_dd.real() + d_im[s] * dv_dd.imag();
        out.d_rabi[s] = d_re[s] * dv_dr.real() + d_im[s] * dv_dr.imag();
    }
    return out;
}

// Optimization variables in units of gamma (detunings, Rabi frequencies) and
// of the total length (free widths):
// [delta_1, omega_1, ..., delta_n, omega_n] or [delta, omega_1..omega_n],
// followed by n-1 width fractions when widths are free.
class ParameterMap
{
public:
    explicit ParameterMap(const OptimizationProblem& p)
        : problem_(p), n_(static_cast<std::size_t>(p.n_segments)), gamma_(p.species.gamma)
    {
    }

    int dimension() const
    {
        const std::size_t base = problem_.tie_detuning ? 1 + n_ : 2 * n_;
        return static_cast<int>(base + (problem_.free_widths ? n_ - 1 : 0));
    }

    std::size_t detuning_index(std::size_t seg) const { return problem_.tie_detuning ? 0 : 2 * seg; }
    std::size_t rabi_index(std::size_t seg) const { return problem_.tie_detuning ? 1 + seg : 2 * seg + 1; }
    std::size_t width_offset() const { return problem_.tie_detuning ? 1 + n_ : 2 * n_; }
    std::size_t segments() const { return n_; }

    std::vector<double> width_fractions(const VectorXd& x) const
    {
        std::vector<double> frac(n_, 1.0 / static_cast<double>(n_));
        if (problem_.free_widths) {
            double rest = 1.0;
            for (std::size_t s = 0; s + 1 < n_; ++s) {
                frac[s] = x(static_cast<Eigen::Index>(width_offset() + s));
                rest -= frac[s];
            }
            frac[n_ - 1] = rest;
        }
        return frac;
    }

    LaserProfile to_profile(const VectorXd& x) const
    {
        LaserProfile prof;
        prof.species = problem_.species;
        prof.x_start = problem_.x_start;
        const auto frac = width_fractions(x);
        for (std::size_t s = 0; s < n_; ++s) {
            Segment seg;
            seg.width = frac[s] * problem_.total_length;
            seg.detuning = gamma_ * x(static_cast<Eigen::Index>(detuning_index(s)));
            seg.rabi = gamma_ * x(static_cast<Eigen::Index>(rabi_index(s)));
            prof.segments.push_back(seg);
        }
        return prof;
    }

    VectorXd gradient(const WeightedGradient& wg) const
    {
        VectorXd g = VectorXd::Zero(dimension());
        for (std::size_t s = 0; s < n_; ++s) {
            g(static_cast<Eigen::Index>(detuning_index(s))) += gamma_ * wg.d_delta[s];
            g(static_cast<Eigen::Index>(rabi_index(s))) += gamma_ * wg.d_rabi[s];
        }
        if (problem_.free_widths) {
            const double len = problem_.total_length;
            for (std::size_t s = 0; s + 1 < n_; ++s)
                g(static_cast<Eigen::Index>(width_offset() + s)) = len * (wg.d_width[s] - wg.d_width[n_ - 1]);
        }
        return g;
    }

    // c(x) >= 0 and its Jacobian.
    VectorXd constraints(const VectorXd& x, MatrixXd* jac) const
    {
        const double kappa2 = problem_.kappa * problem_.kappa;
        const double eps = problem_.grid.max_energy(problem_.species) / gamma_;
        const auto& b = problem_.bounds;
        const double lo = b.detuning_min / gamma_, hi = b.detuning_max / gamma_;
        const double w_hi = b.rabi_max / gamma_;
        const int dim = dimension();

        std::vector<double> values;
        std::vector<VectorXd> rows;
        auto add = [&](double v, VectorXd row) {
            values.push_back(v);
            rows.push_back(std::move(row));
        };
        auto unit = [&](std::size_t i, double sign) {
            VectorXd r = VectorXd::Zero(dim);
            r(static_cast<Eigen::Index>(i)) = sign;
            return r;
        };

        const std::size_t n_det = problem_.tie_detuning ? 1 : n_;
        for (std::size_t s = 0; s < n_det; ++s) {
            const std::size_t id = detuning_index(s);
            const double d = x(static_cast<Eigen::Index>(id));
            add(d - lo, unit(id, 1.0));
            add(hi - d, unit(id, -1.0));
            // E_max <= kappa |2 Delta + i gamma| / 2, squared
            add(kappa2 * (4.0 * d * d + 1.0) - 4.0 * eps * eps, unit(id, 8.0 * kappa2 * d));
        }
        for (std::size_t s = 0; s < n_; ++s) {
            const std::size_t id = detuning_index(s);
            const std::size_t ir = rabi_index(s);
            const double d = x(static_cast<Eigen::Index>(id));
            const double w = x(static_cast<Eigen::Index>(ir));
            add(w, unit(ir, 1.0));
            add(w_hi - w, unit(ir, -1.0));
            // Omega <= kappa |2 Delta + i gamma|, squared
            VectorXd row = unit(id, 8.0 * kappa2 * d);
            row(static_cast<Eigen::Index>(ir)) = -2.0 * w;
            add(kappa2 * (4.0 * d * d + 1.0) - w * w, row);
        }
        if (problem_.free_widths) {
            const double smin = problem_.min_width_fraction;
            VectorXd last = VectorXd::Zero(dim);
            double rest = 1.0;
            for (std::size_t s = 0; s + 1 < n_; ++s) {
                const std::size_t iw = width_offset() + s;
                add(x(static_cast<Eigen::Index>(iw)) - smin, unit(iw, 1.0));
                rest -= x(static_cast<Eigen::Index>(iw));
                last(static_cast<Eigen::Index>(iw)) = -1.0;
            }
            add(rest - smin, last);
        }

        VectorXd c(static_cast<Eigen::Index>(values.size()));
        for (std::size_t i = 0; i < values.size(); ++i)
            c(static_cast<Eigen::Index>(i)) = values[i];
        if (jac) {
            jac->resize(c.size(), dim);
            for (std::size_t i = 0; i < rows.size(); ++i)
                jac->row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        }
        return c;
    }

    // Smallest |delta| satisfying the energy constraint.
    double min_abs_detuning() const
    {
        const double eps = problem_.grid.max_energy(problem_.species) / gamma_;
        const double ratio = 2.0 * eps / problem_.kappa;
        return ratio > 1.0 ? 0.5 * std::sqrt(ratio * ratio - 1.0) : 0.0;
    }

    double max_rabi(double delta) const
    {
        return std::min(problem_.bounds.rabi_max / gamma_,
                        0.999 * problem_.kappa * std::sqrt(4.0 * delta * delta + 1.0));
    }

private:
    const OptimizationProblem& problem_;
    std::size_t n_;
    double gamma_;
};

VectorXd deterministic_start(const OptimizationProblem& p, const ParameterMap& map)
{
    const double gamma = p.species.gamma;
    const double lo = p.bounds.detuning_min / gamma, hi = p.bounds.detuning_max / gamma;
    const double dmin = map.min_abs_detuning();
    double delta = dmin > 0.0 ? -1.05 * dmin : 0.0;
    if (delta < lo)
        delta = 1.05 * dmin;
    delta = std::clamp(delta, lo, hi);

    // Omega giving single-pass absorption 1 - exp(-2 Im k_local L) = 0.9 at the median k.
    const double k_med = p.grid.median_k();
    const double target = std::log(10.0) / (2.0 * p.total_length);
    auto im_k = [&](double omega) {
        const cplx v = potential_from_laser(delta * gamma, omega * gamma, gamma);
        return local_wavenumber(k_med, v, p.species.mass_over_hbar).imag();
    };
    double w_lo = 0.0, w_hi = map.max_rabi(delta);
    double omega = w_hi;
    if (im_k(w_hi) > target) {
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (w_lo + w_hi);
            (im_k(mid) < target ? w_lo : w_hi) = mid;
        }
        omega = 0.5 * (w_lo + w_hi);
    }

    VectorXd x = VectorXd::Zero(map.dimension());
    for (std::size_t s = 0; s < map.segments(); ++s) {
        x(static_cast<Eigen::Index>(map.detuning_index(s))) = delta;
        x(static_cast<Eigen::Index>(map.rabi_index(s))) = omega;
    }
    if (p.free_widths)
        for (std::size_t s = 0; s + 1 < map.segments(); ++s)
            x(static_cast<Eigen::Index>(map.width_offset() + s)) = 1.0 / static_cast<double>(map.segments());
    return x;
}

VectorXd random_start(const OptimizationProblem& p, const ParameterMap& map, std::mt19937_64& rng)
{
    const double gamma = p.species.gamma;
    const double lo = p.bounds.detuning_min / gamma, hi = p.bounds.detuning_max / gamma;
    const double dmin = map.min_abs_detuning();
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto draw_delta = [&] {
        for (int tries = 0; tries < 10000; ++tries) {
            const double d = lo + (hi - lo) * unit(rng);
            if (std::abs(d) >= dmin * (1.0 + 1e-9))
                return d;
        }
        throw NumericalError("no feasible start: detuning bounds exclude the weak-driving region");
    };

    VectorXd x = VectorXd::Zero(map.dimension());
    const std::size_t n = map.segments();
    double shared = p.tie_detuning ? draw_delta() : 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const double d = p.tie_detuning ? shared : draw_delta();
        x(static_cast<Eigen::Index>(map.detuning_index(s))) = d;
        x(static_cast<Eigen::Index>(map.rabi_index(s))) = map.max_rabi(d) * unit(rng);
    }
    if (p.free_widths) {
        std::vector<double> raw(n);
        double total = 0.0;
        for (auto& r : raw) {
            r = 0.5 + unit(rng);
            total += r;
        }
        const double smin = p.min_width_fraction;
        for (std::size_t s = 0; s + 1 < n; ++s)
            x(static_cast<Eigen::Index>(map.width_offset() + s)) =
                smin + (1.0 - static_cast<double>(n) * smin) * raw[s] / total;
    }
    return x;
}

VectorXd warm_start(const OptimizationProblem& p, const ParameterMap& map, const LaserProfile& coarse)
{
    const double gamma = p.species.gamma;
    const double lo = p.bounds.detuning_min / gamma, hi = p.bounds.detuning_max / gamma;
    const double dmin = map.min_abs_detuning();
    const std::size_t n = map.segments();
    const double len = coarse.total_length();
    if (coarse.segments.empty() || !(len > 0.0))
        throw std::invalid_argument("warm start profile must be non-empty");

    VectorXd x = VectorXd::Zero(map.dimension());
    for (std::size_t s = 0; s < n; ++s) {
        // Coarse segment covering the midpoint of fine segment s (relative position).
        const double mid = (static_cast<double>(s) + 0.5) / static_cast<double>(n) * len;
        double edge = 0.0;
        const Segment* src = &coarse.segments.back();
        for (const auto& cs : coarse.segments) {
            edge += cs.width;
            if (mid < edge) {
                src = &cs;
                break;
            }
        }
        const Segment& tied = p.tie_detuning ? coarse.segments.front() : *src;
        double d = std::clamp(tied.detuning / gamma, lo, hi);
        if (std::abs(d) < dmin)
            d = (d < 0.0 ? -1.0 : 1.0) * dmin * (1.0 + 1e-9);
        x(static_cast<Eigen::Index>(map.detuning_index(s))) = d;
        x(static_cast<Eigen::Index>(map.rabi_index(s))) = std::clamp(src->rabi / gamma, 0.0, map.max_rabi(d));
    }
    if (p.free_widths)
        for (std::size_t s = 0; s + 1 < n; ++s)
            x(static_cast<Eigen::Index>(map.width_offset() + s)) = 1.0 / static_cast<double>(n);
    return x;
}

} // namespace

std::vector<double> objective_gradient(const LaserProfile& profile, const KGrid& grid, unsigned threads)
{
    const auto wg = weighted_gradient(profile, grid, threads);
    std::vector<double> g;
    g.reserve(2 * profile.segments.size());
    for (std::size_t s = 0; s < profile.segments.size(); ++s) {
        g.push_back(wg.d_delta[s]);
        g.push_back(wg.d_rabi[s]);
    }
    return g;
}

ParameterBounds ParameterBounds::defaults(const AtomSpecies& species)
{
    return {-30.0 * species.gamma, 30.0 * species.gamma, 12.0 * species.gamma};
}

void OptimizationProblem::validate() const
{
    species.validate();
    grid.validate();
    if (n_segments < 1)
        throw std::invalid_argument("n_segments must be >= 1");
    if (!(total_length > 0.0))
        throw std::invalid_argument("total_length must be positive");
    if (!(kappa > 0.0 && kappa < 1.0))
        throw std::invalid_argument("kappa must lie in (0, 1)");
    if (!(bounds.detuning_max > bounds.detuning_min) || !(bounds.rabi_max > 0.0))
        throw std::invalid_argument("invalid parameter bounds");
    if (multistart < 0)
        throw std::invalid_argument("multistart must be >= 0");
    if (free_widths && !(min_width_fraction > 0.0 && min_width_fraction * n_segments < 1.0))
        throw std::invalid_argument("min_width_fraction incompatible with n_segments");
}

OptimizationResult optimize(const OptimizationProblem& problem)
{
    problem.validate();
    const ParameterMap map(problem);

    sqp::Problem nlp;
    nlp.dimension = map.dimension();
    nlp.objective = [&](const VectorXd& x, VectorXd* grad) {
        const auto prof = map.to_profile(x);
        if (!grad)
            return -objective_value(prof, problem.grid);
        const auto wg = weighted_gradient(prof, problem.grid, 1);
        *grad = -map.gradient(wg);
        return -wg.value;
    };
    nlp.constraints = [&](const VectorXd& x, MatrixXd* jac) { return map.constraints(x, jac); };

    // Starts: deterministic, warm, then seeded random, all drawn up front.
    std::vector<VectorXd> starts;
    std::vector<RestartSummary::Origin> origins;
    starts.push_back(deterministic_start(problem, map));
    origins.push_back(RestartSummary::Origin::deterministic);
    for (const auto& w : problem.warm_starts) {
        starts.push_back(warm_start(problem, map, w));
        origins.push_back(RestartSummary::Origin::warm);
    }
    std::mt19937_64 rng(problem.seed);
    for (int r = 0; r < problem.multistart; ++r) {
        starts.push_back(random_start(problem, map, rng));
        origins.push_back(RestartSummary::Origin::random);
    }

    std::vector<sqp::Result> runs(starts.size());
    parallel_for(starts.size(), problem.threads, [&](std::size_t i) {
        const VectorXd c0 = map.constraints(starts[i], nullptr);
        if (c0.size() > 0 && c0.minCoeff() < -kFeasibilityTolerance) {
            runs[i].x = starts[i];
            runs[i].message = "infeasible start";
            runs[i].max_violation = -c0.minCoeff();
            runs[i].objective = -objective_value(map.to_profile(starts[i]), problem.grid);
            return;
        }
        runs[i] = sqp::minimize(nlp, starts[i]);
    });

    OptimizationResult result;
    int best = -1;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        RestartSummary rs;
        rs.index = static_cast<int>(i);
        rs.origin = origins[i];
        rs.objective = -runs[i].objective;
        rs.iterations = runs[i].iterations;
        rs.kkt_residual = runs[i].kkt_residual;
        rs.max_violation = runs[i].max_violation;
        rs.accepted = runs[i].x.size() > 0 && runs[i].message != "infeasible start" &&
                      runs[i].kkt_residual < kKktTolerance && runs[i].max_violation < kFeasibilityTolerance;
        if (rs.accepted && (best < 0 || rs.objective > result.restarts[static_cast<std::size_t>(best)].objective))
            best = static_cast<int>(i);
        result.restarts.push_back(rs);
    }
    if (best < 0) {
        std::string why = "all restarts failed to converge:";
        for (std::size_t i = 0; i < runs.size(); ++i)
            why += " [" + std::to_string(i) + ": " + runs[i].message + ", kkt=" +
                   std::to_string(runs[i].kkt_residual) + "]";
        throw NumericalError(why);
    }

    const auto& run = runs[static_cast<std::size_t>(best)];
    result.profile = map.to_profile(run.x);
    result.per_k_absorption = absorption_curve(result.profile, problem.grid, problem.threads);
    result.objective = objective_value(result.profile, problem.grid, problem.threads);
    result.iterations = run.iterations;
    result.converged = true;
    result.kkt_residual = run.kkt_residual;
    result.max_violation = run.max_violation;
    result.e_max = problem.grid.max_energy(problem.species);
    for (const auto& s : result.profile.segments)
        result.ratios.push_back(weak_driving_ratio(s, result.e_max, problem.species));
    return result;
}

} // namespace atomdetect
