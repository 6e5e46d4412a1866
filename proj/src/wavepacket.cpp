#include "atomdetect/wavepacket.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "atomdetect/errors.hpp"
#include "atomdetect/parallel.hpp"
#include "atomdetect/scatter.hpp"
#include "atomdetect/twochannel.hpp"

namespace atomdetect {

namespace {

constexpr double kNegativeWeightLimit = 1e-8;
constexpr double kTruncationTolerance = 1e-8;
constexpr double kBoxTolerance = 1e-6;
constexpr double kGridSpread = 6.5;       // k-grid half width in units of the spread
constexpr std::size_t kMaxGridPoints = 4'000'000;
constexpr std::size_t kChunk = 2048;

double gaussian_weight_between(double a, double b, double k0, double spread)
{
    const double s = std::sqrt(2.0) * spread;
    return 0.5 * (std::erf((b - k0) / s) - std::erf((a - k0) / s));
}

// Largest local wavenumber modulus inside the laser for wavenumbers up to k_max.
double max_inner_wavenumber(const LaserProfile& profile, double k_max, ChannelMode mode)
{
    const auto& sp = profile.species;
    const double e = kinetic_energy(k_max, sp);
    double kappa = k_max;
    for (const auto& seg : profile.segments) {
        double bound;
        if (mode == ChannelMode::one_channel) {
            bound = std::abs(local_wavenumber(k_max, potential_from_laser(seg, sp), sp.mass_over_hbar));
        } else {
            // Frobenius bound on the eigenvalues of the segment coupling matrix.
            const double w = std::sqrt(0.5 * seg.rabi * seg.rabi + std::norm(cplx(seg.detuning, 0.5 * sp.gamma)));
            bound = std::sqrt(2.0 * sp.mass_over_hbar * (e + w));
        }
        kappa = std::max(kappa, bound);
    }
    return kappa;
}

// Smallest decay constant of the exterior excited channel over [k_lo, k_hi].
double min_exterior_decay(const LaserProfile& profile, double k_lo, double k_hi)
{
    const auto& sp = profile.species;
    double decay = std::numeric_limits<double>::infinity();
    for (const Segment* seg : {&profile.segments.front(), &profile.segments.back()})
        for (double k : {k_lo, k_hi}) {
            const cplx q = std::sqrt(cplx(2.0 * sp.mass_over_hbar * (kinetic_energy(k, sp) + seg->detuning),
                                          sp.mass_over_hbar * sp.gamma));
            decay = std::min(decay, q.imag());
        }
    return decay;
}

struct SpatialGrid
{
    std::vector<double> x;
    std::vector<double> w;   // trapezoid weights
};

// Uniform pieces joined at the breakpoints, each with spacing <= its limit.
SpatialGrid build_grid(const std::vector<double>& breaks, const std::vector<double>& spacing)
{
    SpatialGrid g;
    g.x.push_back(breaks.front());
    g.w.push_back(0.0);
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const double len = breaks[p + 1] - breaks[p];
        if (len <= 0.0)
            continue;
        const auto n = static_cast<std::size_t>(std::ceil(len / spacing[p]));
        if (g.x.size() + n > kMaxGridPoints)
            throw NumericalError("wavepacket spatial grid exceeds " + std::to_string(kMaxGridPoints) +
                                 " points; reduce the time horizon or packet spread");
        const double h = len / static_cast<double>(n);
        for (std::size_t i = 1; i <= n; ++i) {
            g.w.back() += 0.5 * h;
            g.x.push_back(i == n ? breaks[p + 1] : breaks[p] + h * static_cast<double>(i));
            g.w.push_back(0.5 * h);
        }
    }
    return g;
}

} // namespace

void WavepacketSpec::validate(const AtomSpecies& species) const
{
    if (!(sigma_x > 0.0) || !std::isfinite(sigma_x))
        throw std::invalid_argument("wavepacket sigma_x must be positive");
    if (!(v_mean > 0.0) || !std::isfinite(v_mean))
        throw std::invalid_argument("wavepacket v_mean must be positive");
    if (!std::isfinite(x0))
        throw std::invalid_argument("wavepacket x0 must be finite");
    const double k0 = mean_wavenumber(species);
    const double negative = 0.5 * std::erfc(std::sqrt(2.0) * sigma_x * k0);
    if (negative > kNegativeWeightLimit)
        throw std::invalid_argument("wavepacket has momentum weight " + std::to_string(negative) +
                                    " at k <= 0; increase sigma_x or v_mean");
}

double WavepacketSpec::mean_wavenumber(const AtomSpecies& species) const
{
    return velocity_to_wavenumber(convert::cm_per_s_to_um_per_us(v_mean), species);
}

cplx WavepacketSpec::amplitude(double k, const AtomSpecies& species) const
{
    const double dk = k - mean_wavenumber(species);
    const double norm = std::pow(2.0 * sigma_x * sigma_x / kPi, 0.25);
    return norm * std::exp(-sigma_x * sigma_x * dk * dk) * std::exp(cplx(0.0, -k * x0));
}

double suggested_horizon(const WavepacketSpec& spec, const LaserProfile& profile)
{
    const auto& sp = profile.species;
    const double k_slow = spec.mean_wavenumber(sp) - 4.0 * spec.wavenumber_spread();
    if (!(k_slow > 0.0))
        throw std::invalid_argument("wavepacket too broad in k for a finite horizon");
    const double v_slow = k_slow / sp.mass_over_hbar;
    return (profile.x_end() - spec.x0 + 6.0 * spec.sigma_x) / v_slow;
}

double expected_detection(const WavepacketSpec& spec, const LaserProfile& profile, ChannelMode mode,
                          int intervals)
{
    spec.validate(profile.species);
    profile.validate();
    if (intervals < 2 || intervals % 2)
        throw std::invalid_argument("Simpson quadrature needs an even number of intervals");
    const auto& sp = profile.species;
    const double k0 = spec.mean_wavenumber(sp), spread = spec.wavenumber_spread();
    const double lo = std::max(k0 - 8.0 * spread, 1e-6 * k0), hi = k0 + 8.0 * spread;
    const double h = (hi - lo) / intervals;
    const auto potential = profile_to_potential(profile);
    double sum = 0.0;
    for (int i = 0; i <= intervals; ++i) {
        const double k = lo + h * i;
        const double a = mode == ChannelMode::one_channel ? solve_one_channel(k, potential, sp).A
                                                          : solve_two_channel(k, profile).A;
        const double c = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        sum += c * std::norm(spec.amplitude(k, sp)) * a;
    }
    return sum * h / 3.0;
}

std::vector<DetectionRecord> propagate(const WavepacketSpec& spec, const LaserProfile& profile,
                                       std::span<const double> times, ChannelMode mode,
                                       unsigned threads, PropagationDiagnostics* diagnostics)
{
    const auto& sp = profile.species;
    spec.validate(sp);
    profile.validate();
    if (profile.segments.empty())
        throw std::invalid_argument("propagation needs a non-empty laser profile");
    if (spec.x0 > profile.x_start - 5.0 * spec.sigma_x)
        throw std::invalid_argument("wavepacket must start at least 5 sigma_x left of the laser");
    if (times.empty())
        return {};
    for (double t : times)
        if (!(t >= 0.0) || !std::isfinite(t))
            throw std::invalid_argument("propagation times must be finite and >= 0");
    const double t_max = *std::max_element(times.begin(), times.end());

    // k-grid: k0 +- 6.5 spread, clipped to k > 0.
    const double k0 = spec.mean_wavenumber(sp), spread = spec.wavenumber_spread();
    const double k_lo = std::max(k0 - kGridSpread * spread, 1e-3 * k0);
    const double k_hi = k0 + kGridSpread * spread;
    const double truncation = 1.0 - gaussian_weight_between(k_lo, k_hi, k0, spread);
    if (truncation > kTruncationTolerance)
        throw NumericalError("k-grid truncation residual " + std::to_string(truncation) + " exceeds tolerance");

    // Box and spatial grid.
    const double v_max = k_hi / sp.mass_over_hbar;
    const double box_lo = spec.x0 - 8.0 * spec.sigma_x - v_max * t_max;
    const double box_hi = profile.x_end() + 8.0 * spec.sigma_x + v_max * t_max;
    const double dx_outer = (2.0 * kPi / k_hi) / 16.0;
    const double dx_inner = std::min(dx_outer, (2.0 * kPi / max_inner_wavenumber(profile, k_hi, mode)) / 16.0);
    double margin = 4.0 * dx_outer;
    if (mode == ChannelMode::two_channel)
        margin = std::max(margin, 40.0 / min_exterior_decay(profile, k_lo, k_hi));
    const double in_lo = std::max(box_lo, profile.x_start - margin);
    const double in_hi = std::min(box_hi, profile.x_end() + margin);
    const SpatialGrid grid = build_grid({box_lo, in_lo, in_hi, box_hi}, {dx_outer, dx_inner, dx_outer});

    // Replicas of the periodic k-quadrature sit 2 box lengths away.
    const double box_len = box_hi - box_lo;
    const auto nk = static_cast<std::size_t>(std::ceil((k_hi - k_lo) / (kPi / box_len))) + 1;
    const double dk = (k_hi - k_lo) / static_cast<double>(nk - 1);
    std::vector<double> ks(nk);
    for (std::size_t j = 0; j < nk; ++j)
        ks[j] = k_lo + dk * static_cast<double>(j);

    // Columns: t - h, t, t + h for each requested time.
    const double tau = spec.sigma_x / convert::cm_per_s_to_um_per_us(spec.v_mean);
    const double h = 1e-4 * tau;
    const auto nt = times.size();
    Eigen::MatrixXcd coeff(static_cast<Eigen::Index>(nk), static_cast<Eigen::Index>(3 * nt));
    for (std::size_t j = 0; j < nk; ++j) {
        const double wk = (j == 0 || j + 1 == nk) ? 0.5 * dk : dk;
        const cplx base = wk * spec.amplitude(ks[j], sp) / std::sqrt(2.0 * kPi);
        const double e = kinetic_energy(ks[j], sp);
        for (std::size_t i = 0; i < nt; ++i)
            for (int s = -1; s <= 1; ++s) {
                const double t = times[i] + s * h;
                coeff(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(3 * i + (s + 1))) =
                    base * std::exp(cplx(0.0, -e * t));
            }
    }

    const auto potential = profile_to_potential(profile);
    const std::size_t n_chunks = (grid.x.size() + kChunk - 1) / kChunk;
    const auto ncol = static_cast<Eigen::Index>(3 * nt);
    std::vector<Eigen::VectorXd> norm1(n_chunks), norm2(n_chunks), edge(n_chunks);

    parallel_for(n_chunks, threads, [&](std::size_t c) {
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(grid.x.size(), begin + kChunk);
        const auto rows = static_cast<Eigen::Index>(end - begin);
        const std::span<const double> xs(grid.x.data() + begin, end - begin);
        Eigen::MatrixXcd phi1(rows, static_cast<Eigen::Index>(nk));
        Eigen::MatrixXcd phi2;
        if (mode == ChannelMode::two_channel)
            phi2.resize(rows, static_cast<Eigen::Index>(nk));
        for (std::size_t j = 0; j < nk; ++j) {
            const auto col = static_cast<Eigen::Index>(j);
            if (mode == ChannelMode::one_channel) {
                const auto psi = one_channel_wavefunction(ks[j], potential, sp, xs);
                for (Eigen::Index r = 0; r < rows; ++r)
                    phi1(r, col) = psi[static_cast<std::size_t>(r)];
            } else {
                const auto psi = two_channel_wavefunction(ks[j], profile, xs);
                for (Eigen::Index r = 0; r < rows; ++r) {
                    phi1(r, col) = psi[static_cast<std::size_t>(r)](0);
                    phi2(r, col) = psi[static_cast<std::size_t>(r)](1);
                }
            }
        }
        Eigen::Map<const Eigen::VectorXd> weights(grid.w.data() + begin, rows);
        const Eigen::MatrixXcd field1 = phi1 * coeff;
        norm1[c] = field1.cwiseAbs2().transpose() * weights;
        edge[c] = Eigen::VectorXd::Zero(ncol);
        if (begin == 0)
            edge[c] += field1.row(0).cwiseAbs2().transpose();
        if (end == grid.x.size())
            edge[c] += field1.row(rows - 1).cwiseAbs2().transpose();
        if (mode == ChannelMode::two_channel) {
            const Eigen::MatrixXcd field2 = phi2 * coeff;
            norm2[c] = field2.cwiseAbs2().transpose() * weights;
        } else {
            norm2[c] = Eigen::VectorXd::Zero(ncol);
        }
    });

    Eigen::VectorXd n1 = Eigen::VectorXd::Zero(ncol), n2 = Eigen::VectorXd::Zero(ncol);
    Eigen::VectorXd edges = Eigen::VectorXd::Zero(ncol);
    for (std::size_t c = 0; c < n_chunks; ++c) {
        n1 += norm1[c];
        n2 += norm2[c];
        edges += edge[c];
    }
    const double box_residual = spec.sigma_x * edges.maxCoeff();

    if (diagnostics) {
        diagnostics->k_points = nk;
        diagnostics->x_points = grid.x.size();
        diagnostics->box_lo = box_lo;
        diagnostics->box_hi = box_hi;
        diagnostics->k_truncation_residual = truncation;
        diagnostics->box_residual = box_residual;
    }
    if (box_residual > kBoxTolerance)
        throw NumericalError("wavepacket reaches the box edge (residual " + std::to_string(box_residual) + ")");

    std::vector<DetectionRecord> out(nt);
    for (std::size_t i = 0; i < nt; ++i) {
        const auto col = [&](int s) { return static_cast<Eigen::Index>(3 * i + (s + 1)); };
        auto& r = out[i];
        r.t = times[i];
        r.N_t = n1(col(0)) + n2(col(0));
        r.P2_t = n2(col(0));
        r.minus_dN_dt = ((n1(col(-1)) + n2(col(-1))) - (n1(col(1)) + n2(col(1)))) / (2.0 * h);
        r.Pi_t = mode == ChannelMode::two_channel ? sp.gamma * r.P2_t : r.minus_dN_dt;
    }
    return out;
}

} // namespace atomdetect
