#include "atomdetect/twochannel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "atomdetect/errors.hpp"
#include "atomdetect/ode_oracle.hpp"
#include "atomdetect/parallel.hpp"
#include "atomdetect/scatter.hpp"

namespace atomdetect {

using Eigen::Matrix2cd;
using Eigen::Matrix4cd;
using Eigen::Vector2cd;

namespace {

constexpr cplx kI{0.0, 1.0};

cplx principal_root(cplx u)
{
    cplx root = std::sqrt(u);
    if (root.imag() < 0.0)
        root = -root;
    return root;
}

// Segment potential matrix (hbar = 1): [[0, Omega/2], [Omega/2, -(2 Delta + i gamma)/2]].
Matrix2cd coupling_matrix(const Segment& s, double gamma)
{
    Matrix2cd w;
    w << 0.0, 0.5 * s.rabi, 0.5 * s.rabi, -0.5 * cplx{2.0 * s.detuning, gamma};
    return w;
}

cplx excited_wavenumber(double energy, double detuning, const AtomSpecies& sp)
{
    return principal_root(2.0 * sp.mass_over_hbar * cplx{energy + detuning, 0.5 * sp.gamma});
}

// Local modes Psi = U (e^{i kappa x} a + e^{-i kappa x} b) of one region.
struct Region
{
    Matrix2cd modes = Matrix2cd::Identity();
    Vector2cd kappa;
    double width = 0.0;
};

struct ModeDecomposition
{
    Matrix2cd vectors;
    Vector2cd values;
    double condition = 1.0;
};

// Closed-form eigen-decomposition of a complex symmetric 2x2 matrix.
ModeDecomposition decompose(const Matrix2cd& m)
{
    const cplx a = m(0, 0), b = m(0, 1), d = m(1, 1);
    const cplx mean = 0.5 * (a + d);
    const cplx half = 0.5 * (a - d);
    const cplx s = std::sqrt(half * half + b * b);

    ModeDecomposition out;
    out.values << mean + s, mean - s;
    for (int i = 0; i < 2; ++i) {
        const cplx lambda = out.values(i);
        Vector2cd v1(b, lambda - a);
        Vector2cd v2(lambda - d, b);
        Vector2cd v = v1.norm() >= v2.norm() ? v1 : v2;
        if (v.norm() == 0.0)
            v = (i == 0) ? Vector2cd(1.0, 0.0) : Vector2cd(0.0, 1.0);
        out.vectors.col(i) = v.normalized();
    }
    const auto sv = Eigen::JacobiSVD<Matrix2cd>(out.vectors).singularValues();
    out.condition = sv(1) > 0.0 ? sv(0) / sv(1) : std::numeric_limits<double>::infinity();
    return out;
}

struct SMatrix
{
    Matrix2cd s11 = Matrix2cd::Zero();
    Matrix2cd s12 = Matrix2cd::Identity();
    Matrix2cd s21 = Matrix2cd::Identity();
    Matrix2cd s22 = Matrix2cd::Zero();
};

// Redheffer star product: `left` followed by `right`.
SMatrix star(const SMatrix& left, const SMatrix& right)
{
    const Matrix2cd id = Matrix2cd::Identity();
    const Matrix2cd f1 = (id - right.s11 * left.s22).inverse();
    const Matrix2cd f2 = (id - left.s22 * right.s11).inverse();
    SMatrix out;
    out.s11 = left.s11 + left.s12 * f1 * right.s11 * left.s21;
    out.s12 = left.s12 * f1 * right.s12;
    out.s21 = right.s21 * f2 * left.s21;
    out.s22 = right.s22 + right.s21 * f2 * left.s22 * right.s12;
    return out;
}

Matrix4cd field_map(const Region& r)
{
    const Matrix2cd uk = r.modes * r.kappa.asDiagonal();
    Matrix4cd g;
    g << r.modes, r.modes, uk, -uk;
    return g;
}

// Matching of Psi and Psi' at an interface; amplitudes evaluated there.
SMatrix interface_smatrix(const Region& left, const Region& right)
{
    const Matrix4cd gl = field_map(left);
    const Matrix4cd gr = field_map(right);
    Matrix4cd lhs, rhs;
    lhs << gl.rightCols(2), -gr.leftCols(2);
    rhs << -gl.leftCols(2), gr.rightCols(2);
    const Matrix4cd x = lhs.fullPivLu().solve(rhs);
    SMatrix s;
    s.s11 = x.topLeftCorner<2, 2>();
    s.s12 = x.topRightCorner<2, 2>();
    s.s21 = x.bottomLeftCorner<2, 2>();
    s.s22 = x.bottomRightCorner<2, 2>();
    return s;
}

Matrix2cd propagator(const Region& r)
{
    return (kI * r.kappa * r.width).array().exp().matrix().asDiagonal();
}

SMatrix propagation_smatrix(const Region& r)
{
    SMatrix s;
    s.s11.setZero();
    s.s22.setZero();
    s.s12 = propagator(r);
    s.s21 = s.s12;
    return s;
}

struct Layout
{
    std::vector<Region> regions;   // left exterior, segments..., right exterior
    bool defective = false;
};

Layout build_layout(double k, const LaserProfile& profile)
{
    if (!(k > 0.0) || !std::isfinite(k))
        throw std::invalid_argument("incident wavenumber must be positive");
    const auto& sp = profile.species;
    if (!(sp.gamma > 0.0))
        throw std::invalid_argument("two-channel solver requires gamma > 0");
    const double energy = kinetic_energy(k, sp);
    const double two_m = 2.0 * sp.mass_over_hbar;
    const auto& segs = profile.segments;
    const double d_first = segs.empty() ? 0.0 : segs.front().detuning;
    const double d_last = segs.empty() ? 0.0 : segs.back().detuning;

    Layout lay;
    Region left;
    left.kappa << k, excited_wavenumber(energy, d_first, sp);
    lay.regions.push_back(left);
    for (const auto& s : segs) {
        const Matrix2cd k2 = two_m * (energy * Matrix2cd::Identity() - coupling_matrix(s, sp.gamma));
        const auto dec = decompose(k2);
        if (!(dec.condition <= kDefectiveCondition))
            lay.defective = true;
        Region r;
        r.modes = dec.vectors;
        r.kappa << principal_root(dec.values(0)), principal_root(dec.values(1));
        r.width = s.width;
        lay.regions.push_back(r);
    }
    Region right;
    right.kappa << k, excited_wavenumber(energy, d_last, sp);
    lay.regions.push_back(right);
    return lay;
}

TwoChannelAmplitudes assemble(double k, const LaserProfile& profile, const Layout& lay,
                              const Vector2cd& rho, const Vector2cd& tau)
{
    const double xs = profile.x_start;
    const double xe = profile.x_end();
    const cplx phase = std::exp(kI * k * xs);
    TwoChannelAmplitudes out;
    out.k = k;
    out.q = lay.regions.front().kappa(1);
    out.q_right = lay.regions.back().kappa(1);
    out.R1 = rho(0) * phase * phase;
    out.R2 = rho(1) * phase;
    out.T1 = tau(0) * std::exp(kI * k * (xs - xe));
    out.T2 = tau(1) * phase;
    out.A = 1.0 - std::norm(out.R1) - std::norm(out.T1);
    return out;
}

} // namespace

TwoChannelAmplitudes solve_two_channel_oracle(double k, const LaserProfile& profile)
{
    const auto lay = build_layout(k, profile);
    const auto& sp = profile.species;
    const double energy = kinetic_energy(k, sp);
    const double two_m = 2.0 * sp.mass_over_hbar;

    ode::CoupledChannelProblem problem;
    problem.channels = 2;
    problem.x_start = profile.x_start;
    for (const auto& s : profile.segments) {
        problem.widths.push_back(s.width);
        problem.coupling.emplace_back(two_m * (coupling_matrix(s, sp.gamma) - energy * Matrix2cd::Identity()));
    }
    problem.kappa_left = lay.regions.front().kappa;
    problem.kappa_right = lay.regions.back().kappa;

    const auto sol = ode::integrate_scattering(problem);
    return assemble(k, profile, lay, sol.reflection, sol.transmission);
}

TwoChannelAmplitudes solve_two_channel(double k, const LaserProfile& profile)
{
    const auto lay = build_layout(k, profile);
    if (lay.defective) {
        auto out = solve_two_channel_oracle(k, profile);
        out.used_fallback = true;
        return out;
    }
    const auto& reg = lay.regions;
    SMatrix total = interface_smatrix(reg[0], reg[1]);
    for (std::size_t r = 1; r + 1 < reg.size(); ++r) {
        total = star(total, propagation_smatrix(reg[r]));
        total = star(total, interface_smatrix(reg[r], reg[r + 1]));
    }
    const Vector2cd incident(1.0, 0.0);
    return assemble(k, profile, lay, total.s11 * incident, total.s21 * incident);
}

std::vector<Vector2cd> two_channel_wavefunction(double k, const LaserProfile& profile,
                                                std::span<const double> xs)
{
    const auto lay = build_layout(k, profile);
    if (lay.defective)
        throw NumericalError("two-channel wavefunction: near-defective segment matrix");
    const auto& reg = lay.regions;
    const std::size_t nr = reg.size();
    const std::size_t n = nr - 2;

    // prefix[r]: left exterior up to the amplitudes at the left edge of region r.
    // suffix[r]: from the right edge of region r to the right exterior.
    std::vector<SMatrix> prefix(nr), suffix(nr);
    prefix[1] = interface_smatrix(reg[0], reg[1]);
    for (std::size_t r = 2; r < nr; ++r)
        prefix[r] = star(star(prefix[r - 1], propagation_smatrix(reg[r - 1])),
                         interface_smatrix(reg[r - 1], reg[r]));
    suffix[nr - 2] = interface_smatrix(reg[nr - 2], reg[nr - 1]);
    for (std::size_t r = nr - 2; r-- > 1;)
        suffix[r] = star(star(interface_smatrix(reg[r], reg[r + 1]), propagation_smatrix(reg[r + 1])),
                         suffix[r + 1]);

    const Vector2cd incident(1.0, 0.0);
    const Matrix2cd id = Matrix2cd::Identity();

    // Mode amplitudes: a at the left edge, b at the right edge of each segment.
    std::vector<Vector2cd> a_left(nr), b_right(nr);
    for (std::size_t r = 1; r <= n; ++r) {
        const Matrix2cd p = propagator(reg[r]);
        const auto& L = prefix[r];
        const auto& R = suffix[r];
        a_left[r] = (id - L.s22 * p * R.s11 * p).partialPivLu().solve(L.s21 * incident);
        b_right[r] = R.s11 * p * a_left[r];
    }
    const Vector2cd rho = prefix[nr - 1].s11 * incident;
    const Vector2cd tau = prefix[nr - 1].s21 * incident;

    const double x0 = profile.x_start;
    std::vector<double> right_edge(n);
    double edge = x0;
    for (std::size_t j = 0; j < n; ++j) {
        edge += profile.segments[j].width;
        right_edge[j] = edge;
    }
    const double x_end = edge;
    const cplx phase = std::exp(kI * k * x0);

    std::vector<Vector2cd> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double x = xs[i];
        Vector2cd psi;
        if (x <= x0 || n == 0) {
            const auto& kl = reg.front().kappa;
            const double dx = x - x0;
            psi = rho.cwiseProduct((-kI * kl * dx).array().exp().matrix());
            psi(0) += std::exp(kI * k * dx);
            if (n == 0 && x > x0)
                psi = tau.cwiseProduct((kI * reg.back().kappa * dx).array().exp().matrix());
        } else if (x >= x_end) {
            const auto& kr = reg.back().kappa;
            psi = tau.cwiseProduct((kI * kr * (x - x_end)).array().exp().matrix());
        } else {
            const auto it = std::lower_bound(right_edge.begin(), right_edge.end(), x);
            const std::size_t j = static_cast<std::size_t>(it - right_edge.begin());
            const Region& r = reg[j + 1];
            const double from_left = x - (right_edge[j] - r.width);
            const double to_right = right_edge[j] - x;
            const Vector2cd fwd = (kI * r.kappa * from_left).array().exp().matrix();
            const Vector2cd bwd = (kI * r.kappa * to_right).array().exp().matrix();
            psi = r.modes * (fwd.cwiseProduct(a_left[j + 1]) + bwd.cwiseProduct(b_right[j + 1]));
        }
        out[i] = psi * phase;
    }
    return out;
}

ChannelComparison compare_channels(std::span<const double> k_grid, const LaserProfile& profile,
                                   double kappa, unsigned threads)
{
    const auto potential = profile_to_potential(profile);
    ChannelComparison out;
    out.rows.resize(k_grid.size());
    parallel_for(k_grid.size(), threads, [&](std::size_t i) {
        const double k = k_grid[i];
        auto& row = out.rows[i];
        row.k = k;
        row.a_one_channel = solve_one_channel(k, potential, profile.species).A;
        row.a_two_channel = solve_two_channel(k, profile).A;
        row.abs_diff = std::abs(row.a_one_channel - row.a_two_channel);
    });
    double e_max = 0.0;
    for (const auto& row : out.rows) {
        out.max_abs_diff = std::max(out.max_abs_diff, row.abs_diff);
        e_max = std::max(e_max, kinetic_energy(row.k, profile.species));
    }
    for (const auto& s : profile.segments) {
        const auto ratios = weak_driving_ratio(s, e_max, profile.species);
        out.max_r_omega = std::max(out.max_r_omega, ratios.r_omega);
        out.max_r_energy = std::max(out.max_r_energy, ratios.r_energy);
    }
    out.weak_driving_valid = out.max_r_omega <= kappa && out.max_r_energy <= kappa;
    return out;
}

} // namespace atomdetect
