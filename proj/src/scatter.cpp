#include "atomdetect/scatter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

#include "atomdetect/errors.hpp"
#include "atomdetect/ode_oracle.hpp"

namespace atomdetect {

using Eigen::Matrix2cd;
using Eigen::Vector2cd;

namespace {

constexpr cplx kI{0.0, 1.0};

void require_positive_k(double k)
{
    if (!(k > 0.0) || !std::isfinite(k))
        throw std::invalid_argument("incident wavenumber must be positive");
}

// Entries of the scaled (psi, psi') propagator as functions of u = k_local^2,
// together with their u- and width-derivatives.
struct SegmentFactors
{
    cplx u;
    double log_scale = 0.0;
    cplx c, s;      // cos(kw) e^{-bw}, sin(kw)/k e^{-bw}
    cplx dc, ds;    // d/du of the above (scale held fixed)

    Matrix2cd matrix() const
    {
        Matrix2cd m;
        m << c, s, -u * s, c;
        return m;
    }
    Matrix2cd inverse() const
    {
        Matrix2cd m;
        m << c, -s, u * s, c;
        return m;
    }
    Matrix2cd d_du() const
    {
        Matrix2cd m;
        m << dc, ds, -s - u * ds, dc;
        return m;
    }
    Matrix2cd d_width() const
    {
        Matrix2cd m;
        m << -u * s, c, -u * c, -u * s;
        return m;
    }
};

cplx principal_root(cplx u)
{
    cplx root = std::sqrt(u);
    if (root.imag() < 0.0)
        root = -root;
    return root;
}

SegmentFactors segment_factors(cplx kl, double width)
{
    SegmentFactors f;
    f.u = kl * kl;
    const double b = kl.imag();
    f.log_scale = b * width;
    const cplx z = kl * width;

    if (std::abs(z) < 1.0) {
        // Taylor series in x = -u w^2; removes the 0/0 of sin(kw)/k at k -> 0.
        const cplx x = -f.u * width * width;
        cplx c = 0.0, sw = 0.0, dsw = 0.0;
        cplx xn = 1.0;
        double fact_even = 1.0;   // (2n)!
        double fact_odd = 1.0;    // (2n+1)!
        double fact_odd3 = 6.0;   // (2n+3)!
        for (int n = 0; n < 20; ++n) {
            c += xn / fact_even;
            sw += xn / fact_odd;
            dsw += static_cast<double>(n + 1) * xn / fact_odd3;
            xn *= x;
            fact_even *= (2.0 * n + 1.0) * (2.0 * n + 2.0);
            fact_odd *= (2.0 * n + 2.0) * (2.0 * n + 3.0);
            fact_odd3 *= (2.0 * n + 4.0) * (2.0 * n + 5.0);
        }
        const double scale = std::exp(-f.log_scale);
        f.c = c * scale;
        f.s = width * sw * scale;
        f.dc = -0.5 * width * f.s;
        f.ds = -width * width * width * dsw * scale;
        return f;
    }

    const double a = kl.real();
    const cplx e1 = std::exp(cplx{-2.0 * b * width, a * width});
    const cplx e2 = std::exp(cplx{0.0, -a * width});
    f.c = 0.5 * (e1 + e2);
    f.s = (e1 - e2) / (2.0 * kI * kl);
    f.dc = -0.5 * width * f.s;
    f.ds = (width * f.c - f.s) / (2.0 * f.u);
    return f;
}

// Linear forms of the full product used in the amplitude formulas:
// den = k^2 P12 - P21 + ik (P11 + P22), num = ik (P11 - P22) - k^2 P12 - P21,
// r = -num/den and t = 2ik det(P) / den.
cplx denominator(const Matrix2cd& p, double k)
{
    return k * k * p(0, 1) - p(1, 0) + kI * k * (p(0, 0) + p(1, 1));
}

cplx numerator(const Matrix2cd& p, double k)
{
    return kI * k * (p(0, 0) - p(1, 1)) - k * k * p(0, 1) - p(1, 0);
}

struct ProductState
{
    std::vector<SegmentFactors> factors;
    Matrix2cd product = Matrix2cd::Identity();
    double log_scale = 0.0;
    cplx den;
    cplx r;         // local reflection, referenced at x_start
    cplx t_scaled;  // local transmission = t_scaled * exp(-log_scale)
};

ProductState build_product(double k, const ComplexPotentialProfile& potential,
                           const AtomSpecies& species)
{
    require_positive_k(k);
    ProductState st;
    st.factors.reserve(potential.segments.size());
    for (const auto& seg : potential.segments) {
        if (!(seg.width >= 0.0))
            throw std::invalid_argument("segment width must be non-negative");
        const cplx kl = local_wavenumber(k, seg.value, species.mass_over_hbar);
        st.factors.push_back(segment_factors(kl, seg.width));
        st.product = st.factors.back().matrix() * st.product;
        st.log_scale += st.factors.back().log_scale;
    }
    st.den = denominator(st.product, k);
    if (st.den == 0.0 || !std::isfinite(std::abs(st.den)))
        throw NumericalError("singular transfer product");
    st.r = -numerator(st.product, k) / st.den;
    st.t_scaled = 2.0 * kI * k / st.den;
    return st;
}

} // namespace

cplx local_wavenumber(double k, cplx potential, double mass_over_hbar)
{
    return principal_root(k * k - 2.0 * mass_over_hbar * potential);
}

ScaledTransfer transfer_matrix_segment(cplx k_local, double width)
{
    if (!(width >= 0.0))
        throw std::invalid_argument("segment width must be non-negative");
    if (k_local.imag() < 0.0)
        k_local = -k_local;
    const auto f = segment_factors(k_local, width);
    return {f.matrix(), f.log_scale};
}

ScatteringAmplitudes solve_one_channel(double k, const ComplexPotentialProfile& potential,
                                       const AtomSpecies& species)
{
    const auto st = build_product(k, potential, species);

    ScatteringAmplitudes out;
    out.k = k;
    const double xs = potential.x_start;
    const double xe = xs + potential.total_length();
    out.R1 = st.r * std::exp(2.0 * kI * k * xs);
    out.T1 = st.t_scaled * std::exp(-st.log_scale) * std::exp(kI * k * (xs - xe));
    out.A = 1.0 - std::norm(out.R1) - std::norm(out.T1);

    Matrix2cd basis = st.product;
    basis.row(1) /= k;
    basis.col(1) *= k;
    const double smax = Eigen::JacobiSVD<Matrix2cd>(basis).singularValues()(0);
    out.log10_condition = (2.0 * std::log(smax) + 2.0 * st.log_scale) / std::log(10.0);
    out.ill_conditioned = out.log10_condition > kIllConditionedLog10;
    return out;
}

ScatteringAmplitudes solve_one_channel_oracle(double k, const ComplexPotentialProfile& potential,
                                              const AtomSpecies& species)
{
    require_positive_k(k);
    const double energy = kinetic_energy(k, species);
    const double two_m = 2.0 * species.mass_over_hbar;

    ode::CoupledChannelProblem problem;
    problem.channels = 1;
    problem.x_start = potential.x_start;
    for (const auto& seg : potential.segments) {
        Eigen::MatrixXcd f(1, 1);
        f(0, 0) = two_m * (seg.value - energy);
        problem.widths.push_back(seg.width);
        problem.coupling.push_back(f);
    }
    problem.kappa_left = Eigen::VectorXcd::Constant(1, k);
    problem.kappa_right = Eigen::VectorXcd::Constant(1, k);

    const auto sol = ode::integrate_scattering(problem);
    const double xs = potential.x_start;
    const double xe = xs + potential.total_length();

    ScatteringAmplitudes out;
    out.k = k;
    out.R1 = sol.reflection(0) * std::exp(2.0 * kI * k * xs);
    out.T1 = sol.transmission(0) * std::exp(kI * k * (xs - xe));
    out.A = 1.0 - std::norm(out.R1) - std::norm(out.T1);
    return out;
}

GradientRecord absorption_gradient(double k, const ComplexPotentialProfile& potential,
                                   const AtomSpecies& species)
{
    const auto st = build_product(k, potential, species);
    const std::size_t n = st.factors.size();
    const double two_m = 2.0 * species.mass_over_hbar;
    const cplx t = st.t_scaled * std::exp(-st.log_scale);

    GradientRecord g;
    g.A = 1.0 - std::norm(st.r) - std::norm(t);
    g.dA_dReV.resize(n);
    g.dA_dImV.resize(n);
    g.dA_dWidth.resize(n);

    // prefix[j] = M_{j-1}...M_0, suffix[j] = M_{n-1}...M_{j+1}
    std::vector<Matrix2cd> prefix(n + 1), suffix(n + 1);
    prefix[0].setIdentity();
    for (std::size_t j = 0; j < n; ++j)
        prefix[j + 1] = st.factors[j].matrix() * prefix[j];
    suffix[n].setIdentity();
    for (std::size_t j = n; j-- > 0;)
        suffix[j] = (j + 1 < n) ? Matrix2cd(suffix[j + 1] * st.factors[j + 1].matrix())
                                : Matrix2cd::Identity();

    // Derivative of |r|^2 + |t|^2 along a product perturbation dP (in the
    // same scaling as st.product); amplitudes are holomorphic in V.
    auto amplitude_derivs = [&](const Matrix2cd& dp) {
        const cplx d_den = denominator(dp, k);
        const cplx dr = (-numerator(dp, k) - st.r * d_den) / st.den;
        const cplx dt = -t * d_den / st.den;
        return std::conj(st.r) * dr + std::conj(t) * dt;
    };

    for (std::size_t j = 0; j < n; ++j) {
        const auto& f = st.factors[j];
        const Matrix2cd dp_du = suffix[j] * f.d_du() * prefix[j];
        const cplx sv = amplitude_derivs(-two_m * dp_du);
        g.dA_dReV[j] = -2.0 * sv.real();
        g.dA_dImV[j] = 2.0 * sv.imag();
        const Matrix2cd dp_dw = suffix[j] * f.d_width() * prefix[j];
        g.dA_dWidth[j] = -2.0 * amplitude_derivs(dp_dw).real();
    }
    return g;
}

GradientRecord absorption_gradient(double k, const LaserProfile& profile)
{
    auto g = absorption_gradient(k, profile_to_potential(profile), profile.species);
    const double gamma = profile.species.gamma;
    const std::size_t n = profile.segments.size();
    g.dA_dDelta.resize(n);
    g.dA_dRabi.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto& s = profile.segments[j];
        const cplx dv_dd = potential_d_detuning(s.detuning, s.rabi, gamma);
        const cplx dv_dr = potential_d_rabi(s.detuning, s.rabi, gamma);
        g.dA_dDelta[j] = g.dA_dReV[j] * dv_dd.real() + g.dA_dImV[j] * dv_dd.imag();
        g.dA_dRabi[j] = g.dA_dReV[j] * dv_dr.real() + g.dA_dImV[j] * dv_dr.imag();
    }
    return g;
}

std::vector<cplx> one_channel_wavefunction(double k, const ComplexPotentialProfile& potential,
                                           const AtomSpecies& species,
                                           std::span<const double> xs)
{
    const auto st = build_product(k, potential, species);
    const std::size_t n = st.factors.size();
    const double x0 = potential.x_start;

    std::vector<double> right_edge(n);
    double edge = x0;
    for (std::size_t j = 0; j < n; ++j) {
        edge += potential.segments[j].width;
        right_edge[j] = edge;
    }
    const double x_end = edge;

    // (psi, psi') at each segment's right edge, as vec * exp(log), swept
    // leftward from the transmitted wave; the physical solution is the
    // dominant one in this direction.
    std::vector<Vector2cd> vec(n);
    std::vector<double> logs(n);
    Vector2cd v(1.0, kI * k);
    v *= st.t_scaled * std::exp(kI * k * x0);
    double log = -st.log_scale;
    for (std::size_t j = n; j-- > 0;) {
        vec[j] = v;
        logs[j] = log;
        v = st.factors[j].inverse() * v;
        log += st.factors[j].log_scale;
        const double norm = v.norm();
        if (norm > 0.0) {
            v /= norm;
            log += std::log(norm);
        }
    }

    const cplx r_global = st.r * std::exp(2.0 * kI * k * x0);
    std::vector<cplx> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double x = xs[i];
        if (x <= x0 || n == 0) {
            if (x <= x0)
                out[i] = std::exp(kI * k * x) + r_global * std::exp(-kI * k * x);
            else
                out[i] = st.t_scaled * std::exp(kI * k * x);
            continue;
        }
        if (x >= x_end) {
            out[i] = st.t_scaled * std::exp(-st.log_scale) * std::exp(kI * k * (x - x_end + x0));
            continue;
        }
        const auto it = std::lower_bound(right_edge.begin(), right_edge.end(), x);
        const std::size_t j = static_cast<std::size_t>(it - right_edge.begin());
        const double d = right_edge[j] - x;
        const cplx kl = local_wavenumber(k, potential.segments[j].value, species.mass_over_hbar);
        const auto f = segment_factors(kl, d);
        const Vector2cd local = f.inverse() * vec[j];
        out[i] = local(0) * std::exp(logs[j] + f.log_scale);
    }
    return out;
}

} // namespace atomdetect
