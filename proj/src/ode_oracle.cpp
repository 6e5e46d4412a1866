#include "atomdetect/ode_oracle.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "atomdetect/errors.hpp"

namespace atomdetect::ode {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using cplx = std::complex<double>;

namespace {

// Gauss-Legendre 3-stage Butcher tableau.
struct GaussLegendre3
{
    double a[3][3];
    double b[3];

    GaussLegendre3()
    {
        const double r = std::sqrt(15.0);
        const double rows[3][3] = {
            {5.0 / 36.0, 2.0 / 9.0 - r / 15.0, 5.0 / 36.0 - r / 30.0},
            {5.0 / 36.0 + r / 24.0, 2.0 / 9.0, 5.0 / 36.0 - r / 24.0},
            {5.0 / 36.0 + r / 30.0, 2.0 / 9.0 + r / 15.0, 5.0 / 36.0},
        };
        for (int i = 0; i < 3; ++i)
            for (int l = 0; l < 3; ++l)
                a[i][l] = rows[i][l];
        b[0] = 5.0 / 18.0;
        b[1] = 4.0 / 9.0;
        b[2] = 5.0 / 18.0;
    }
};

const GaussLegendre3& tableau()
{
    static const GaussLegendre3 t;
    return t;
}

// One step y -> y + h sum_i b_i K_i of y' = A y with A constant over the step.
MatrixXcd step_map(const MatrixXcd& a_mat, double h)
{
    const auto& gl = tableau();
    const Eigen::Index d = a_mat.rows();
    MatrixXcd lhs = MatrixXcd::Identity(3 * d, 3 * d);
    MatrixXcd rhs(3 * d, d);
    for (int i = 0; i < 3; ++i) {
        for (int l = 0; l < 3; ++l)
            lhs.block(i * d, l * d, d, d) -= h * gl.a[i][l] * a_mat;
        rhs.block(i * d, 0, d, d) = a_mat;
    }
    const MatrixXcd stages = lhs.partialPivLu().solve(rhs);
    MatrixXcd phi = MatrixXcd::Identity(d, d);
    for (int i = 0; i < 3; ++i)
        phi += h * gl.b[i] * stages.block(i * d, 0, d, d);
    return phi;
}

// Modified Gram-Schmidt, in place: y <- q, returns the upper triangular factor.
MatrixXcd orthonormalize(MatrixXcd& y)
{
    const Eigen::Index c = y.cols();
    MatrixXcd r = MatrixXcd::Zero(c, c);
    for (Eigen::Index j = 0; j < c; ++j) {
        for (Eigen::Index i = 0; i < j; ++i) {
            r(i, j) = y.col(i).dot(y.col(j));
            y.col(j) -= r(i, j) * y.col(i);
        }
        r(j, j) = y.col(j).norm();
        if (!(r(j, j).real() > 0.0) || !std::isfinite(r(j, j).real()))
            throw NumericalError("ODE oracle: solution basis collapsed");
        y.col(j) /= r(j, j);
    }
    return r;
}

struct LevelResult
{
    VectorXcd reflection;
    VectorXcd transmission;
    long steps = 0;
};

LevelResult integrate_level(const CoupledChannelProblem& p, const std::vector<long>& steps)
{
    const int c = p.channels;
    const int d = 2 * c;
    const std::size_t n = p.widths.size();
    const cplx i_unit{0.0, 1.0};

    // Solutions outgoing on the right, one per channel.
    MatrixXcd y = MatrixXcd::Zero(d, c);
    y.topRows(c).setIdentity();
    y.bottomRows(c) = (i_unit * p.kappa_right).asDiagonal();

    // z = R_0^{-1} R_1^{-1} ... accumulated so that transmission = z * coeffs.
    MatrixXcd r0 = orthonormalize(y);
    MatrixXcd z = r0.triangularView<Eigen::Upper>().solve(MatrixXcd::Identity(c, c));

    LevelResult out;
    for (std::size_t j = n; j-- > 0;) {
        if (p.widths[j] <= 0.0)
            continue;
        MatrixXcd a_mat = MatrixXcd::Zero(d, d);
        a_mat.topRightCorner(c, c).setIdentity();
        a_mat.bottomLeftCorner(c, c) = p.coupling[j];
        const double h = -p.widths[j] / static_cast<double>(steps[j]);
        const MatrixXcd phi = step_map(a_mat, h);
        for (long s = 0; s < steps[j]; ++s) {
            y = phi * y;
            const MatrixXcd r = orthonormalize(y);
            // z <- z r^{-1}
            z = r.transpose().triangularView<Eigen::Lower>().solve(z.transpose()).transpose();
        }
        out.steps += steps[j];
    }

    // Left matching: Q coeffs - [I; -i K_L] rho = [e0; i kl0 e0].
    MatrixXcd system(d, d);
    system.leftCols(c) = y;
    system.topRightCorner(c, c) = -MatrixXcd::Identity(c, c);
    system.bottomRightCorner(c, c) = (i_unit * p.kappa_left).asDiagonal();
    VectorXcd rhs = VectorXcd::Zero(d);
    rhs(0) = 1.0;
    rhs(c) = i_unit * p.kappa_left(0);
    const VectorXcd sol = system.fullPivLu().solve(rhs);

    out.reflection = sol.tail(c);
    out.transmission = z * sol.head(c);
    return out;
}

} // namespace

ScatteringSolution integrate_scattering(const CoupledChannelProblem& problem,
                                        const IntegrationOptions& options)
{
    const std::size_t n = problem.widths.size();
    if (problem.coupling.size() != n)
        throw std::invalid_argument("ODE oracle: one coupling matrix per segment required");
    if (problem.kappa_left.size() != problem.channels || problem.kappa_right.size() != problem.channels)
        throw std::invalid_argument("ODE oracle: exterior wavenumbers per channel required");

    std::vector<long> steps(n, 1);
    for (std::size_t j = 0; j < n; ++j) {
        const double rate = std::sqrt(problem.coupling[j].norm());
        const double phase = problem.widths[j] * rate;
        steps[j] = std::max<long>(1, static_cast<long>(std::ceil(phase / options.initial_step_phase)));
    }

    ScatteringSolution result;
    LevelResult previous = integrate_level(problem, steps);
    for (int level = 1; level <= options.max_halvings; ++level) {
        long total = 0;
        for (auto& s : steps) {
            s *= 2;
            total += s;
        }
        if (total > options.max_steps)
            break;
        LevelResult current = integrate_level(problem, steps);
        const double change = std::max((current.reflection - previous.reflection).cwiseAbs().maxCoeff(),
                                       (current.transmission - previous.transmission).cwiseAbs().maxCoeff());
        result.last_change = change;
        result.halvings = level;
        result.steps = current.steps;
        if (change < options.tolerance) {
            result.reflection = current.reflection;
            result.transmission = current.transmission;
            return result;
        }
        previous = std::move(current);
    }
    throw NumericalError("ODE oracle did not converge: last amplitude change " +
                         std::to_string(result.last_change) + " after " +
                         std::to_string(result.halvings) + " halvings");
}

} // namespace atomdetect::ode
