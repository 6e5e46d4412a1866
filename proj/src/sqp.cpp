#include "atomdetect/sqp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace atomdetect::sqp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double violation(const VectorXd& c)
{
    return c.size() == 0 ? 0.0 : std::max(0.0, -c.minCoeff());
}

double l1_violation(const VectorXd& c)
{
    return c.size() == 0 ? 0.0 : (-c).cwiseMax(0.0).sum();
}

} // namespace

QpResult solve_qp(const MatrixXd& G, const VectorXd& g, const MatrixXd& C, const VectorXd& b)
{
    const Eigen::Index n = G.rows();
    const Eigen::Index m = C.rows();
    const MatrixXd g_inv = G.llt().solve(MatrixXd::Identity(n, n));

    QpResult res;
    res.d = -g_inv * g;
    res.multipliers = VectorXd::Zero(m);

    std::vector<Eigen::Index> active;
    std::vector<double> u;
    std::vector<char> is_active(static_cast<std::size_t>(m), 0);

    const int max_iter = 10 * static_cast<int>(m + n) + 20;
    for (int outer = 0; outer < max_iter; ++outer) {
        Eigen::Index p = -1;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (is_active[static_cast<std::size_t>(i)])
                continue;
            const double s = C.row(i).dot(res.d) - b(i);
            const double thr = 1e-13 * (1.0 + std::abs(b(i)) + C.row(i).norm() * res.d.norm());
            if (s < -thr && s < worst) {
                worst = s;
                p = i;
            }
        }
        if (p < 0) {
            for (std::size_t j = 0; j < active.size(); ++j)
                res.multipliers(active[j]) = u[j];
            res.feasible = true;
            return res;
        }

        double u_p = 0.0;
        const VectorXd np = C.row(p).transpose();
        bool added = false;
        for (int inner = 0; inner < max_iter && !added; ++inner) {
            const auto q = static_cast<Eigen::Index>(active.size());
            VectorXd z, r;
            if (q == 0) {
                z = g_inv * np;
            } else {
                MatrixXd N(n, q);
                for (Eigen::Index j = 0; j < q; ++j)
                    N.col(j) = C.row(active[static_cast<std::size_t>(j)]).transpose();
                const MatrixXd gn = g_inv * N;
                const MatrixXd n_star = (N.transpose() * gn).ldlt().solve(gn.transpose());
                r = n_star * np;
                z = g_inv * np - gn * r;
            }

            double t1 = kInf;
            std::size_t drop = 0;
            for (Eigen::Index j = 0; j < q; ++j) {
                if (r(j) > 1e-14) {
                    const double ratio = u[static_cast<std::size_t>(j)] / r(j);
                    if (ratio < t1) {
                        t1 = ratio;
                        drop = static_cast<std::size_t>(j);
                    }
                }
            }
            double t2 = kInf;
            const double zn = z.dot(np);
            if (z.lpNorm<Eigen::Infinity>() > 1e-14 * (1.0 + np.norm()) && zn > 0.0)
                t2 = -(np.dot(res.d) - b(p)) / zn;

            if (t1 == kInf && t2 == kInf)
                return res;   // infeasible

            const double t = std::min(t1, t2);
            for (Eigen::Index j = 0; j < q; ++j)
                u[static_cast<std::size_t>(j)] -= t * r(j);
            u_p += t;
            if (t2 < kInf)
                res.d += t * z;

            if (t2 <= t1) {
                active.push_back(p);
                u.push_back(u_p);
                is_active[static_cast<std::size_t>(p)] = 1;
                added = true;
            } else {
                is_active[static_cast<std::size_t>(active[drop])] = 0;
                active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
                u.erase(u.begin() + static_cast<std::ptrdiff_t>(drop));
            }
        }
        if (!added)
            return res;
    }
    return res;
}

Result minimize(const Problem& problem, const VectorXd& x0, const Options& options)
{
    const int n = problem.dimension;
    Result res;
    VectorXd x = x0;
    VectorXd g(n);
    MatrixXd jac;
    double f = problem.objective(x, &g);
    VectorXd c = problem.constraints(x, &jac);
    const Eigen::Index m = c.size();
    VectorXd lambda = VectorXd::Zero(m);
    double mu = 1.0;

    auto lagrangian_gradient = [&](const VectorXd& at, const VectorXd& mult) {
        VectorXd grad(n);
        MatrixXd j;
        problem.objective(at, &grad);
        problem.constraints(at, &j);
        return VectorXd(grad - j.transpose() * mult);
    };

    auto modified_hessian = [&](const VectorXd& at, const VectorXd& mult) {
        MatrixXd h(n, n);
        const double step = options.hessian_step;
        for (int i = 0; i < n; ++i) {
            VectorXd xp = at, xm = at;
            xp(i) += step;
            xm(i) -= step;
            h.col(i) = (lagrangian_gradient(xp, mult) - lagrangian_gradient(xm, mult)) / (2.0 * step);
        }
        h = 0.5 * (h + h.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(h);
        VectorXd ev = eig.eigenvalues().cwiseAbs();
        const double floor = options.curvature_floor * std::max(1.0, ev.maxCoeff());
        ev = ev.cwiseMax(floor);
        return MatrixXd(eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose());
    };

    auto kkt_residual = [&](const VectorXd& mult) {
        const double stat = (g - jac.transpose() * mult).lpNorm<Eigen::Infinity>();
        const double comp = m == 0 ? 0.0 : mult.cwiseProduct(c).cwiseAbs().maxCoeff();
        return std::max(stat, comp);
    };

    auto merit = [&](double fv, const VectorXd& cv) { return fv + mu * l1_violation(cv); };

    res.message = "iteration limit reached";
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        const MatrixXd hess = modified_hessian(x, lambda);
        const QpResult qp = solve_qp(hess, g, jac, -c);
        if (!qp.feasible) {
            res.message = "QP subproblem infeasible";
            break;
        }
        const VectorXd& d = qp.d;
        const VectorXd& lam_new = qp.multipliers;
        if (kkt_residual(lam_new) < options.kkt_tolerance && violation(c) < options.feasibility_tolerance) {
            lambda = lam_new;
            res.converged = true;
            res.message = "converged";
            break;
        }
        if (d.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
            lambda = lam_new;
            res.message = "step below resolution";
            break;
        }

        if (m > 0)
            mu = std::max(mu, 1.5 * lam_new.maxCoeff() + 1e-3);
        const double phi0 = merit(f, c);
        const double slope = g.dot(d) - mu * l1_violation(c);

        VectorXd x_new;
        VectorXd g_new(n);
        MatrixXd jac_new;
        VectorXd c_new;
        bool accepted = false;

        auto try_point = [&](const VectorXd& xt, double alpha) {
            double ft = problem.objective(xt, nullptr);
            VectorXd ct = problem.constraints(xt, nullptr);
            if (std::isfinite(ft) && merit(ft, ct) <= phi0 + 1e-4 * alpha * slope) {
                x_new = xt;
                c_new = std::move(ct);
                return true;
            }
            return false;
        };

        accepted = try_point(x + d, 1.0);
        if (!accepted) {
            // Second-order correction against curvature of the constraints.
            const VectorXd c_trial = problem.constraints(x + d, nullptr);
            const QpResult soc = solve_qp(hess, g, jac, -(c_trial - jac * d));
            if (soc.feasible)
                accepted = try_point(x + soc.d, 1.0);
        }
        for (double alpha = 0.5; !accepted && alpha > 1e-12; alpha *= 0.5)
            accepted = try_point(x + alpha * d, alpha);
        if (!accepted) {
            lambda = lam_new;
            res.message = "line search failed";
            break;
        }

        x = x_new;
        lambda = lam_new;
        f = problem.objective(x, &g_new);
        g = g_new;
        c = problem.constraints(x, &jac_new);
        jac = jac_new;
    }

    res.x = x;
    res.objective = f;
    res.multipliers = lambda;
    res.kkt_residual = kkt_residual(lambda);
    res.max_violation = violation(c);
    res.iterations = it;
    return res;
}

} // namespace atomdetect::sqp
