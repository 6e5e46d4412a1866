#pragma once

#include <functional>
#include <string>

#include <Eigen/Core>

namespace atomdetect::sqp {

/// Strictly convex QP: min 1/2 d'Gd + g'd  s.t.  C d >= b.
struct QpResult
{
    Eigen::VectorXd d;
    Eigen::VectorXd multipliers;   // one per row of C, >= 0
    bool feasible = false;
};

/// Goldfarb-Idnani dual active-set method. G must be symmetric positive definite.
QpResult solve_qp(const Eigen::MatrixXd& G, const Eigen::VectorXd& g,
                  const Eigen::MatrixXd& C, const Eigen::VectorXd& b);

/// min f(x) s.t. c(x) >= 0, with f and c twice differentiable.
struct Problem
{
    int dimension = 0;
    /// Returns f(x); writes the gradient when `grad` is non-null.
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)> objective;
    /// Returns c(x); writes the Jacobian (rows = constraints) when `jac` is non-null.
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, Eigen::MatrixXd*)> constraints;
};

struct Options
{
    int max_iterations = 300;
    double kkt_tolerance = 1e-9;
    double feasibility_tolerance = 1e-11;
    double hessian_step = 1e-5;      // central differences of the Lagrangian gradient
    double curvature_floor = 1e-8;   // relative eigenvalue floor of the modified Hessian
};

struct Result
{
    Eigen::VectorXd x;
    double objective = 0.0;
    Eigen::VectorXd multipliers;
    double kkt_residual = 0.0;     // max of stationarity and complementarity residuals
    double max_violation = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string message;
};

/// Sequential quadratic programming with a finite-difference Lagrangian
/// Hessian (eigenvalue-modified to be positive definite), l1 merit line
/// search and second-order correction.
Result minimize(const Problem& problem, const Eigen::VectorXd& x0, const Options& options = {});

} // namespace atomdetect::sqp
