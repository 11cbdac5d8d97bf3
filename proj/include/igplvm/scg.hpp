#pragma once

#include "igplvm/types.hpp"

#include <functional>
#include <utility>

namespace igplvm::optim {

struct ScgConfig {
    int max_iters = 200;
    double grad_tol = 1e-6;       // infinity norm of the gradient
    double objective_tol = 1e-8;  // relative change in the objective
    double initial_lambda = 1.0;  // trust-region scale

    void validate() const;
};

struct OptimTrace {
    int iterations = 0;        // accepted steps
    int evaluations = 0;       // objective/gradient calls
    double final_objective = 0.0;
    double final_grad_norm = 0.0;
    bool converged = false;
};

/// Objective oracle: returns f(x) and fills grad (same size as x).
using Objective = std::function<double(const Vector& x, Vector& grad)>;

/// Scaled conjugate gradient minimizer (Moller's variant: lambda-scaled
/// trust region, no line search, restart to steepest descent every dim(x)
/// accepted steps). Descent is monotone over accepted steps.
std::pair<Vector, OptimTrace> scg_minimize(const Objective& f, Vector x0,
                                           const ScgConfig& cfg);

/// Max over coordinates of |g_analytic - g_fd| / max(1, |g_fd|), with g_fd
/// the central finite difference of f at the given step.
double check_gradient(const Objective& f, const Vector& point, double step);

}  // namespace igplvm::optim
