#include "igplvm/scg.hpp"

#include <cmath>
#include <limits>

namespace igplvm::optim {

void ScgConfig::validate() const {
    if (max_iters < 1) throw DomainError("scg: max_iters must be >= 1");
    if (!(grad_tol > 0.0) || !(objective_tol > 0.0) || !(initial_lambda > 0.0))
        throw DomainError("scg: tolerances and initial_lambda must be positive");
}

std::pair<Vector, OptimTrace> scg_minimize(const Objective& f, Vector x0,
                                           const ScgConfig& cfg) {
    cfg.validate();
    const auto n = x0.size();
    constexpr double sigma0 = 1e-4;
    constexpr double lambda_min = 1e-15;
    constexpr double lambda_max = 1e100;

    OptimTrace trace;
    Vector x = std::move(x0);
    Vector grad(n), grad_old(n), grad_plus(n);
    double fnow = f(x, grad);
    ++trace.evaluations;
    if (!std::isfinite(fnow) || !grad.allFinite())
        throw DomainError("scg: objective or gradient non-finite at the start point");

    double fold = fnow;
    Vector d = -grad;
    double lambda = cfg.initial_lambda;
    bool success = true;
    int nsuccess = 0;
    double mu = 0.0, kappa = 0.0, theta = 0.0;

    trace.final_objective = fnow;
    trace.final_grad_norm = grad.lpNorm<Eigen::Infinity>();
    if (trace.final_grad_norm < cfg.grad_tol) {
        trace.converged = true;
        return {x, trace};
    }

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        if (success) {
            mu = d.dot(grad);
            if (mu >= 0.0) {
                d = -grad;
                mu = d.dot(grad);
            }
            kappa = d.squaredNorm();
            if (kappa < std::numeric_limits<double>::epsilon()) {
                trace.converged = true;
                break;
            }
            const double sigma = sigma0 / std::sqrt(kappa);
            (void)f(x + sigma * d, grad_plus);
            ++trace.evaluations;
            if (!grad_plus.allFinite()) grad_plus = grad;  // fall back, step will shrink
            theta = d.dot(grad_plus - grad) / sigma;
        }

        double delta = theta + lambda * kappa;
        if (delta <= 0.0) {
            delta = lambda * kappa;
            lambda = lambda - theta / kappa;
        }
        const double alpha = -mu / delta;

        Vector xnew = x + alpha * d;
        Vector grad_new(n);
        const double fnew = f(xnew, grad_new);
        ++trace.evaluations;

        double ratio = -std::numeric_limits<double>::infinity();
        if (std::isfinite(fnew))
            ratio = 2.0 * (fnew - fold) / (alpha * mu);  // alpha*mu < 0

        if (ratio >= 0.0 && grad_new.allFinite()) {
            success = true;
            ++nsuccess;
            ++trace.iterations;
            x = std::move(xnew);
            grad_old = grad;
            grad = std::move(grad_new);
            fnow = fnew;

            trace.final_objective = fnow;
            trace.final_grad_norm = grad.lpNorm<Eigen::Infinity>();
            if (trace.final_grad_norm < cfg.grad_tol) {
                trace.converged = true;
                break;
            }
            const double rel = std::abs(fnew - fold) / std::max(1.0, std::abs(fold));
            if (rel < cfg.objective_tol) {
                fold = fnew;
                trace.converged = true;
                break;
            }
            fold = fnew;

            if (ratio >= 0.75) lambda = std::max(0.25 * lambda, lambda_min);
        } else {
            // reject; stay at last accepted iterate
            success = false;
        }
        if (ratio < 0.25) {
            lambda = std::min(4.0 * lambda, lambda_max);
            if (lambda >= lambda_max) break;  // trust region exhausted
        }

        if (success) {
            if (nsuccess == static_cast<int>(n)) {
                d = -grad;
                nsuccess = 0;
            } else {
                const double beta = (grad_old - grad).dot(grad) / mu;
                d = beta * d - grad;
            }
        }
    }

    trace.final_objective = fnow;
    trace.final_grad_norm = grad.lpNorm<Eigen::Infinity>();
    return {x, trace};
}

double check_gradient(const Objective& f, const Vector& point, double step) {
    if (!(step > 0.0)) throw DomainError("check_gradient: step must be positive");
    Vector g_analytic(point.size());
    (void)f(point, g_analytic);
    Vector scratch(point.size());
    double worst = 0.0;
    for (Eigen::Index i = 0; i < point.size(); ++i) {
        Vector p = point;
        p[i] = point[i] + step;
        const double fp = f(p, scratch);
        p[i] = point[i] - step;
        const double fm = f(p, scratch);
        const double g_fd = (fp - fm) / (2.0 * step);
        const double disc = std::abs(g_analytic[i] - g_fd) / std::max(1.0, std::abs(g_fd));
        worst = std::max(worst, disc);
    }
    return worst;
}

}  // namespace igplvm::optim
