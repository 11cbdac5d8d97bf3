#pragma once

#include "igplvm/kernels.hpp"
#include "igplvm/types.hpp"

namespace igplvm::dynamics {

/// First-order autoregressive GP prior over a latent trajectory.
struct DynamicsParams {
    double a = 1.0;  // RBF amplitude
    double b = 1.0;  // inverse squared length-scale
    double w = 1.0;  // process-noise precision
    int order = 1;   // only k = 1 is supported

    void validate() const;
    kernels::DynamicsKernelParams kernel() const { return {a, b, w}; }
};

struct DynamicsLogPrior {
    double value = 0.0;
    Matrix grad_latents;     // d x N
    double grad_log_a = 0.0;
    double grad_log_b = 0.0;
    double grad_log_w = 0.0;
};

/// log p(X) under a GP regression of columns 2..N on columns 1..N-1 with an
/// RBF + noise kernel, plus a standard-normal prior on the first column.
/// Hyperparameter gradients are in log-space.
DynamicsLogPrior dyn_log_prior(const Matrix& X, const DynamicsParams& p);

}  // namespace igplvm::dynamics
