#pragma once

#include "igplvm/types.hpp"

namespace igplvm::kernels {

enum class KernelKind { Observation, SharedLatent, Dynamics };

struct ObservationKernelParams {
    double r = 1.0;      // signal variance
    double gamma = 1.0;  // inverse squared length-scale

    void validate() const;
};

struct DynamicsKernelParams {
    double a = 1.0;  // amplitude
    double b = 1.0;  // inverse squared length-scale
    double w = 1.0;  // noise precision (kernel adds I/w)

    void validate() const;
};

/// Pairwise squared Euclidean distances between columns of X (d x N -> N x N).
Matrix squared_distances(const Matrix& X);

/// Smooth part of the RBF kernel: amp * exp(-gamma/2 * ||x_t - x_t'||^2).
/// This is the kernel without any noise term; gradients chain through it.
Matrix rbf_smooth(const Matrix& X, double amp, double gamma);

/// K[t,t'] = r * exp(-gamma/2 ||x_t - x_t'||^2) + delta_{t,t'}.
/// The delta is keyed on the sample index, so coincident latent points at
/// different times still get independent unit noise.
Matrix rbf_plus_unit_noise(const Matrix& X, const ObservationKernelParams& p);

/// K[t,t'] = exp(-gamma/2 ||x_t - x_t'||^2); unit diagonal, no noise term.
Matrix rbf_unit_amplitude(const Matrix& X, double gamma);

/// K[t,t'] = a * exp(-b/2 ||x_t - x_t'||^2) + delta_{t,t'} / w.
Matrix dynamics_kernel(const Matrix& X, const DynamicsKernelParams& p);

/// dK/d(amp) given the smooth part E = amp * exp(...): E / amp entrywise.
Matrix partial_amplitude(const Matrix& E, double amp);

/// dK/d(gamma): -1/2 * sqdist .* E.
Matrix partial_gamma(const Matrix& E, const Matrix& sqdist);

/// dK/dx_{j,t} as a full N x N matrix (nonzero only in row/column t).
/// E is the smooth part of the kernel at X.
Matrix partial_latent(const Matrix& X, const Matrix& E, double gamma, int j, int t);

/// Chain rule through the latents: given S = dL/dK (symmetric N x N) and the
/// smooth part E, returns dL/dX (d x N) for the RBF family with inverse
/// squared length-scale gamma.
Matrix latent_gradient(const Matrix& S, const Matrix& X, const Matrix& E, double gamma);

}  // namespace igplvm::kernels
