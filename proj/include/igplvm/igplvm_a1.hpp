#pragma once

#include "igplvm/gplvm.hpp"
#include "igplvm/types.hpp"

#include <optional>
#include <utility>

namespace igplvm::a1 {

/// Approach I model: learned lower-triangular noise factor Ltilde (the
/// inverse of the Cholesky factor L of the noise covariance).
struct ModelA1 {
    Matrix latents;  // d x N
    Matrix Ltilde;   // D x D lower-triangular, positive diagonal
    double r = 1.0;
    double gamma = 1.0;
    double loglik = 0.0;
    bool converged = false;
    int outer_iters = 0;
    std::optional<dynamics::DynamicsParams> dyn;
};

struct LoglikA1 {
    double value = 0.0;
    Matrix grad_latents;  // d x N
    double grad_log_r = 0.0;
    double grad_log_gamma = 0.0;
};

void validate_triangular_factor(const Matrix& T, const char* name);

/// Marginal log-likelihood of the transformed data Y^I = Ltilde * Y under a
/// shared RBF-plus-unit-noise kernel, with the Jacobian term
/// N log|det Ltilde|. Gradients are w.r.t. the latents and the log
/// hyperparameters; Ltilde is held fixed (it has a closed-form update).
LoglikA1 loglik_a1(const Matrix& Y, const Matrix& X, const Matrix& Ltilde,
                   double r, double gamma);

/// The exact maximizer of the likelihood over Ltilde at fixed (X, r, gamma):
/// the inverse of the lower Cholesky factor of (1/N) * Y K^{-1} Y^T.
Matrix closed_form_Ltilde(const Matrix& Y, const Matrix& K);

/// Alternate SCG on (X, log r, log gamma) with the closed-form Ltilde
/// refresh. Input data are centered internally.
ModelA1 fit_a1(const Matrix& Y, int d, const FitConfig& cfg = {});

/// Smooth part and residuals in the original data frame: Ghat is the
/// back-transformed posterior mean of Y^I, Ehat = Y - Ghat exactly.
std::pair<Matrix, Matrix> reconstruct_a1(const ModelA1& model, const Matrix& Y);

}  // namespace igplvm::a1
