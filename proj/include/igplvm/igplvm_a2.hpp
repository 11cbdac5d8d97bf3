#pragma once

#include "igplvm/gplvm.hpp"
#include "igplvm/types.hpp"

#include <optional>
#include <utility>

namespace igplvm::a2 {

/// Approach II model: correlated latent functions g = R g*, with
/// Rtilde = R^{-1} and L_R = R^{-1} L, both lower-triangular with positive
/// diagonals.
struct ModelA2 {
    Matrix latents;  // d x N
    Matrix Rtilde;   // D x D
    Matrix LR;       // D x D
    double gamma = 1.0;
    double loglik = 0.0;
    bool converged = false;
    int sweeps = 0;
    std::optional<dynamics::DynamicsParams> dyn;
};

struct LoglikA2 {
    double value = 0.0;
    Matrix grad_latents;          // d x N
    double grad_log_gamma = 0.0;
    Matrix grad_LR;               // lower-triangular slots; diagonal in log-space
    Matrix grad_Rtilde;           // same layout
};

/// Log-likelihood of the stacked transformed data Y* = Rtilde * Y under the
/// structured covariance I_D (x) K_g* + Sigma (x) I_N with Sigma = LR LR^T.
/// Computed through the eigendecomposition of Sigma, i.e. D independent
/// N x N solves; never materializes the DN x DN matrix.
LoglikA2 loglik_a2(const Matrix& Y, const Matrix& X, const Matrix& LR,
                   const Matrix& Rtilde, double gamma);

/// Block alternation: SCG on the free entries of (Rtilde, LR), then SCG on
/// (X, gamma). Data are centered internally. Refuses D*N above cfg.max_dn.
ModelA2 fit_a2(const Matrix& Y, int d, const FitConfig& cfg = {});

/// Posterior mean of the smooth part (back-transformed through R) and the
/// residuals; Ghat + Ehat = Y exactly.
std::pair<Matrix, Matrix> reconstruct_a2(const ModelA2& model, const Matrix& Y);

}  // namespace igplvm::a2
