#pragma once

#include "igplvm/dynamics.hpp"
#include "igplvm/kernels.hpp"
#include "igplvm/scg.hpp"
#include "igplvm/types.hpp"

#include <optional>
#include <utility>

namespace igplvm {

struct CenteredData {
    Matrix values;  // D x N, rows have zero mean
    Vector means;   // D, the removed per-dimension means
};

/// Remove the per-dimension (row) means; the means are kept for
/// reconstruction.
CenteredData center(const Matrix& Y_raw);

/// Project centered data onto its top-d principal directions, each latent
/// row scaled to unit sample variance. Sign convention: the
/// largest-magnitude loading of each direction is positive. Directions with
/// (near-)zero variance yield zero latent rows.
Matrix pca_init(const Matrix& Y, int d);

/// Centered moving-average smoothing of a latent trajectory (columns are time
/// points), with rows re-centered and rescaled to unit sample variance.
/// Used to initialize dynamics-enabled fits: the raw PCA projection carries
/// the observation noise into the latents, and an init that already respects
/// the smoothness prior keeps the optimizer out of the noise-interpolating
/// basin. half_window = 0 is the identity (up to the re-normalization).
Matrix smooth_latent_init(const Matrix& X, int half_window);

struct FitConfig {
    optim::ScgConfig scg{400, 1e-5, 1e-9, 1.0};
    int scg_block_iters = 10;  // SCG iterations per alternation block
    int max_outer = 200;       // alternation sweeps (Approach I)
    int max_sweeps_a2 = 100;   // alternation sweeps (Approach II)
    double outer_tol = 1e-6;   // relative objective change across sweeps
    bool with_dynamics = false;
    dynamics::DynamicsParams dyn_init{};
    int init_smooth_half = -1;  // PCA-init smoothing half-window when dynamics
                                // are on; < 0 picks 2, 0 disables
    bool scaled_noise = false;  // per-dimension noise scale for the baseline
    int max_dn = 5000;          // size guard for Approach II
};

/// Shared fit initialization: pca_init, passed through smooth_latent_init
/// when cfg.with_dynamics (half-window from cfg.init_smooth_half, or N/20).
Matrix initial_latents(const Matrix& Y, int d, const FitConfig& cfg);

struct GplvmModel {
    Matrix latents;          // d x N
    double r = 1.0;
    double gamma = 1.0;
    Vector beta;             // noise scale; size 1, or D when scaled_noise
    double loglik = 0.0;
    bool converged = false;
    std::optional<dynamics::DynamicsParams> dyn;
};

/// Marginal log-likelihood of the baseline GPLVM (noise factor fixed to
/// diag(beta)), with gradients w.r.t. the latents and the log
/// hyperparameters.
struct GplvmLoglik {
    double value = 0.0;
    Matrix grad_latents;
    double grad_log_r = 0.0;
    double grad_log_gamma = 0.0;
    Vector grad_log_beta;
};
GplvmLoglik loglik_gplvm(const Matrix& Y, const Matrix& X, double r, double gamma,
                         const Vector& beta);

/// Baseline GPLVM (independent isotropic noise). Y must be centered.
GplvmModel fit_gplvm(const Matrix& Y, int d, const FitConfig& cfg = {});

/// Posterior mean of the smooth part at the training inputs and the implied
/// residuals; Ghat + Ehat == Y exactly.
std::pair<Matrix, Matrix> posterior_mean_and_residuals(const GplvmModel& model,
                                                       const Matrix& Y);

}  // namespace igplvm
