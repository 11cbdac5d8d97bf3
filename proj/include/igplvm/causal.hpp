#pragma once

#include "igplvm/types.hpp"

#include <optional>
#include <vector>

namespace igplvm::causal {

struct GaussianityResult {
    std::vector<double> pvalues;  // per dimension, Jarque-Bera
    std::vector<bool> reject;     // at the Bonferroni-corrected level alpha/D
    bool non_gaussian = false;    // any dimension rejects
};

/// Jarque-Bera normality test per dimension (row) of E. Needs N >= 20.
GaussianityResult gaussianity_test(const Matrix& E, double alpha);

struct FastIcaConfig {
    int max_sweeps = 500;
    double tol = 1e-7;
    int max_restarts = 5;
};

struct MixingEstimate {
    Matrix W;        // D x D unmixing matrix (applies to centered data)
    Matrix sources;  // recovered sources W * E_centered
    int sweeps = 0;
    bool converged = false;
};

/// Symmetric fixed-point ICA with tanh contrast; whitening by
/// eigendecomposition. Deterministic given the seed. The result is
/// meaningful only for non-Gaussian data; callers should gate on
/// gaussianity_test.
MixingEstimate fastica(const Matrix& E, unsigned seed, const FastIcaConfig& cfg = {});

struct InfluenceMatrix {
    Matrix B;                // D x D, zero diagonal
    std::vector<int> order;  // causal order: original indices, exogenous first
    double upper_mass = 0.0; // residual squared mass above the diagonal
    double prune_threshold = 0.0;
};

/// The LiNGAM post-processing of an ICA unmixing matrix: row permutation for
/// a nonzero diagonal, row rescaling to unit diagonal, B = I - W', and the
/// causal-order search. Permutation searches are exhaustive for D <= 8 and
/// greedy beyond.
InfluenceMatrix lingam_from_unmixing(const Matrix& W);

/// Zero entries below the threshold and recompute the causal order. For a
/// positive threshold, entries inconsistent with the recomputed order are
/// also dropped (their mass is reported in upper_mass), so B is acyclic.
InfluenceMatrix prune_influences(const InfluenceMatrix& infl, double threshold);

struct MarkovNetwork {
    Matrix precision;  // of the row-normalized residuals
    struct Edge {
        int i, j;       // i < j
        double weight;  // partial correlation
    };
    std::vector<Edge> edges;
    double threshold = 0.0;
};

/// Gaussian Markov network from the precision matrix of the residuals
/// (rows normalized to unit variance first). Edge weight is the partial
/// correlation -p_ij / sqrt(p_ii p_jj); edges kept where |weight| >=
/// threshold.
MarkovNetwork precision_network(const Matrix& E, double threshold);

/// Amari performance index, normalized to [0, 1]; 0 iff P is a permutation
/// times a diagonal.
double amari_index(const Matrix& P);

/// Mean squared error between function estimates, after removing each
/// dimension's mean difference (constant offsets are not identifiable).
double mse_g(const Matrix& Ghat, const Matrix& Gtrue);

struct CausalReport {
    GaussianityResult gaussianity;
    bool lingam_branch = false;
    std::optional<MixingEstimate> ica;
    std::optional<InfluenceMatrix> influence;  // non-Gaussian branch
    std::optional<MarkovNetwork> network;      // Gaussian branch
};

/// The full discovery procedure on estimated residuals: Gaussianity gate,
/// then LiNGAM (non-Gaussian) or the precision-matrix network (Gaussian).
CausalReport discover(const Matrix& E, double alpha, double threshold,
                      unsigned seed = 0);

}  // namespace igplvm::causal
