#include "igplvm/igplvm_a2.hpp"

#include "igplvm/igplvm_a1.hpp"  // validate_triangular_factor

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace igplvm::a2 {

namespace {

// Pack a lower-triangular factor column by column, diagonal in log-space.
Eigen::Index tri_size(Eigen::Index D) { return D * (D + 1) / 2; }

void pack_tri(const Matrix& T, Vector& out, Eigen::Index offset) {
    Eigen::Index k = offset;
    for (Eigen::Index j = 0; j < T.cols(); ++j) {
        out[k++] = std::log(T(j, j));
        for (Eigen::Index i = j + 1; i < T.rows(); ++i) out[k++] = T(i, j);
    }
}

Matrix unpack_tri(const Vector& p, Eigen::Index offset, Eigen::Index D) {
    Matrix T = Matrix::Zero(D, D);
    Eigen::Index k = offset;
    for (Eigen::Index j = 0; j < D; ++j) {
        T(j, j) = std::exp(p[k++]);
        for (Eigen::Index i = j + 1; i < D; ++i) T(i, j) = p[k++];
    }
    return T;
}

void pack_tri_grad(const Matrix& G, Vector& out, Eigen::Index offset) {
    Eigen::Index k = offset;
    for (Eigen::Index j = 0; j < G.cols(); ++j) {
        out[k++] = G(j, j);
        for (Eigen::Index i = j + 1; i < G.rows(); ++i) out[k++] = G(i, j);
    }
}

}  // namespace

LoglikA2 loglik_a2(const Matrix& Y, const Matrix& X, const Matrix& LR,
                   const Matrix& Rtilde, double gamma) {
    const auto D = Y.rows();
    const auto N = Y.cols();
    a1::validate_triangular_factor(LR, "L_R");
    a1::validate_triangular_factor(Rtilde, "Rtilde");

    const Matrix D2 = kernels::squared_distances(X);
    const Matrix K = (-0.5 * gamma * D2.array()).exp();

    const Matrix Sigma = LR * LR.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Sigma);
    if (eig.info() != Eigen::Success)
        throw NumericalError("loglik_a2: eigendecomposition of Sigma failed");
    const Vector lambda = eig.eigenvalues();
    const Matrix U = eig.eigenvectors();

    const Matrix Ystar = Rtilde * Y;    // D x N
    const Matrix Z = U.transpose() * Ystar;

    Matrix Alpha(D, N);                  // rows: (K + lambda_k I)^{-1} Z_k
    Matrix Ssum = Matrix::Zero(N, N);    // sum over blocks of dl2/dK
    Vector block_trace(D);               // tr((K + lambda_k I)^{-1})
    Matrix AAt(D, D);                    // alpha_j . alpha_k
    double quad = 0.0, logdet = 0.0;

    for (Eigen::Index k = 0; k < D; ++k) {
        Matrix Kk = K;
        Kk.diagonal().array() += lambda[k];
        Eigen::LLT<Matrix> llt(Kk);
        if (llt.info() != Eigen::Success) {
            Kk.diagonal().array() += 1e-10;
            llt.compute(Kk);
            if (llt.info() != Eigen::Success)
                throw NumericalError("loglik_a2: block Cholesky failed");
        }
        const Vector alpha = llt.solve(Z.row(k).transpose());
        Alpha.row(k) = alpha.transpose();
        quad += Z.row(k).dot(alpha);
        logdet += 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        const Matrix Kinv = llt.solve(Matrix::Identity(N, N));
        block_trace[k] = Kinv.trace();
        Ssum += 0.5 * (alpha * alpha.transpose() - Kinv);
    }
    AAt = Alpha * Alpha.transpose();

    LoglikA2 out;
    out.value = -0.5 * quad - 0.5 * logdet
                + static_cast<double>(N) * Rtilde.diagonal().array().log().sum()
                - 0.5 * static_cast<double>(D * N) * std::log(2.0 * std::numbers::pi);

    // latents and gamma (the smooth part is K itself, unit amplitude)
    out.grad_latents = kernels::latent_gradient(Ssum, X, K, gamma);
    out.grad_log_gamma = Ssum.cwiseProduct(-0.5 * gamma * D2.cwiseProduct(K)).sum();

    // dl2/dSigma via per-entry block traces of the structured dl2/dK_{Y*}
    const Matrix Gsigma =
        0.5 * U * (AAt - Matrix(block_trace.asDiagonal())) * U.transpose();
    Matrix gLR = (2.0 * Gsigma * LR).triangularView<Eigen::Lower>();
    gLR.diagonal().array() *= LR.diagonal().array();  // log-diagonal chain
    out.grad_LR = gLR;

    // dl2/dRtilde: data term through Y* = Rtilde Y, plus N log|Rtilde|
    const Matrix Beta = U * Alpha;  // K_{Y*}^{-1} Y* in matrix form
    Matrix gR = (-Beta * Y.transpose()).triangularView<Eigen::Lower>();
    gR.diagonal() += static_cast<double>(N) * Rtilde.diagonal().cwiseInverse();
    gR.diagonal().array() *= Rtilde.diagonal().array();
    out.grad_Rtilde = gR;
    return out;
}

ModelA2 fit_a2(const Matrix& Y_raw, int d, const FitConfig& cfg) {
    const auto D = Y_raw.rows();
    const auto N = Y_raw.cols();
    if (D * N > cfg.max_dn)
        throw DomainError("fit_a2: D*N = " + std::to_string(D * N) +
                          " exceeds the size cap " + std::to_string(cfg.max_dn));
    const Matrix Y = center(Y_raw).values;

    Matrix X = initial_latents(Y, d, cfg);
    double log_gamma = 0.0;
    Matrix Rtilde = Matrix::Identity(D, D);
    Matrix LR = Matrix::Identity(D, D);
    dynamics::DynamicsParams dyn = cfg.dyn_init;

    const auto dn = static_cast<Eigen::Index>(d) * N;
    const Eigen::Index nt = tri_size(D);
    const Eigen::Index ndyn = cfg.with_dynamics ? 3 : 0;

    optim::ScgConfig block_cfg = cfg.scg;
    block_cfg.max_iters = cfg.scg_block_iters;

    auto objective_at = [&]() {
        double v = loglik_a2(Y, X, LR, Rtilde, std::exp(log_gamma)).value;
        if (cfg.with_dynamics) v += dynamics::dyn_log_prior(X, dyn).value;
        return v;
    };

    double best = objective_at();
    ModelA2 model{X, Rtilde, LR, std::exp(log_gamma), best, false, 0, std::nullopt};
    if (cfg.with_dynamics) model.dyn = dyn;

    double prev = best;
    bool converged = false;
    int sweep = 0;
    for (; sweep < cfg.max_sweeps_a2; ++sweep) {
        // block 1: the triangular factors
        {
            Vector p(2 * nt);
            pack_tri(Rtilde, p, 0);
            pack_tri(LR, p, nt);
            auto obj = [&](const Vector& q, Vector& grad) -> double {
                grad.resize(q.size());
                try {
                    const Matrix Rt = unpack_tri(q, 0, D);
                    const Matrix L = unpack_tri(q, nt, D);
                    const LoglikA2 ll = loglik_a2(Y, X, L, Rt, std::exp(log_gamma));
                    pack_tri_grad(ll.grad_Rtilde, grad, 0);
                    pack_tri_grad(ll.grad_LR, grad, nt);
                    grad = -grad;
                    return -ll.value;
                } catch (const NumericalError&) {
                    grad.setZero();
                    return std::numeric_limits<double>::infinity();
                } catch (const DomainError&) {
                    // parameter excursion (exp over/underflow): reject the step
                    grad.setZero();
                    return std::numeric_limits<double>::infinity();
                }
            };
            auto [pstar, trace] = optim::scg_minimize(obj, p, block_cfg);
            Rtilde = unpack_tri(pstar, 0, D);
            LR = unpack_tri(pstar, nt, D);
        }
        // block 2: latents, gamma (and dynamics hyperparameters)
        {
            Vector p(dn + 1 + ndyn);
            p.head(dn) = Eigen::Map<const Vector>(X.data(), dn);
            p[dn] = log_gamma;
            if (cfg.with_dynamics) {
                p[dn + 1] = std::log(dyn.a);
                p[dn + 2] = std::log(dyn.b);
                p[dn + 3] = std::log(dyn.w);
            }
            auto obj = [&](const Vector& q, Vector& grad) -> double {
                grad.resize(q.size());
                try {
                    const Matrix Xc = Eigen::Map<const Matrix>(q.data(), d, N);
                    const LoglikA2 ll = loglik_a2(Y, Xc, LR, Rtilde, std::exp(q[dn]));
                    double value = ll.value;
                    Eigen::Map<Matrix> gX(grad.data(), d, N);
                    gX = ll.grad_latents;
                    grad[dn] = ll.grad_log_gamma;
                    if (cfg.with_dynamics) {
                        dynamics::DynamicsParams dp{std::exp(q[dn + 1]), std::exp(q[dn + 2]),
                                                    std::exp(q[dn + 3]), 1};
                        const auto prior = dynamics::dyn_log_prior(Xc, dp);
                        value += prior.value;
                        gX += prior.grad_latents;
                        grad[dn + 1] = prior.grad_log_a;
                        grad[dn + 2] = prior.grad_log_b;
                        grad[dn + 3] = prior.grad_log_w;
                    }
                    grad = -grad;
                    return -value;
                } catch (const NumericalError&) {
                    grad.setZero();
                    return std::numeric_limits<double>::infinity();
                } catch (const DomainError&) {
                    // parameter excursion (exp over/underflow): reject the step
                    grad.setZero();
                    return std::numeric_limits<double>::infinity();
                }
            };
            auto [pstar, trace] = optim::scg_minimize(obj, p, block_cfg);
            X = Eigen::Map<const Matrix>(pstar.data(), d, N);
            log_gamma = pstar[dn];
            if (cfg.with_dynamics)
                dyn = {std::exp(pstar[dn + 1]), std::exp(pstar[dn + 2]),
                       std::exp(pstar[dn + 3]), 1};
        }

        const double cur = objective_at();
        if (cur > best) {
            best = cur;
            model = ModelA2{X, Rtilde, LR, std::exp(log_gamma), best, false, 0, std::nullopt};
            if (cfg.with_dynamics) model.dyn = dyn;
        }
        const double rel = std::abs(cur - prev) / std::max(1.0, std::abs(prev));
        prev = cur;
        if (rel < cfg.outer_tol) {
            converged = true;
            ++sweep;
            break;
        }
    }
    model.converged = converged;
    model.sweeps = sweep;
    return model;
}

std::pair<Matrix, Matrix> reconstruct_a2(const ModelA2& model, const Matrix& Y) {
    const auto D = Y.rows();
    const CenteredData cd = center(Y);

    const Matrix K = kernels::rbf_smooth(model.latents, 1.0, model.gamma);
    const Matrix Sigma = model.LR * model.LR.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Sigma);
    if (eig.info() != Eigen::Success)
        throw NumericalError("reconstruct_a2: eigendecomposition of Sigma failed");
    const Matrix U = eig.eigenvectors();
    const Vector lambda = eig.eigenvalues();

    const Matrix Z = U.transpose() * model.Rtilde * cd.values;
    Matrix Mz(D, Y.cols());
    for (Eigen::Index k = 0; k < D; ++k) {
        Matrix Kk = K;
        Kk.diagonal().array() += lambda[k];
        Eigen::LLT<Matrix> llt(Kk);
        if (llt.info() != Eigen::Success) {
            Kk.diagonal().array() += 1e-10;
            llt.compute(Kk);
            if (llt.info() != Eigen::Success)
                throw NumericalError("reconstruct_a2: block Cholesky failed");
        }
        Mz.row(k) = (K * llt.solve(Z.row(k).transpose())).transpose();
    }
    const Matrix Mstar = U * Mz;  // posterior mean of G* given Y*
    Matrix Ghat = model.Rtilde.triangularView<Eigen::Lower>().solve(Mstar);
    Ghat.colwise() += cd.means;
    return {Ghat, Y - Ghat};
}

}  // namespace igplvm::a2
