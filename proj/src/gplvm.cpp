#include "igplvm/gplvm.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>

namespace igplvm {

CenteredData center(const Matrix& Y_raw) {
    require_finite(Y_raw, "observation matrix");
    CenteredData out;
    out.means = Y_raw.rowwise().mean();
    out.values = Y_raw.colwise() - out.means;
    return out;
}

Matrix pca_init(const Matrix& Y, int d) {
    const auto D = Y.rows();
    const auto N = Y.cols();
    if (d < 1 || d > std::min<Eigen::Index>(D, N))
        throw DomainError("pca_init: d must satisfy 1 <= d <= min(D, N)");

    const Matrix C = (Y * Y.transpose()) / static_cast<double>(N);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(C);
    if (eig.info() != Eigen::Success)
        throw NumericalError("pca_init: eigendecomposition failed");

    const Vector evals = eig.eigenvalues();  // ascending
    const double scale = std::max(evals.maxCoeff(), 0.0);
    Matrix X = Matrix::Zero(d, N);
    for (int j = 0; j < d; ++j) {
        const auto idx = D - 1 - j;
        if (evals[idx] <= 1e-12 * std::max(scale, 1.0)) {
            std::cerr << "pca_init: data rank below " << d
                      << ", filling latent dimension " << j << " with zeros\n";
            continue;
        }
        Vector v = eig.eigenvectors().col(idx);
        Eigen::Index imax;
        v.cwiseAbs().maxCoeff(&imax);
        if (v[imax] < 0.0) v = -v;
        Vector row = Y.transpose() * v;
        const double sd = std::sqrt(row.squaredNorm() / static_cast<double>(N));
        X.row(j) = row.transpose() / sd;
    }
    return X;
}

Matrix smooth_latent_init(const Matrix& X, int half_window) {
    if (half_window < 0) throw DomainError("smooth_latent_init: negative window");
    const auto d = X.rows();
    const auto N = X.cols();
    Matrix S(d, N);
    for (Eigen::Index t = 0; t < N; ++t) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, t - half_window);
        const Eigen::Index hi = std::min<Eigen::Index>(N - 1, t + half_window);
        S.col(t) = X.middleCols(lo, hi - lo + 1).rowwise().mean();
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        S.row(i).array() -= S.row(i).mean();
        const double var = S.row(i).squaredNorm() / static_cast<double>(N);
        if (var > 1e-24) S.row(i) /= std::sqrt(var);
    }
    return S;
}

Matrix initial_latents(const Matrix& Y, int d, const FitConfig& cfg) {
    Matrix X = pca_init(Y, d);
    if (!cfg.with_dynamics) return X;
    // A five-point average is enough to damp the per-sample noise the PCA
    // projection carries into the latents without erasing fast dynamics.
    const int half = cfg.init_smooth_half >= 0 ? cfg.init_smooth_half : 2;
    return half > 0 ? smooth_latent_init(X, half) : X;
}

GplvmLoglik loglik_gplvm(const Matrix& Y, const Matrix& X, double r, double gamma,
                         const Vector& beta) {
    const auto D = Y.rows();
    const auto N = Y.cols();
    if ((beta.size() != 1 && beta.size() != D) || (beta.array() <= 0.0).any())
        throw DomainError("loglik_gplvm: beta must be positive, size 1 or D");

    const Matrix D2 = kernels::squared_distances(X);
    const Matrix E = r * (-0.5 * gamma * D2.array()).exp().matrix();
    Matrix K = E;
    K.diagonal().array() += 1.0;
    Eigen::LLT<Matrix> llt(K);
    if (llt.info() != Eigen::Success)
        throw NumericalError("loglik_gplvm: kernel Cholesky failed (r=" +
                             std::to_string(r) + ", gamma=" + std::to_string(gamma) + ")");

    Matrix Yb = Y;
    if (beta.size() == 1)
        Yb /= beta[0];
    else
        Yb.array().colwise() /= beta.array();

    const Matrix A = llt.solve(Yb.transpose());  // N x D
    const double quad = Yb.transpose().cwiseProduct(A).sum();
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double sum_log_beta =
        beta.size() == 1 ? static_cast<double>(D) * std::log(beta[0])
                         : beta.array().log().sum();

    GplvmLoglik out;
    out.value = -static_cast<double>(N) * sum_log_beta - 0.5 * quad
                - 0.5 * static_cast<double>(D) * logdet
                - 0.5 * static_cast<double>(D * N) * std::log(2.0 * std::numbers::pi);

    const Matrix Kinv = llt.solve(Matrix::Identity(N, N));
    const Matrix S = 0.5 * (A * A.transpose() - static_cast<double>(D) * Kinv);
    out.grad_log_r = S.cwiseProduct(E).sum();
    out.grad_log_gamma = S.cwiseProduct(-0.5 * gamma * D2.cwiseProduct(E)).sum();
    out.grad_latents = kernels::latent_gradient(S, X, E, gamma);
    if (beta.size() == 1) {
        out.grad_log_beta = Vector::Constant(1, -static_cast<double>(N * D) + quad);
    } else {
        out.grad_log_beta = Vector(D);
        for (Eigen::Index i = 0; i < D; ++i)
            out.grad_log_beta[i] = -static_cast<double>(N) + Yb.row(i) * A.col(i);
    }
    return out;
}

namespace {

double safe_objective(const std::function<double(const Vector&, Vector&)>& raw,
                      const Vector& x, Vector& grad) {
    try {
        return raw(x, grad);
    } catch (const NumericalError&) {
        grad.setZero();
        return std::numeric_limits<double>::infinity();
    } catch (const DomainError&) {
        // parameter excursion (e.g. exp underflow to zero): reject the step
        grad.setZero();
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace

GplvmModel fit_gplvm(const Matrix& Y, int d, const FitConfig& cfg) {
    const auto D = Y.rows();
    const auto N = Y.cols();
    if (N < d + 2) throw DomainError("fit_gplvm: need N >= d + 2");

    const Matrix X0 = initial_latents(Y, d, cfg);
    const auto dn = static_cast<Eigen::Index>(d) * N;
    const Eigen::Index nbeta = cfg.scaled_noise ? D : 1;
    const Eigen::Index ndyn = cfg.with_dynamics ? 3 : 0;
    Vector p0(dn + 2 + nbeta + ndyn);
    p0.head(dn) = Eigen::Map<const Vector>(X0.data(), dn);
    p0[dn] = 0.0;      // log r
    p0[dn + 1] = 0.0;  // log gamma
    p0.segment(dn + 2, nbeta).setZero();
    if (cfg.with_dynamics) {
        p0[dn + 2 + nbeta] = std::log(cfg.dyn_init.a);
        p0[dn + 2 + nbeta + 1] = std::log(cfg.dyn_init.b);
        p0[dn + 2 + nbeta + 2] = std::log(cfg.dyn_init.w);
    }

    auto raw = [&](const Vector& p, Vector& grad) -> double {
        const Matrix X = Eigen::Map<const Matrix>(p.data(), d, N);
        const double r = std::exp(p[dn]);
        const double gamma = std::exp(p[dn + 1]);
        const Vector beta = p.segment(dn + 2, nbeta).array().exp();
        const GplvmLoglik ll = loglik_gplvm(Y, X, r, gamma, beta);
        double value = ll.value;
        grad.resize(p.size());
        Eigen::Map<Matrix> gX(grad.data(), d, N);
        gX = ll.grad_latents;
        grad[dn] = ll.grad_log_r;
        grad[dn + 1] = ll.grad_log_gamma;
        grad.segment(dn + 2, nbeta) = ll.grad_log_beta;
        if (cfg.with_dynamics) {
            dynamics::DynamicsParams dp{std::exp(p[dn + 2 + nbeta]),
                                        std::exp(p[dn + 2 + nbeta + 1]),
                                        std::exp(p[dn + 2 + nbeta + 2]), 1};
            const auto prior = dynamics::dyn_log_prior(X, dp);
            value += prior.value;
            gX += prior.grad_latents;
            grad[dn + 2 + nbeta] = prior.grad_log_a;
            grad[dn + 2 + nbeta + 1] = prior.grad_log_b;
            grad[dn + 2 + nbeta + 2] = prior.grad_log_w;
        }
        grad = -grad;
        return -value;
    };
    auto obj = [&](const Vector& x, Vector& g) { return safe_objective(raw, x, g); };

    auto [pstar, trace] = optim::scg_minimize(obj, p0, cfg.scg);

    GplvmModel model;
    model.latents = Eigen::Map<const Matrix>(pstar.data(), d, N);
    model.r = std::exp(pstar[dn]);
    model.gamma = std::exp(pstar[dn + 1]);
    model.beta = pstar.segment(dn + 2, nbeta).array().exp();
    model.loglik = -trace.final_objective;
    model.converged = trace.converged;
    if (cfg.with_dynamics)
        model.dyn = dynamics::DynamicsParams{std::exp(pstar[dn + 2 + nbeta]),
                                             std::exp(pstar[dn + 2 + nbeta + 1]),
                                             std::exp(pstar[dn + 2 + nbeta + 2]), 1};
    return model;
}

std::pair<Matrix, Matrix> posterior_mean_and_residuals(const GplvmModel& model,
                                                       const Matrix& Y) {
    const auto N = Y.cols();
    const Matrix E = kernels::rbf_smooth(model.latents, model.r, model.gamma);
    Matrix K = E;
    K.diagonal().array() += 1.0;
    Eigen::LLT<Matrix> llt(K);
    if (llt.info() != Eigen::Success)
        throw NumericalError("posterior_mean_and_residuals: kernel Cholesky failed");
    const Matrix A = llt.solve(Y.transpose());  // N x D
    const Matrix Ghat = (E * A).transpose();
    return {Ghat, Y - Ghat};
}

}  // namespace igplvm
