#include "igplvm/igplvm_a1.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>

namespace igplvm::a1 {

void validate_triangular_factor(const Matrix& T, const char* name) {
    if (T.rows() != T.cols())
        throw DomainError(std::string(name) + " must be square");
    for (Eigen::Index i = 0; i < T.rows(); ++i) {
        if (!(T(i, i) > 0.0))
            throw DomainError(std::string(name) + " must have a strictly positive diagonal");
        for (Eigen::Index j = i + 1; j < T.cols(); ++j)
            if (T(i, j) != 0.0)
                throw DomainError(std::string(name) + " must be lower-triangular");
    }
}

LoglikA1 loglik_a1(const Matrix& Y, const Matrix& X, const Matrix& Ltilde,
                   double r, double gamma) {
    const auto D = Y.rows();
    const auto N = Y.cols();
    validate_triangular_factor(Ltilde, "Ltilde");

    const Matrix D2 = kernels::squared_distances(X);
    const Matrix E = r * (-0.5 * gamma * D2.array()).exp().matrix();
    Matrix K = E;
    K.diagonal().array() += 1.0;
    Eigen::LLT<Matrix> llt(K);
    if (llt.info() != Eigen::Success)
        throw NumericalError("loglik_a1: kernel Cholesky failed (r=" + std::to_string(r) +
                             ", gamma=" + std::to_string(gamma) + ")");

    const Matrix YI = Ltilde * Y;                // D x N
    const Matrix A = llt.solve(YI.transpose()); // N x D
    const double quad = YI.transpose().cwiseProduct(A).sum();
    const double logdetK = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double logdetLt = Ltilde.diagonal().array().log().sum();

    LoglikA1 out;
    out.value = static_cast<double>(N) * logdetLt - 0.5 * quad
                - 0.5 * static_cast<double>(D) * logdetK
                - 0.5 * static_cast<double>(D * N) * std::log(2.0 * std::numbers::pi);

    const Matrix Kinv = llt.solve(Matrix::Identity(N, N));
    const Matrix S = 0.5 * (A * A.transpose() - static_cast<double>(D) * Kinv);
    out.grad_log_r = S.cwiseProduct(E).sum();
    out.grad_log_gamma = S.cwiseProduct(-0.5 * gamma * D2.cwiseProduct(E)).sum();
    out.grad_latents = kernels::latent_gradient(S, X, E, gamma);
    return out;
}

Matrix closed_form_Ltilde(const Matrix& Y, const Matrix& K) {
    const auto D = Y.rows();
    const auto N = Y.cols();
    Eigen::LLT<Matrix> lltK(K);
    if (lltK.info() != Eigen::Success)
        throw NumericalError("closed_form_Ltilde: kernel is not positive definite");

    Matrix M = Y * lltK.solve(Y.transpose());
    Eigen::LLT<Matrix> lltM(M / static_cast<double>(N));
    if (lltM.info() != Eigen::Success) {
        const double jitter = 1e-8 * M.trace() / static_cast<double>(D);
        std::cerr << "closed_form_Ltilde: Y K^{-1} Y^T near singular, adding jitter "
                  << jitter << "\n";
        M.diagonal().array() += jitter * static_cast<double>(N);
        lltM.compute(M / static_cast<double>(N));
        if (lltM.info() != Eigen::Success)
            throw NumericalError(
                "closed_form_Ltilde: Y K^{-1} Y^T is singular; reduce D or check the "
                "data rank");
    }
    const Matrix C = lltM.matrixL();
    return C.triangularView<Eigen::Lower>().solve(Matrix::Identity(D, D));
}

ModelA1 fit_a1(const Matrix& Y_raw, int d, const FitConfig& cfg) {
    const auto D = Y_raw.rows();
    const auto N = Y_raw.cols();
    if (N <= D) throw DomainError("fit_a1: need N > D");
    const Matrix Y = center(Y_raw).values;

    Matrix X = initial_latents(Y, d, cfg);
    double log_r = 0.0, log_gamma = 0.0;
    dynamics::DynamicsParams dyn = cfg.dyn_init;
    Matrix Ltilde = closed_form_Ltilde(
        Y, kernels::rbf_plus_unit_noise(X, {std::exp(log_r), std::exp(log_gamma)}));

    const auto dn = static_cast<Eigen::Index>(d) * N;
    const Eigen::Index ndyn = cfg.with_dynamics ? 3 : 0;

    auto objective_at = [&](const Matrix& Xc, double r, double gamma,
                            const dynamics::DynamicsParams& dp) {
        double v = loglik_a1(Y, Xc, Ltilde, r, gamma).value;
        if (cfg.with_dynamics) v += dynamics::dyn_log_prior(Xc, dp).value;
        return v;
    };

    optim::ScgConfig block_cfg = cfg.scg;
    block_cfg.max_iters = cfg.scg_block_iters;

    double best = objective_at(X, std::exp(log_r), std::exp(log_gamma), dyn);
    ModelA1 model{X, Ltilde, std::exp(log_r), std::exp(log_gamma), best, false, 0, std::nullopt};

    double prev = best;
    bool converged = false;
    int outer = 0;
    for (; outer < cfg.max_outer; ++outer) {
        Vector p(dn + 2 + ndyn);
        p.head(dn) = Eigen::Map<const Vector>(X.data(), dn);
        p[dn] = log_r;
        p[dn + 1] = log_gamma;
        if (cfg.with_dynamics) {
            p[dn + 2] = std::log(dyn.a);
            p[dn + 3] = std::log(dyn.b);
            p[dn + 4] = std::log(dyn.w);
        }

        auto obj = [&](const Vector& q, Vector& grad) -> double {
            grad.resize(q.size());
            try {
                const Matrix Xc = Eigen::Map<const Matrix>(q.data(), d, N);
                const double r = std::exp(q[dn]);
                const double gamma = std::exp(q[dn + 1]);
                const LoglikA1 ll = loglik_a1(Y, Xc, Ltilde, r, gamma);
                double value = ll.value;
                Eigen::Map<Matrix> gX(grad.data(), d, N);
                gX = ll.grad_latents;
                grad[dn] = ll.grad_log_r;
                grad[dn + 1] = ll.grad_log_gamma;
                if (cfg.with_dynamics) {
                    dynamics::DynamicsParams dp{std::exp(q[dn + 2]), std::exp(q[dn + 3]),
                                                std::exp(q[dn + 4]), 1};
                    const auto prior = dynamics::dyn_log_prior(Xc, dp);
                    value += prior.value;
                    gX += prior.grad_latents;
                    grad[dn + 2] = prior.grad_log_a;
                    grad[dn + 3] = prior.grad_log_b;
                    grad[dn + 4] = prior.grad_log_w;
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
        log_r = pstar[dn];
        log_gamma = pstar[dn + 1];
        if (cfg.with_dynamics)
            dyn = {std::exp(pstar[dn + 2]), std::exp(pstar[dn + 3]),
                   std::exp(pstar[dn + 4]), 1};

        Ltilde = closed_form_Ltilde(
            Y, kernels::rbf_plus_unit_noise(X, {std::exp(log_r), std::exp(log_gamma)}));
        const double cur = objective_at(X, std::exp(log_r), std::exp(log_gamma), dyn);

        if (cur < prev - 1e-8 * std::max(1.0, std::abs(prev)))
            std::cerr << "fit_a1: non-monotone outer step (" << prev << " -> " << cur
                      << "), keeping best iterate\n";
        if (cur > best) {
            best = cur;
            model = ModelA1{X, Ltilde, std::exp(log_r), std::exp(log_gamma),
                            best, false, 0, std::nullopt};
            if (cfg.with_dynamics) model.dyn = dyn;
        }
        const double rel = std::abs(cur - prev) / std::max(1.0, std::abs(prev));
        prev = cur;
        if (rel < cfg.outer_tol) {
            converged = true;
            ++outer;
            break;
        }
    }
    model.converged = converged;
    model.outer_iters = outer;
    return model;
}

std::pair<Matrix, Matrix> reconstruct_a1(const ModelA1& model, const Matrix& Y) {
    const CenteredData cd = center(Y);
    const Matrix YI = model.Ltilde * cd.values;

    const Matrix E = kernels::rbf_smooth(model.latents, model.r, model.gamma);
    Matrix K = E;
    K.diagonal().array() += 1.0;
    Eigen::LLT<Matrix> llt(K);
    if (llt.info() != Eigen::Success)
        throw NumericalError("reconstruct_a1: kernel Cholesky failed");
    const Matrix Mpost = (E * llt.solve(YI.transpose())).transpose();  // D x N

    // Ghat = L * Mpost, with L = Ltilde^{-1}; means re-added so Ghat + Ehat = Y
    Matrix Ghat = model.Ltilde.triangularView<Eigen::Lower>().solve(Mpost);
    Ghat.colwise() += cd.means;
    return {Ghat, Y - Ghat};
}

}  // namespace igplvm::a1
