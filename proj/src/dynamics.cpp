#include "igplvm/dynamics.hpp"

#include <cmath>
#include <numbers>

namespace igplvm::dynamics {

void DynamicsParams::validate() const {
    if (order != 1) throw DomainError("dynamics: only first-order dynamics are supported");
    kernel().validate();
}

DynamicsLogPrior dyn_log_prior(const Matrix& X, const DynamicsParams& p) {
    p.validate();
    require_finite(X, "latent matrix");
    const auto d = X.rows();
    const auto N = X.cols();
    if (N < 3) throw DomainError("dynamics: need at least 3 time points");

    const Matrix Xin = X.leftCols(N - 1);
    const Matrix Xout = X.rightCols(N - 1);
    const int M = static_cast<int>(N) - 1;

    const Matrix D2 = kernels::squared_distances(Xin);
    const Matrix E = p.a * (-0.5 * p.b * D2.array()).exp().matrix();
    Matrix K = E;
    K.diagonal().array() += 1.0 / p.w;

    Eigen::LLT<Matrix> llt(K);
    if (llt.info() != Eigen::Success)
        throw NumericalError("dynamics kernel is not positive definite");

    const Matrix Kinv = llt.solve(Matrix::Identity(M, M));
    const Matrix Alpha = llt.solve(Xout.transpose());  // M x d
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double quad = (Xout.transpose().cwiseProduct(Alpha)).sum();

    DynamicsLogPrior out;
    out.value = -0.5 * static_cast<double>(d) * logdet - 0.5 * quad
                - 0.5 * static_cast<double>(d * M) * std::log(2.0 * std::numbers::pi)
                - 0.5 * X.col(0).squaredNorm()
                - 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);

    // dL/dK for L = -d/2 log|K| - 1/2 tr(Xout K^{-1} Xout^T)
    const Matrix S = 0.5 * (Alpha * Alpha.transpose() - static_cast<double>(d) * Kinv);

    out.grad_latents = Matrix::Zero(d, N);
    out.grad_latents.leftCols(M) += kernels::latent_gradient(S, Xin, E, p.b);
    out.grad_latents.rightCols(M) -= Xout * Kinv;  // d quad / d Xout
    out.grad_latents.col(0) -= X.col(0);           // prior on x_1

    out.grad_log_a = S.cwiseProduct(E).sum();                    // dK/dlog a = E
    out.grad_log_b = S.cwiseProduct(-0.5 * p.b * D2.cwiseProduct(E)).sum();
    out.grad_log_w = -S.trace() / p.w;                           // dK/dlog w = -I/w
    return out;
}

}  // namespace igplvm::dynamics
