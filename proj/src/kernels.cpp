#include "igplvm/kernels.hpp"

#include <cmath>

namespace igplvm::kernels {

void ObservationKernelParams::validate() const {
    if (!(r > 0.0) || !std::isfinite(r))
        throw DomainError("kernel signal variance r must be positive and finite");
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw DomainError("kernel inverse length-scale gamma must be positive and finite");
}

void DynamicsKernelParams::validate() const {
    if (!(a > 0.0) || !(b > 0.0) || !(w > 0.0) ||
        !std::isfinite(a) || !std::isfinite(b) || !std::isfinite(w))
        throw DomainError("dynamics kernel parameters must be positive and finite");
}

Matrix squared_distances(const Matrix& X) {
    const Vector sq = X.colwise().squaredNorm();
    Matrix D2 = (-2.0 * X.transpose() * X);
    D2.colwise() += sq;
    D2.rowwise() += sq.transpose();
    // clamp tiny negatives from cancellation; mirror for exact symmetry
    D2 = D2.cwiseMax(0.0);
    D2.diagonal().setZero();
    for (Eigen::Index s = 0; s < D2.rows(); ++s)
        for (Eigen::Index t = 0; t < s; ++t) D2(t, s) = D2(s, t);
    return D2;
}

Matrix rbf_smooth(const Matrix& X, double amp, double gamma) {
    require_finite(X, "latent matrix");
    return amp * (-0.5 * gamma * squared_distances(X).array()).exp();
}

Matrix rbf_plus_unit_noise(const Matrix& X, const ObservationKernelParams& p) {
    p.validate();
    Matrix K = rbf_smooth(X, p.r, p.gamma);
    K.diagonal().array() += 1.0;
    return K;
}

Matrix rbf_unit_amplitude(const Matrix& X, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw DomainError("gamma must be positive and finite");
    return rbf_smooth(X, 1.0, gamma);
}

Matrix dynamics_kernel(const Matrix& X, const DynamicsKernelParams& p) {
    p.validate();
    Matrix K = rbf_smooth(X, p.a, p.b);
    K.diagonal().array() += 1.0 / p.w;
    return K;
}

Matrix partial_amplitude(const Matrix& E, double amp) {
    return E / amp;
}

Matrix partial_gamma(const Matrix& E, const Matrix& sqdist) {
    return -0.5 * sqdist.cwiseProduct(E);
}

Matrix partial_latent(const Matrix& X, const Matrix& E, double gamma, int j, int t) {
    const auto n = X.cols();
    Matrix P = Matrix::Zero(n, n);
    for (Eigen::Index s = 0; s < n; ++s) {
        if (s == t) continue;
        const double v = -gamma * (X(j, t) - X(j, s)) * E(t, s);
        P(t, s) = v;
        P(s, t) = v;
    }
    return P;
}

Matrix latent_gradient(const Matrix& S, const Matrix& X, const Matrix& E, double gamma) {
    // dL/dx_{jt} = -2 gamma sum_s S[t,s] E[t,s] (x_{jt} - x_{js})
    const Matrix P = S.cwiseProduct(E);
    const Vector rowsum = P.rowwise().sum();
    Matrix G = X * P;                                 // sum_s x_{js} P[s,t]
    G -= X * rowsum.asDiagonal();
    return 2.0 * gamma * G;
}

}  // namespace igplvm::kernels
