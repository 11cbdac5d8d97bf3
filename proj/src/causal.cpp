#include "igplvm/causal.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

namespace igplvm::causal {

GaussianityResult gaussianity_test(const Matrix& E, double alpha) {
    const auto D = E.rows();
    const auto N = E.cols();
    if (N < 20) throw DomainError("gaussianity_test: need at least 20 samples");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw DomainError("gaussianity_test: alpha must be in (0, 1)");

    GaussianityResult out;
    const double level = alpha / static_cast<double>(D);
    for (Eigen::Index i = 0; i < D; ++i) {
        const Vector x = E.row(i).transpose();
        const double mean = x.mean();
        const Vector c = x.array() - mean;
        const double m2 = c.array().square().mean();
        const double m3 = c.array().cube().mean();
        const double m4 = c.array().square().square().mean();
        const double skew = m3 / std::pow(m2, 1.5);
        const double kurt = m4 / (m2 * m2) - 3.0;
        const double jb = static_cast<double>(N) / 6.0 * (skew * skew + 0.25 * kurt * kurt);
        const double p = std::exp(-0.5 * jb);  // chi^2(2) tail
        out.pvalues.push_back(p);
        out.reject.push_back(p < level);
        out.non_gaussian = out.non_gaussian || p < level;
    }
    return out;
}

namespace {

Matrix symmetric_decorrelate(const Matrix& W) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(W * W.transpose());
    const Vector ev = eig.eigenvalues().cwiseMax(1e-300);
    return eig.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
           eig.eigenvectors().transpose() * W;
}

}  // namespace

MixingEstimate fastica(const Matrix& E, unsigned seed, const FastIcaConfig& cfg) {
    const auto D = E.rows();
    const auto N = E.cols();
    require_finite(E, "residual matrix");

    const Matrix Ec = E.colwise() - Vector(E.rowwise().mean());
    const Matrix C = (Ec * Ec.transpose()) / static_cast<double>(N);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(C);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
        throw NumericalError("fastica: residual covariance is rank deficient");
    const Matrix white = eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                         eig.eigenvectors().transpose();
    const Matrix Xw = white * Ec;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    MixingEstimate out;
    for (int restart = 0; restart <= cfg.max_restarts; ++restart) {
        Matrix W(D, D);
        if (restart == 0 && D > 0) {
            W.setIdentity();
        } else {
            for (Eigen::Index i = 0; i < D; ++i)
                for (Eigen::Index j = 0; j < D; ++j) W(i, j) = gauss(rng);
        }
        W = symmetric_decorrelate(W);

        bool converged = false;
        int sweep = 0;
        for (; sweep < cfg.max_sweeps; ++sweep) {
            const Matrix WX = W * Xw;
            const Matrix G = WX.array().tanh();
            const Vector gprime_mean = (1.0 - G.array().square()).rowwise().mean();
            Matrix Wnew = (G * Xw.transpose()) / static_cast<double>(N) -
                          gprime_mean.asDiagonal() * W;
            Wnew = symmetric_decorrelate(Wnew);
            const double delta =
                ((Wnew * W.transpose()).diagonal().cwiseAbs().array() - 1.0)
                    .abs()
                    .maxCoeff();
            W = Wnew;
            if (delta < cfg.tol) {
                converged = true;
                ++sweep;
                break;
            }
        }
        if (converged) {
            out.W = W * white;
            out.sources = out.W * Ec;
            out.sweeps = sweep;
            out.converged = true;
            return out;
        }
    }
    throw NumericalError("fastica: no convergence after restarts");
}

namespace {

// All permutations of 0..D-1 for small D, via std::next_permutation.
template <typename F>
void for_each_permutation(int D, F&& f) {
    std::vector<int> perm(D);
    std::iota(perm.begin(), perm.end(), 0);
    do {
        f(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
}

// Sum of squares strictly above the diagonal of B under ordering `order`
// (order[k] = original index placed at position k).
double upper_mass_for_order(const Matrix& B, const std::vector<int>& order) {
    double mass = 0.0;
    const int D = static_cast<int>(order.size());
    for (int i = 0; i < D; ++i)
        for (int j = i + 1; j < D; ++j) {
            const double v = B(order[i], order[j]);
            mass += v * v;
        }
    return mass;
}

std::vector<int> best_causal_order(const Matrix& B) {
    const int D = static_cast<int>(B.rows());
    std::vector<int> best(D);
    std::iota(best.begin(), best.end(), 0);
    if (D <= 8) {
        double best_mass = upper_mass_for_order(B, best);
        for_each_permutation(D, [&](const std::vector<int>& perm) {
            const double m = upper_mass_for_order(B, perm);
            if (m < best_mass) {
                best_mass = m;
                best = perm;
            }
        });
        return best;
    }
    // greedy: repeatedly pick the variable least influenced by the rest
    std::vector<int> remaining(D), order;
    std::iota(remaining.begin(), remaining.end(), 0);
    while (!remaining.empty()) {
        int pick = 0;
        double pick_mass = std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < remaining.size(); ++k) {
            double m = 0.0;
            for (int j : remaining)
                if (j != remaining[k]) m += B(remaining[k], j) * B(remaining[k], j);
            if (m < pick_mass) {
                pick_mass = m;
                pick = static_cast<int>(k);
            }
        }
        order.push_back(remaining[pick]);
        remaining.erase(remaining.begin() + pick);
    }
    return order;
}

}  // namespace

InfluenceMatrix lingam_from_unmixing(const Matrix& W) {
    const int D = static_cast<int>(W.rows());
    if (W.rows() != W.cols()) throw DomainError("lingam: W must be square");
    require_finite(W, "unmixing matrix");

    // step 1: permute rows to minimize sum(1/|w_ii|)
    std::vector<int> row_perm(D);
    std::iota(row_perm.begin(), row_perm.end(), 0);
    double best_cost = std::numeric_limits<double>::infinity();
    bool found = false;
    if (D <= 8) {
        for_each_permutation(D, [&](const std::vector<int>& perm) {
            double cost = 0.0;
            bool ok = true;
            for (int i = 0; i < D && ok; ++i) {
                const double v = std::abs(W(perm[i], i));
                if (v == 0.0)
                    ok = false;
                else
                    cost += 1.0 / v;
            }
            if (ok && cost < best_cost) {
                best_cost = cost;
                row_perm = perm;
                found = true;
            }
        });
    } else {
        // greedy assignment on largest |w| first
        std::vector<bool> row_used(D, false), col_used(D, false);
        std::vector<std::tuple<double, int, int>> entries;
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j)
                entries.emplace_back(std::abs(W(i, j)), i, j);
        std::sort(entries.rbegin(), entries.rend());
        int assigned = 0;
        for (const auto& [v, i, j] : entries) {
            if (v == 0.0) break;
            if (row_used[i] || col_used[j]) continue;
            row_perm[j] = i;
            row_used[i] = col_used[j] = true;
            ++assigned;
        }
        found = assigned == D;
    }
    if (!found)
        throw NumericalError(
            "lingam: no row permutation with a nonzero diagonal; the data do not "
            "follow a LiNGAM model");

    // step 2: rescale rows to unit diagonal; step 3: B = I - W'
    Matrix Wp(D, D);
    for (int i = 0; i < D; ++i) Wp.row(i) = W.row(row_perm[i]) / W(row_perm[i], i);
    Matrix B = Matrix::Identity(D, D) - Wp;
    B.diagonal().setZero();

    // step 4: causal order minimizing the mass above the diagonal
    InfluenceMatrix out;
    out.B = B;
    out.order = best_causal_order(B);
    out.upper_mass = upper_mass_for_order(B, out.order);
    return out;
}

InfluenceMatrix prune_influences(const InfluenceMatrix& infl, double threshold) {
    if (threshold < 0.0) throw DomainError("prune_influences: threshold must be >= 0");
    if (threshold == 0.0) return infl;

    InfluenceMatrix out;
    out.B = (infl.B.cwiseAbs().array() < threshold)
                .select(Matrix::Zero(infl.B.rows(), infl.B.cols()), infl.B);
    out.B.diagonal().setZero();
    out.order = best_causal_order(out.B);
    out.upper_mass = upper_mass_for_order(out.B, out.order);
    out.prune_threshold = threshold;
    // drop edges inconsistent with the recovered order so B is acyclic
    const int D = static_cast<int>(out.B.rows());
    for (int i = 0; i < D; ++i)
        for (int j = i + 1; j < D; ++j) out.B(out.order[i], out.order[j]) = 0.0;
    return out;
}

MarkovNetwork precision_network(const Matrix& E, double threshold) {
    const auto D = E.rows();
    const auto N = E.cols();
    Matrix Ec = E.colwise() - Vector(E.rowwise().mean());
    for (Eigen::Index i = 0; i < D; ++i) {
        const double sd = std::sqrt(Ec.row(i).squaredNorm() / static_cast<double>(N));
        if (sd > 0.0) Ec.row(i) /= sd;
    }
    Matrix C = (Ec * Ec.transpose()) / static_cast<double>(N);
    Eigen::LLT<Matrix> llt(C);
    if (llt.info() != Eigen::Success) {
        const double ridge = 1e-6 * C.trace() / static_cast<double>(D);
        std::cerr << "precision_network: singular covariance, adding ridge " << ridge
                  << "\n";
        C.diagonal().array() += ridge;
        llt.compute(C);
        if (llt.info() != Eigen::Success)
            throw NumericalError("precision_network: covariance not invertible");
    }

    MarkovNetwork out;
    out.precision = llt.solve(Matrix::Identity(D, D));
    out.threshold = threshold;
    for (Eigen::Index i = 0; i < D; ++i)
        for (Eigen::Index j = i + 1; j < D; ++j) {
            const double w = -out.precision(i, j) /
                             std::sqrt(out.precision(i, i) * out.precision(j, j));
            if (std::abs(w) >= threshold)
                out.edges.push_back({static_cast<int>(i), static_cast<int>(j), w});
        }
    return out;
}

double amari_index(const Matrix& P) {
    const auto D = P.rows();
    if (P.rows() != P.cols()) throw DomainError("amari_index: matrix must be square");
    if (D < 2) return 0.0;
    const Matrix A = P.cwiseAbs();
    const Vector row_max = A.rowwise().maxCoeff();
    const Vector col_max = A.colwise().maxCoeff();
    if (row_max.minCoeff() <= 0.0 || col_max.minCoeff() <= 0.0)
        throw DomainError("amari_index: zero row or column");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < D; ++i) sum += A.row(i).sum() / row_max[i] - 1.0;
    for (Eigen::Index j = 0; j < D; ++j) sum += A.col(j).sum() / col_max[j] - 1.0;
    return sum / (2.0 * static_cast<double>(D) * static_cast<double>(D - 1));
}

double mse_g(const Matrix& Ghat, const Matrix& Gtrue) {
    if (Ghat.rows() != Gtrue.rows() || Ghat.cols() != Gtrue.cols())
        throw DomainError("mse_g: shape mismatch");
    Matrix Diff = Ghat - Gtrue;
    Diff.colwise() -= Vector(Diff.rowwise().mean());
    return Diff.squaredNorm() / static_cast<double>(Diff.size());
}

CausalReport discover(const Matrix& E, double alpha, double threshold, unsigned seed) {
    CausalReport report;
    const auto D = E.rows();
    if (D == 1) {
        report.gaussianity = gaussianity_test(E, alpha);
        report.lingam_branch = false;
        MarkovNetwork net;
        net.precision = Matrix::Identity(1, 1);
        net.threshold = threshold;
        report.network = net;
        InfluenceMatrix infl;
        infl.B = Matrix::Zero(1, 1);
        infl.order = {0};
        infl.prune_threshold = threshold;
        report.influence = infl;
        return report;
    }
    report.gaussianity = gaussianity_test(E, alpha);
    if (report.gaussianity.non_gaussian) {
        report.lingam_branch = true;
        report.ica = fastica(E, seed);
        report.influence =
            prune_influences(lingam_from_unmixing(report.ica->W), threshold);
    } else {
        report.network = precision_network(E, threshold);
    }
    return report;
}

}  // namespace igplvm::causal
