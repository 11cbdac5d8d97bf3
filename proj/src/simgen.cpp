#include "igplvm/simgen.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace igplvm::simgen {

void SimSpec::validate() const {
    if (N < 10) throw DomainError("simgen: N must be >= 10");
    if (d >= D || d < 1) throw DomainError("simgen: need 1 <= d < D");
    if (exponent_min < 1.0 || exponent_max > 3.0 || exponent_min > exponent_max)
        throw DomainError("simgen: exponent range must lie within [1, 3]");
    if (source_var_min <= 0.0 || source_var_min > source_var_max)
        throw DomainError("simgen: invalid source variance range");
}

namespace {

// moving-average smoothing, used for the angular jitter
Vector smooth(const Vector& v, int half_width) {
    const auto n = v.size();
    Vector out(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, t - half_width);
        const Eigen::Index hi = std::min<Eigen::Index>(n - 1, t + half_width);
        out[t] = v.segment(lo, hi - lo + 1).mean();
    }
    return out;
}

double row_sd(const Eigen::RowVectorXd& row) {
    const double mean = row.mean();
    return std::sqrt((row.array() - mean).square().mean());
}

}  // namespace

SyntheticDataset generate(const SimSpec& spec, unsigned seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    const int N = spec.N, D = spec.D, d = spec.d;
    SyntheticDataset out;

    // latent trajectory: revolutions around a circle with smoothed jitter
    Vector raw(N);
    for (int t = 0; t < N; ++t) raw[t] = gauss(rng);
    const Vector jitter = spec.angle_jitter * smooth(raw, std::max(2, N / 40));
    out.X_true = Matrix(d, N);
    for (int t = 0; t < N; ++t) {
        const double theta =
            2.0 * std::numbers::pi * spec.cycles * t / static_cast<double>(N) + jitter[t];
        for (int j = 0; j < d; ++j) {
            const double mult = static_cast<double>(j / 2 + 1);
            out.X_true(j, t) = (j % 2 == 0) ? std::cos(mult * theta) : std::sin(mult * theta);
        }
    }

    // signal: random mixtures of smooth ridge functions, unit variance per row
    out.G_true = Matrix::Zero(D, N);
    for (int i = 0; i < D; ++i) {
        for (int f = 0; f < 4; ++f) {
            Vector w(d);
            for (int j = 0; j < d; ++j) w[j] = gauss(rng);
            w.normalize();
            const double c = uniform(-1.0, 1.0);
            const Vector z = out.X_true.transpose() * w;
            for (int t = 0; t < N; ++t) {
                double v = 0.0;
                switch (f) {
                    case 0: v = z[t]; break;
                    case 1: v = z[t] * z[t]; break;
                    case 2: v = z[t] * z[t] * z[t]; break;
                    default: v = std::tanh(z[t]);
                }
                out.G_true(i, t) += c * v;
            }
        }
        const double sd = row_sd(out.G_true.row(i));
        if (sd > 0.0) out.G_true.row(i) /= sd;
    }

    // super-Gaussian sources through sign-preserving power nonlinearities
    out.S = Matrix(D, N);
    for (int i = 0; i < D; ++i) {
        const double q = uniform(spec.exponent_min, spec.exponent_max);
        const double var = uniform(spec.source_var_min, spec.source_var_max);
        for (int t = 0; t < N; ++t) {
            const double z = gauss(rng);
            out.S(i, t) = (z < 0.0 ? -1.0 : 1.0) * std::pow(std::abs(z), q);
        }
        const double sd = row_sd(out.S.row(i));
        out.S.row(i) *= std::sqrt(var) / sd;
    }

    // mixing: lower-triangular, unit diagonal. The last `similar_rows` rows
    // share a perturbed base pattern over the earlier columns, so those noise
    // components carry a strong common term and are significantly dependent.
    out.A = Matrix::Identity(D, D);
    const int nsim = std::min(spec.similar_rows, D - 1);
    const int first_sim = D - nsim;
    Vector base(std::max(first_sim, 1));
    for (Eigen::Index c = 0; c < base.size(); ++c)
        base[c] = uniform(spec.mixing_min, spec.mixing_max);
    for (int i = 1; i < D; ++i)
        for (int j = 0; j < i; ++j) {
            if (i >= first_sim)
                out.A(i, j) = (j < first_sim ? base[j] : 0.0) +
                              uniform(-spec.row_perturbation, spec.row_perturbation);
            else
                out.A(i, j) = uniform(spec.mixing_min, spec.mixing_max);
        }

    const Matrix Ainv =
        out.A.triangularView<Eigen::Lower>().solve(Matrix::Identity(D, D));
    out.B_implied = Matrix::Identity(D, D) - Ainv;
    out.Y = out.G_true + out.A * out.S;
    return out;
}

RunMetrics evaluate_run(const SyntheticDataset& data, const Matrix& Ghat,
                        const Matrix& W_unmixing,
                        const causal::InfluenceMatrix& influence) {
    const auto D = data.Y.rows();
    if (Ghat.rows() != D || Ghat.cols() != data.Y.cols())
        throw DomainError("evaluate_run: Ghat shape mismatch");

    RunMetrics m;
    m.mse_g = causal::mse_g(Ghat, data.G_true);
    m.amari = causal::amari_index(W_unmixing * data.A);

    int true_edges = 0, predicted = 0, hits = 0, spurious = 0;
    for (Eigen::Index i = 0; i < D; ++i)
        for (Eigen::Index j = 0; j < D; ++j) {
            if (i == j) continue;
            const bool truth = std::abs(data.B_implied(i, j)) > 1e-12;
            const bool pred = influence.B(i, j) != 0.0;
            true_edges += truth;
            predicted += pred;
            hits += truth && pred;
            spurious += pred && !truth;
        }
    m.edge_recall = true_edges == 0 ? 1.0 : static_cast<double>(hits) / true_edges;
    m.edge_precision = predicted == 0 ? 1.0 : static_cast<double>(hits) / predicted;
    const int non_edges = static_cast<int>(D * (D - 1)) - true_edges;
    m.false_positive_rate =
        non_edges == 0 ? 0.0 : static_cast<double>(spurious) / non_edges;
    return m;
}

}  // namespace igplvm::simgen
