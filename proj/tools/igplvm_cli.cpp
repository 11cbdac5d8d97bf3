// Batch CLI: simulate / fit / discover / evaluate.
//
// CSV convention for data matrices: rows are time points, columns are
// dimensions (the transpose of the internal D x N layout). Square matrices
// (A, B, noise factors, precision) are stored plain, row-major.

#include "igplvm/causal.hpp"
#include "igplvm/csv.hpp"
#include "igplvm/gplvm.hpp"
#include "igplvm/igplvm_a1.hpp"
#include "igplvm/igplvm_a2.hpp"
#include "igplvm/simgen.hpp"
#include "igplvm/types.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace igplvm;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

Matrix matrix_from_json(const json& rows) {
    const auto r = rows.size();
    const auto c = rows.at(0).size();
    Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) m(static_cast<Eigen::Index>(i),
                                         static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

// FNV-1a over the CSV text representation; used as the data checksum
uint64_t checksum(const Matrix& m) {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&](double v) {
        uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        for (int k = 0; k < 8; ++k) {
            h ^= (bits >> (8 * k)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) mix(m(i, j));
    return h;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    return json::parse(in);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    // probe writability
    const fs::path probe = dir / ".write_probe";
    std::ofstream f(probe);
    if (!f) throw std::runtime_error("output directory not writable: " + dir.string());
    f.close();
    fs::remove(probe, ec);
}

simgen::SimSpec spec_from_json(const json& j) {
    simgen::SimSpec s;
    if (j.contains("N")) s.N = j["N"];
    if (j.contains("D")) s.D = j["D"];
    if (j.contains("d")) s.d = j["d"];
    if (j.contains("cycles")) s.cycles = j["cycles"];
    if (j.contains("exponent_min")) s.exponent_min = j["exponent_min"];
    if (j.contains("exponent_max")) s.exponent_max = j["exponent_max"];
    if (j.contains("source_var_min")) s.source_var_min = j["source_var_min"];
    if (j.contains("source_var_max")) s.source_var_max = j["source_var_max"];
    if (j.contains("mixing_min")) s.mixing_min = j["mixing_min"];
    if (j.contains("mixing_max")) s.mixing_max = j["mixing_max"];
    if (j.contains("similar_rows")) s.similar_rows = j["similar_rows"];
    if (j.contains("row_perturbation")) s.row_perturbation = j["row_perturbation"];
    if (j.contains("angle_jitter")) s.angle_jitter = j["angle_jitter"];
    return s;
}

json spec_to_json(const simgen::SimSpec& s) {
    return json{{"N", s.N},
                {"D", s.D},
                {"d", s.d},
                {"cycles", s.cycles},
                {"exponent_min", s.exponent_min},
                {"exponent_max", s.exponent_max},
                {"source_var_min", s.source_var_min},
                {"source_var_max", s.source_var_max},
                {"mixing_min", s.mixing_min},
                {"mixing_max", s.mixing_max},
                {"similar_rows", s.similar_rows},
                {"row_perturbation", s.row_perturbation},
                {"angle_jitter", s.angle_jitter}};
}

int cmd_simulate(const std::string& spec_file, unsigned seed, const fs::path& out) {
    simgen::SimSpec spec;
    if (!spec_file.empty()) spec = spec_from_json(read_json(spec_file));
    ensure_dir(out);
    const auto data = simgen::generate(spec, seed);

    csv::write_matrix(out / "Y.csv", data.Y.transpose());
    csv::write_matrix(out / "X_true.csv", data.X_true.transpose());
    csv::write_matrix(out / "G_true.csv", data.G_true.transpose());
    csv::write_matrix(out / "A.csv", data.A);
    csv::write_matrix(out / "B_implied.csv", data.B_implied);
    write_json(out / "spec.json", spec_to_json(spec));
    std::ofstream(out / "seed.txt") << seed << "\n";
    std::cout << "wrote dataset bundle (" << spec.D << " x " << spec.N << ") to "
              << out.string() << "\n";
    return kExitOk;
}

struct FitOptions {
    std::string model = "igplvm1";
    int latent_dim = 2;
    bool dynamics = false;
    int iters = 0;  // 0 = defaults
    unsigned seed = 1;
    std::string pretransform;
};

int cmd_fit(const std::string& data_file, const FitOptions& opt, const fs::path& out) {
    Matrix Y = csv::read_matrix(data_file).transpose();  // to D x N
    const auto D = Y.rows();
    const auto N = Y.cols();
    if (opt.latent_dim >= D)
        throw DomainError("latent dimension d = " + std::to_string(opt.latent_dim) +
                          " must be smaller than the data dimension D = " +
                          std::to_string(D));
    if (N < D)
        throw DomainError("need at least as many samples as dimensions (N = " +
                          std::to_string(N) + ", D = " + std::to_string(D) +
                          "); the noise-factor update requires full row rank");

    if (!opt.pretransform.empty()) {
        const Matrix T = csv::read_matrix(opt.pretransform);
        if (T.rows() != D || T.cols() != D)
            throw DomainError("pretransform must be " + std::to_string(D) + " x " +
                              std::to_string(D));
        Y = T * Y;
    }

    FitConfig cfg;
    const bool wants_dynamics =
        opt.dynamics || opt.model == "gpdm" || opt.model == "igpdm1" ||
        opt.model == "igpdm2";
    cfg.with_dynamics = wants_dynamics;
    if (opt.iters > 0) {
        cfg.max_outer = opt.iters;
        cfg.max_sweeps_a2 = opt.iters;
        cfg.scg.max_iters = opt.iters * cfg.scg_block_iters;
    }
    if (const char* cap = std::getenv("IGPLVM_MAX_DN")) cfg.max_dn = std::atoi(cap);

    ensure_dir(out);
    const auto t0 = std::chrono::steady_clock::now();

    json artifact;
    artifact["library_version"] = kVersion;
    artifact["data_checksum"] = checksum(Y);
    artifact["config"] = {{"model", opt.model},
                          {"latent_dim", opt.latent_dim},
                          {"dynamics", wants_dynamics},
                          {"iters", opt.iters},
                          {"seed", opt.seed}};

    Matrix latents, residuals, ghat, noise_factor;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;

    if (opt.model == "gplvm" || opt.model == "gpdm") {
        const CenteredData cd = center(Y);
        const auto model = fit_gplvm(cd.values, opt.latent_dim, cfg);
        std::tie(ghat, residuals) = posterior_mean_and_residuals(model, cd.values);
        ghat.colwise() += cd.means;
        residuals = Y - ghat;
        latents = model.latents;
        loglik = model.loglik;
        converged = model.converged;
        noise_factor = Matrix(model.beta.size() == 1
                                  ? Matrix(model.beta[0] * Matrix::Identity(D, D))
                                  : Matrix(model.beta.asDiagonal()));
        artifact["model"] = {{"variant", opt.model},
                             {"r", model.r},
                             {"gamma", model.gamma},
                             {"beta", std::vector<double>(model.beta.data(),
                                                          model.beta.data() + model.beta.size())},
                             {"loglik", model.loglik}};
        if (model.dyn)
            artifact["model"]["dynamics"] = {{"a", model.dyn->a},
                                             {"b", model.dyn->b},
                                             {"w", model.dyn->w}};
    } else if (opt.model == "igplvm1" || opt.model == "igpdm1") {
        const auto model = a1::fit_a1(Y, opt.latent_dim, cfg);
        std::tie(ghat, residuals) = a1::reconstruct_a1(model, Y);
        latents = model.latents;
        loglik = model.loglik;
        converged = model.converged;
        iterations = model.outer_iters;
        noise_factor = model.Ltilde.triangularView<Eigen::Lower>().solve(
            Matrix::Identity(D, D));  // L = Ltilde^{-1}
        artifact["model"] = {{"variant", opt.model},
                             {"r", model.r},
                             {"gamma", model.gamma},
                             {"Ltilde", matrix_to_json(model.Ltilde)},
                             {"loglik", model.loglik}};
        if (model.dyn)
            artifact["model"]["dynamics"] = {{"a", model.dyn->a},
                                             {"b", model.dyn->b},
                                             {"w", model.dyn->w}};
    } else if (opt.model == "igplvm2" || opt.model == "igpdm2") {
        const auto model = a2::fit_a2(Y, opt.latent_dim, cfg);
        std::tie(ghat, residuals) = a2::reconstruct_a2(model, Y);
        latents = model.latents;
        loglik = model.loglik;
        converged = model.converged;
        iterations = model.sweeps;
        const Matrix R = model.Rtilde.triangularView<Eigen::Lower>().solve(
            Matrix::Identity(D, D));
        noise_factor = R * model.LR;  // L = R * L_R
        artifact["model"] = {{"variant", opt.model},
                             {"gamma", model.gamma},
                             {"Rtilde", matrix_to_json(model.Rtilde)},
                             {"LR", matrix_to_json(model.LR)},
                             {"loglik", model.loglik}};
        if (model.dyn)
            artifact["model"]["dynamics"] = {{"a", model.dyn->a},
                                             {"b", model.dyn->b},
                                             {"w", model.dyn->w}};
    } else {
        std::cerr << "unknown model variant: " << opt.model << "\n";
        return kExitUsage;
    }

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    artifact["model"]["latents"] = matrix_to_json(latents);
    artifact["residuals"] = matrix_to_json(residuals);
    write_json(out / "model.json", artifact);
    csv::write_matrix(out / "latents.csv", latents.transpose());
    csv::write_matrix(out / "residuals.csv", residuals.transpose());
    csv::write_matrix(out / "ghat.csv", ghat.transpose());
    csv::write_matrix(out / "noise_factor.csv", noise_factor);
    write_json(out / "fit_report.json",
               json{{"loglik", loglik},
                    {"iterations", iterations},
                    {"converged", converged},
                    {"runtime_seconds", secs},
                    {"config", artifact["config"]}});
    std::cout << "fit " << opt.model << ": loglik " << loglik << ", converged "
              << (converged ? "yes" : "no") << "\n";
    return kExitOk;
}

void write_dot(const fs::path& path, const causal::CausalReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    if (report.lingam_branch) {
        out << "digraph influences {\n";
        const auto& B = report.influence->B;
        for (Eigen::Index i = 0; i < B.rows(); ++i)
            for (Eigen::Index j = 0; j < B.cols(); ++j)
                if (B(i, j) != 0.0)
                    out << "  y" << j + 1 << " -> y" << i + 1 << " [label=\"" << B(i, j)
                        << "\"];\n";
        out << "}\n";
    } else {
        out << "graph markov {\n";
        if (report.network)
            for (const auto& e : report.network->edges)
                out << "  y" << e.i + 1 << " -- y" << e.j + 1 << " [label=\"" << e.weight
                    << "\"];\n";
        out << "}\n";
    }
}

int cmd_discover(const std::string& input, double alpha, double prune_threshold,
                 double edge_threshold, unsigned seed, const fs::path& out) {
    Matrix E;
    if (fs::path(input).extension() == ".json") {
        const json artifact = read_json(input);
        if (!artifact.contains("residuals"))
            throw DomainError(input + ": artifact has no residuals");
        E = matrix_from_json(artifact["residuals"]);
    } else {
        E = csv::read_matrix(input).transpose();  // to D x N
    }
    ensure_dir(out);

    causal::CausalReport report;
    const auto D = E.rows();
    const double threshold =
        [&] {
            // the branch decides which threshold applies
            const auto g = causal::gaussianity_test(E, alpha);
            return g.non_gaussian ? prune_threshold : edge_threshold;
        }();
    report = causal::discover(E, alpha, threshold, seed);

    json rep;
    rep["branch"] = report.lingam_branch ? "lingam" : "markov-network";
    rep["alpha"] = alpha;
    rep["pvalues"] = report.gaussianity.pvalues;
    json graph;
    graph["directed"] = report.lingam_branch;
    json edges = json::array();
    if (report.lingam_branch) {
        rep["causal_order"] = report.influence->order;
        rep["upper_triangular_mass"] = report.influence->upper_mass;
        rep["prune_threshold"] = prune_threshold;
        rep["unmixing"] = matrix_to_json(report.ica->W);
        csv::write_matrix(out / "B.csv", report.influence->B);
        const auto& B = report.influence->B;
        for (Eigen::Index i = 0; i < B.rows(); ++i)
            for (Eigen::Index j = 0; j < B.cols(); ++j)
                if (B(i, j) != 0.0)
                    edges.push_back({{"from", j}, {"to", i}, {"weight", B(i, j)}});
    } else {
        rep["edge_threshold"] = edge_threshold;
        if (report.network) {
            csv::write_matrix(out / "precision.csv", report.network->precision);
            for (const auto& e : report.network->edges)
                edges.push_back({{"i", e.i}, {"j", e.j}, {"weight", e.weight}});
        }
    }
    graph["edges"] = edges;
    write_json(out / "causal_report.json", rep);
    write_json(out / "graph.json", graph);
    write_dot(out / "graph.dot", report);
    std::cout << "discover: " << rep["branch"].get<std::string>() << " branch, "
              << edges.size() << " edges (D = " << D << ")\n";
    return kExitOk;
}

int cmd_evaluate(const fs::path& truth_dir, const std::vector<fs::path>& run_dirs,
                 const fs::path& out) {
    ensure_dir(out);
    ensure_dir(out / "plotdata");

    simgen::SyntheticDataset data;
    data.Y = csv::read_matrix(truth_dir / "Y.csv").transpose();
    data.X_true = csv::read_matrix(truth_dir / "X_true.csv").transpose();
    data.G_true = csv::read_matrix(truth_dir / "G_true.csv").transpose();
    data.A = csv::read_matrix(truth_dir / "A.csv");
    data.B_implied = csv::read_matrix(truth_dir / "B_implied.csv");

    std::vector<simgen::RunMetrics> all;
    std::vector<double> runtimes;
    for (const auto& run : run_dirs) {
        const Matrix E = csv::read_matrix(run / "residuals.csv").transpose();
        if (E.rows() != data.Y.rows() || E.cols() != data.Y.cols())
            throw DomainError("residual shape " + std::to_string(E.rows()) + "x" +
                              std::to_string(E.cols()) + " does not match truth " +
                              std::to_string(data.Y.rows()) + "x" +
                              std::to_string(data.Y.cols()));
        const Matrix Ghat = csv::read_matrix(run / "ghat.csv").transpose();

        const json rep = read_json(run / "causal_report.json");
        causal::InfluenceMatrix infl;
        Matrix W;
        if (rep.contains("unmixing")) {
            W = matrix_from_json(rep["unmixing"]);
            infl.B = csv::read_matrix(run / "B.csv");
        } else {
            // Gaussian branch: score the unmixing implied by ICA anyway
            const auto ica = causal::fastica(E, 0);
            W = ica.W;
            infl.B = Matrix::Zero(data.Y.rows(), data.Y.rows());
        }
        all.push_back(simgen::evaluate_run(data, Ghat, W, infl));
        const json fit = read_json(run / "fit_report.json");
        runtimes.push_back(fit.value("runtime_seconds", 0.0));

        // plottable latent scatter from the first run
        if (&run == &run_dirs.front())
            fs::copy_file(run / "latents.csv", out / "plotdata" / "latent_scatter.csv",
                          fs::copy_options::overwrite_existing);
        if (fs::exists(run / "precision.csv") && &run == &run_dirs.front())
            fs::copy_file(run / "precision.csv",
                          out / "plotdata" / "precision_heatmap.csv",
                          fs::copy_options::overwrite_existing);
    }

    auto mean_std = [&](auto getter) {
        double mean = 0.0;
        for (const auto& m : all) mean += getter(m);
        mean /= static_cast<double>(all.size());
        double var = 0.0;
        for (const auto& m : all) var += std::pow(getter(m) - mean, 2);
        var = all.size() > 1 ? var / static_cast<double>(all.size() - 1) : 0.0;
        return std::make_pair(mean, std::sqrt(var));
    };
    const auto [mse_m, mse_s] = mean_std([](const auto& m) { return m.mse_g; });
    const auto [am_m, am_s] = mean_std([](const auto& m) { return m.amari; });
    const auto [pr_m, pr_s] = mean_std([](const auto& m) { return m.edge_precision; });
    const auto [rc_m, rc_s] = mean_std([](const auto& m) { return m.edge_recall; });
    double rt = 0.0;
    for (double r : runtimes) rt += r;

    write_json(out / "metrics.json", json{{"mse_g", mse_m},
                                          {"mse_g_std", mse_s},
                                          {"amari", am_m},
                                          {"amari_std", am_s},
                                          {"edge_precision", pr_m},
                                          {"edge_recall", rc_m},
                                          {"runtime_seconds", rt},
                                          {"runs", all.size()}});
    {
        std::ofstream table(out / "table.csv");
        table.precision(6);
        table << "criterion,mean,std,formatted\n";
        table << "mse_g," << mse_m << "," << mse_s << "," << mse_m << " +- " << mse_s
              << "\n";
        table << "amari," << am_m << "," << am_s << "," << am_m << " +- " << am_s << "\n";
        table << "edge_precision," << pr_m << "," << pr_s << "," << pr_m << " +- " << pr_s
              << "\n";
        table << "edge_recall," << rc_m << "," << rc_s << "," << rc_m << " +- " << rc_s
              << "\n";
    }
    std::cout << "evaluate: mse_g " << mse_m << " +- " << mse_s << ", amari " << am_m
              << " +- " << am_s << " over " << all.size() << " run(s)\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"invariant GPLVM fitting and residual-based causal discovery"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset bundle");
    std::string spec_file;
    unsigned sim_seed = 1;
    std::string sim_out = "sim";
    sim->add_option("--spec", spec_file, "JSON file overriding generator defaults");
    sim->add_option("--seed", sim_seed, "RNG seed");
    sim->add_option("--out", sim_out, "output directory")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "fit a latent variable model");
    std::string data_file, fit_out = "fit";
    FitOptions fopt;
    fit->add_option("--data", data_file, "observations CSV (rows = time)")->required();
    fit->add_option("--model", fopt.model,
                    "gplvm | igplvm1 | igplvm2 | gpdm | igpdm1 | igpdm2");
    fit->add_option("--latent-dim", fopt.latent_dim, "latent dimension d");
    fit->add_flag("--dynamics", fopt.dynamics, "add the autoregressive latent prior");
    fit->add_option("--iters", fopt.iters, "outer iterations (0 = defaults)");
    fit->add_option("--seed", fopt.seed, "RNG seed");
    fit->add_option("--pretransform", fopt.pretransform,
                    "CSV of a D x D matrix applied to the data before fitting");
    fit->add_option("--out", fit_out, "output directory")->required();

    // discover
    auto* disc = app.add_subcommand("discover", "causal discovery on residuals");
    std::string disc_in, disc_out = "discover";
    double alpha = 0.05, prune_threshold = 0.1, edge_threshold = 0.1;
    unsigned disc_seed = 0;
    disc->add_option("--input", disc_in, "residuals CSV or model.json artifact")
        ->required();
    disc->add_option("--alpha", alpha, "Gaussianity test level");
    disc->add_option("--prune-threshold", prune_threshold,
                     "influence pruning threshold (LiNGAM branch)");
    disc->add_option("--edge-threshold", edge_threshold,
                     "partial-correlation threshold (Markov branch)");
    disc->add_option("--seed", disc_seed, "ICA seed");
    disc->add_option("--out", disc_out, "output directory")->required();

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "score runs against the ground truth");
    std::string truth_dir, eval_out = "eval";
    std::vector<std::string> run_dirs;
    eval->add_option("--truth", truth_dir, "simulate output directory")->required();
    eval->add_option("--run", run_dirs, "fit+discover output directory (repeatable)")
        ->required();
    eval->add_option("--out", eval_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (sim->parsed()) return cmd_simulate(spec_file, sim_seed, sim_out);
        if (fit->parsed()) return cmd_fit(data_file, fopt, fit_out);
        if (disc->parsed())
            return cmd_discover(disc_in, alpha, prune_threshold, edge_threshold,
                                disc_seed, disc_out);
        if (eval->parsed()) {
            std::vector<fs::path> runs(run_dirs.begin(), run_dirs.end());
            return cmd_evaluate(truth_dir, runs, eval_out);
        }
    } catch (const DomainError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
