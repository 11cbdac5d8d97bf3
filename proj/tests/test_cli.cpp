// Exercises the command line tool end to end through std::system.
#include "igplvm/csv.hpp"
#include "igplvm/types.hpp"

#include "oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace igplvm;

namespace {

const std::string cli = IGPLVM_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WEXITSTATUS(rc);
}

fs::path scratch() {
    static const fs::path base =
        fs::temp_directory_path() / ("igplvm_cli_" + std::to_string(::getpid()));
    fs::create_directories(base);
    return base;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = scratch() / name;
    fs::remove_all(p);
    return p;
}

void write_spec(const fs::path& path, int N, int D, int d) {
    std::ofstream out(path);
    out << json{{"N", N}, {"D", D}, {"d", d}}.dump() << "\n";
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("simulate writes the bundle and is reproducible") {
    const fs::path spec = scratch() / "spec_small.json";
    write_spec(spec, 60, 4, 2);

    const fs::path out = fresh_dir("sim_a");
    REQUIRE(run("simulate --spec " + spec.string() + " --seed 7 --out " +
                out.string()) == 0);
    for (const char* f : {"Y.csv", "X_true.csv", "G_true.csv", "A.csv",
                          "B_implied.csv", "spec.json", "seed.txt"})
        CHECK(fs::exists(out / f));

    const Matrix Y = csv::read_matrix(out / "Y.csv");
    CHECK(Y.rows() == 60);  // rows are time points
    CHECK(Y.cols() == 4);

    const fs::path out2 = fresh_dir("sim_b");
    REQUIRE(run("simulate --spec " + spec.string() + " --seed 7 --out " +
                out2.string()) == 0);
    CHECK(slurp(out / "Y.csv") == slurp(out2 / "Y.csv"));  // byte identical

    const fs::path out3 = fresh_dir("sim_c");
    REQUIRE(run("simulate --spec " + spec.string() + " --seed 8 --out " +
                out3.string()) == 0);
    CHECK(slurp(out / "Y.csv") != slurp(out3 / "Y.csv"));
}

TEST_CASE("unwritable output directory fails with the data exit code") {
    const fs::path blocker = scratch() / "blocker";
    std::ofstream(blocker) << "x";
    CHECK(run("simulate --seed 1 --out " + (blocker / "sub").string()) == 2);
}

TEST_CASE("fit validates its inputs") {
    const fs::path sim = fresh_dir("sim_fit_val");
    const fs::path spec = scratch() / "spec_val.json";
    write_spec(spec, 40, 3, 1);
    REQUIRE(run("simulate --spec " + spec.string() + " --seed 2 --out " +
                sim.string()) == 0);
    const std::string data = (sim / "Y.csv").string();

    CHECK(run("fit --data " + data + " --latent-dim 3 --out " +
              fresh_dir("fit_bad_d").string()) == 2);
    CHECK(run("fit --data " + data + " --model nonsense --out " +
              fresh_dir("fit_bad_m").string()) == 1);
    CHECK(run("fit --data missing.csv --out " + fresh_dir("fit_bad_f").string()) == 2);

    // fewer samples than dimensions
    Matrix wide = oracles::random_matrix(2, 5, 3);  // 2 time points, 5 dims
    const fs::path wide_csv = scratch() / "wide.csv";
    csv::write_matrix(wide_csv, wide);
    CHECK(run("fit --data " + wide_csv.string() + " --latent-dim 1 --out " +
              fresh_dir("fit_bad_n").string()) == 2);
}

TEST_CASE("fit produces a consistent artifact bundle") {
    const fs::path sim = fresh_dir("sim_fit");
    const fs::path spec = scratch() / "spec_fit.json";
    write_spec(spec, 60, 3, 1);
    REQUIRE(run("simulate --spec " + spec.string() + " --seed 3 --out " +
                sim.string()) == 0);

    const fs::path fit = fresh_dir("fit_a1");
    REQUIRE(run("fit --data " + (sim / "Y.csv").string() +
                " --model igplvm1 --latent-dim 1 --iters 8 --out " +
                fit.string()) == 0);
    for (const char* f : {"model.json", "latents.csv", "residuals.csv", "ghat.csv",
                          "noise_factor.csv", "fit_report.json"})
        CHECK(fs::exists(fit / f));

    const Matrix Y = csv::read_matrix(sim / "Y.csv");
    const Matrix G = csv::read_matrix(fit / "ghat.csv");
    const Matrix E = csv::read_matrix(fit / "residuals.csv");
    CHECK((G + E - Y).cwiseAbs().maxCoeff() < 1e-8);  // exact decomposition

    const Matrix X = csv::read_matrix(fit / "latents.csv");
    CHECK(X.rows() == 60);
    CHECK(X.cols() == 1);

    const json report = json::parse(std::ifstream(fit / "fit_report.json"));
    CHECK(report.contains("loglik"));
    CHECK(report["config"]["model"] == "igplvm1");
}

TEST_CASE("pretransform by a scalar matrix shifts the likelihood exactly") {
    const fs::path sim = fresh_dir("sim_pre");
    const fs::path spec = scratch() / "spec_pre.json";
    write_spec(spec, 50, 3, 1);
    REQUIRE(run("simulate --spec " + spec.string() + " --seed 4 --out " +
                sim.string()) == 0);

    const double c = 1.7;
    const int N = 50, D = 3;
    const fs::path tcsv = scratch() / "T_scalar.csv";
    csv::write_matrix(tcsv, Matrix(c * Matrix::Identity(D, D)));

    const fs::path plain = fresh_dir("fit_plain");
    const fs::path scaled = fresh_dir("fit_scaled");
    const std::string common = "fit --data " + (sim / "Y.csv").string() +
                               " --model igplvm1 --latent-dim 1 --iters 6 --out ";
    REQUIRE(run(common + plain.string()) == 0);
    REQUIRE(run(common + scaled.string() + " --pretransform " + tcsv.string()) == 0);

    const double l0 =
        json::parse(std::ifstream(plain / "fit_report.json"))["loglik"];
    const double l1 =
        json::parse(std::ifstream(scaled / "fit_report.json"))["loglik"];
    // scaling commutes with the whole fitting path: the optimum shifts by
    // exactly -N log det(T) = -N D log c
    const double expected = l0 - N * D * std::log(c);
    CHECK(std::abs(l1 - expected) / std::max(1.0, std::abs(expected)) < 1e-6);
}

TEST_CASE("discover on CSV residuals: both branches") {
    // non-Gaussian mixture
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int N = 2000;
    Matrix E(2, N);
    for (int t = 0; t < N; ++t) {
        const double z1 = gauss(rng), z2 = gauss(rng);
        const double s1 = (z1 < 0 ? -1.0 : 1.0) * std::pow(std::abs(z1), 1.8);
        const double s2 = (z2 < 0 ? -1.0 : 1.0) * std::pow(std::abs(z2), 1.8);
        E(0, t) = s1;
        E(1, t) = 0.7 * s1 + s2;
    }
    const fs::path ecsv = scratch() / "resid_ng.csv";
    csv::write_matrix(ecsv, E.transpose());
    const fs::path out = fresh_dir("disc_ng");
    REQUIRE(run("discover --input " + ecsv.string() + " --out " + out.string()) == 0);
    for (const char* f : {"causal_report.json", "graph.dot", "graph.json", "B.csv"})
        CHECK(fs::exists(out / f));
    const json rep = json::parse(std::ifstream(out / "causal_report.json"));
    CHECK(rep["branch"] == "lingam");
    const Matrix B = csv::read_matrix(out / "B.csv");
    CHECK(B(1, 0) == doctest::Approx(0.7).epsilon(0.15));

    // Gaussian residuals
    const Matrix Eg = oracles::random_matrix(3, 1500, 6);
    const fs::path gcsv = scratch() / "resid_g.csv";
    csv::write_matrix(gcsv, Eg.transpose());
    const fs::path gout = fresh_dir("disc_g");
    REQUIRE(run("discover --input " + gcsv.string() + " --out " + gout.string()) == 0);
    CHECK(fs::exists(gout / "precision.csv"));
    const json grep = json::parse(std::ifstream(gout / "causal_report.json"));
    CHECK(grep["branch"] == "markov-network");

    CHECK(run("discover --input missing.csv --out " +
              fresh_dir("disc_bad").string()) == 2);
}

TEST_CASE("discover accepts a model.json artifact") {
    const fs::path sim = fresh_dir("sim_art");
    const fs::path spec = scratch() / "spec_art.json";
    write_spec(spec, 60, 3, 1);
    REQUIRE(run("simulate --spec " + spec.string() + " --seed 9 --out " +
                sim.string()) == 0);
    const fs::path fit = fresh_dir("fit_art");
    REQUIRE(run("fit --data " + (sim / "Y.csv").string() +
                " --model igplvm1 --latent-dim 1 --iters 6 --out " +
                fit.string()) == 0);
    REQUIRE(run("discover --input " + (fit / "model.json").string() + " --out " +
                fit.string()) == 0);
    CHECK(fs::exists(fit / "causal_report.json"));
}

TEST_CASE("evaluate aggregates a full pipeline run") {
    const fs::path sim = fresh_dir("sim_eval");
    const fs::path spec = scratch() / "spec_eval.json";
    write_spec(spec, 80, 3, 1);
    REQUIRE(run("simulate --spec " + spec.string() + " --seed 10 --out " +
                sim.string()) == 0);

    const fs::path fit = fresh_dir("run_eval");
    REQUIRE(run("fit --data " + (sim / "Y.csv").string() +
                " --model igplvm1 --latent-dim 1 --iters 8 --out " +
                fit.string()) == 0);
    REQUIRE(run("discover --input " + (fit / "model.json").string() + " --out " +
                fit.string()) == 0);

    const fs::path out = fresh_dir("eval_out");
    REQUIRE(run("evaluate --truth " + sim.string() + " --run " + fit.string() +
                " --out " + out.string()) == 0);
    CHECK(fs::exists(out / "metrics.json"));
    CHECK(fs::exists(out / "table.csv"));
    CHECK(fs::exists(out / "plotdata" / "latent_scatter.csv"));
    const json metrics = json::parse(std::ifstream(out / "metrics.json"));
    CHECK(metrics["runs"] == 1);
    CHECK(metrics["mse_g"].get<double>() >= 0.0);
}

TEST_CASE("malformed CSV input fails with the data exit code") {
    const fs::path bad = scratch() / "bad.csv";
    std::ofstream(bad) << "1.0,2.0\n3.0\n";
    CHECK(run("fit --data " + bad.string() + " --latent-dim 1 --out " +
              fresh_dir("fit_ragged").string()) == 2);
}
