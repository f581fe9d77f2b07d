// Command-line front end: data generation, training, inversion, stability checks and reports.
#include "fdot/config.hpp"
#include "fdot/grid.hpp"
#include "fdot/metrics.hpp"
#include "fdot/mlp.hpp"
#include "fdot/stability.hpp"
#include "fdot/synth.hpp"
#include "fdot/train.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace fdot;

namespace {

// Coarse lattice used for progress evaluation during training; final numbers use the full test mesh.
TestMesh progress_mesh(const ExperimentConfig& cfg) { return {cfg.domain, cfg.final_time, 20, 20, 20}; }

fs::path prepare(const fs::path& out) {
    fs::create_directories(out);
    return out;
}

std::vector<std::string> record_columns(const std::vector<Record>& rows) {
    std::vector<std::string> cols;
    if (!rows.empty())
        for (const auto& [k, v] : rows.front()) cols.push_back(k);
    // epoch first reads better in a spreadsheet
    if (auto it = std::find(cols.begin(), cols.end(), "epoch"); it != cols.end()) std::rotate(cols.begin(), it, it + 1);
    return cols;
}

/// Grid oracle sampled on the test mesh by trilinear interpolation.
Eigen::VectorXd sample_field(const TestMesh& mesh, const FieldSeries& field) {
    return sample(mesh, [&](double x, double y, double t) { return interpolate(field, x, y, t); });
}

/// Rows t, x, y, value on an n x n lattice at each requested time.
std::vector<Record> snapshot(const ExperimentConfig& cfg, const std::vector<double>& times, int n, const SpaceTimeFn& f) {
    const TestMesh m{cfg.domain, cfg.final_time, n, n, 2};
    std::vector<Record> rows;
    for (double t : times)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) rows.push_back({{"t", t}, {"x", m.x(i)}, {"y", m.y(j)}, {"value", f(m.x(i), m.y(j), t)}});
    return rows;
}

const std::vector<std::string> kFieldColumns{"t", "x", "y", "value"};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int generate_data(const ExperimentConfig& cfg, const fs::path& out) {
    prepare(out);
    const GridPtr grid = make_grid(cfg);
    const BoundaryTrace clean =
        generate_measurement(cfg.coefficients, make_data_grid(cfg), *grid, ExactSourceSpec::from_name(cfg.example));
    RngStream rng(cfg.rng_seed, "noise");
    const auto samples = to_samples(clean, add_noise(clean, cfg.noise_delta, rng));
    const fs::path data = out / "measurements.csv", trace = out / "trace.csv";
    write_measurement_csv(samples, data);
    write_csv(clean, trace);
    write_manifest(cfg, {data, trace}, out / "manifest.json");
    std::cout << "wrote " << samples.size() << " samples to " << data << '\n';
    return 0;
}

int train_excitation_cmd(const ExperimentConfig& cfg, const fs::path& out) {
    prepare(out);
    const TestMesh mesh = progress_mesh(cfg);
    const Eigen::VectorXd oracle = sample_field(mesh, solve_excitation(cfg.coefficients, make_grid(cfg)));
    TrainOptions opts;
    opts.progress = &std::cout;
    opts.evaluate = [&](int, const Mlp& net, const Mlp*) {
        return Record{{"u_e_error", relative_l2(sample(mesh, net), oracle)}};
    };
    const auto start = std::chrono::steady_clock::now();
    const auto res = train_excitation(cfg, opts);
    const fs::path ckpt = out / "ue.json", log = out / "excitation_log.csv", eval = out / "excitation_eval.csv";
    save_checkpoint(res.net, ckpt);
    export_table(res.log, log_columns(), log);
    export_table(res.eval_log, record_columns(res.eval_log), eval);
    write_manifest(cfg, {ckpt, log, eval}, out / "manifest.json");
    std::cout << "trained excitation in " << seconds_since(start) << " s\n";
    return 0;
}

int invert_cmd(const ExperimentConfig& cfg, const fs::path& data_path, const fs::path& ue_path, const fs::path& out) {
    prepare(out);
    const auto data = read_measurement_csv(data_path, cfg.domain);
    const Mlp ue = load_checkpoint(ue_path);
    const ExactSourceSpec spec = ExactSourceSpec::from_name(cfg.example);
    const TestMesh coarse = progress_mesh(cfg);
    TrainOptions opts;
    opts.progress = &std::cout;
    opts.evaluate = [&](int, const Mlp& f, const Mlp*) { return Record{{"mu_f_error", mu_f_error(f, spec, coarse)}}; };
    const auto start = std::chrono::steady_clock::now();
    const auto res = train_inverse(cfg, ue, data, opts);
    const double err = mu_f_error(res.net_f, spec, TestMesh::from(cfg));

    const fs::path f = out / "source.json", m = out / "emission.json", log = out / "inverse_log.csv",
                   eval = out / "inverse_eval.csv";
    // The excitation network travels with the run so `report` needs only this directory.
    save_checkpoint(ue, out / "ue.json");
    save_checkpoint(res.net_f, f);
    save_checkpoint(res.net_m, m);
    export_table(res.log, log_columns(), log);
    export_table(res.eval_log, record_columns(res.eval_log), eval);
    write_manifest(cfg, {out / "ue.json", f, m, log, eval}, out / "manifest.json");
    std::cout << "mu_f relative error " << err << " after " << seconds_since(start) << " s\n";
    return 0;
}

int stability_cmd(const ExperimentConfig& cfg, int trials, int basis_size, int pairs, const fs::path& out) {
    prepare(out);
    const GridPtr grid = make_grid(cfg);
    const auto mesh = uniform_time_mesh(cfg.final_time, cfg.K_time_mesh);
    RngStream rng(cfg.rng_seed, "stability");

    std::vector<Record> ident;
    double worst_identity = 0;
    for (int i = 0; i < pairs; ++i) {
        const auto p = random_positive_source(grid, mesh, rng);
        const auto w = random_positive_trace(grid, rng);
        const auto r = identity_check(p, w, cfg.coefficients);
        worst_identity = std::max(worst_identity, r.weighted_mismatch);
        ident.push_back({{"trial", i},
                         {"lhs", r.lhs},
                         {"plain", r.plain},
                         {"weighted", r.weighted},
                         {"plain_mismatch", r.plain_mismatch},
                         {"weighted_mismatch", r.weighted_mismatch}});
    }

    const auto basis = OmegaBasis::build(grid, cfg.coefficients, mesh, basis_size, rng.substream("basis"));
    std::vector<Record> rows;
    int satisfied = 0;
    for (int i = 0; i < trials; ++i) {
        const auto p = random_source(grid, mesh, rng), q = random_source(grid, mesh, rng);
        const auto r = stability_check(p, q, basis, cfg.coefficients);
        satisfied += r.satisfied;
        rows.push_back({{"trial", i}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"ratio", r.ratio()}});
    }

    RngStream axiom_rng = rng.substream("axioms");
    const auto ax = norm_axiom_suite(basis, 50, axiom_rng);
    const std::vector<Record> axioms{{{"trials", ax.trials},
                                      {"basis_size", basis.size()},
                                      {"nonnegative", ax.nonnegative ? 1.0 : 0.0},
                                      {"zero_value", ax.zero_value},
                                      {"homogeneity_error", ax.homogeneity_error},
                                      {"triangle_violations", ax.triangle_violations},
                                      {"constant", ax.constant},
                                      {"bound_violations", ax.bound_violations}}};

    const fs::path s = out / "stability.csv", id = out / "identity.csv", a = out / "norm_axioms.csv";
    export_table(rows, {"trial", "lhs", "rhs", "ratio"}, s);
    export_table(ident, {"trial", "lhs", "plain", "weighted", "plain_mismatch", "weighted_mismatch"}, id);
    export_table(axioms, record_columns(axioms), a);
    write_manifest(cfg, {s, id, a}, out / "manifest.json");
    std::cout << "stability: " << satisfied << '/' << trials << " trials satisfied (lhs is a lower bound, M="
              << basis.size() << ")\nidentity: worst weighted mismatch " << worst_identity << " over " << pairs
              << " pairs\n";
    return satisfied == trials ? 0 : 1;
}

int report_cmd(const ExperimentConfig& cfg, const fs::path& run, const fs::path& out) {
    prepare(out);
    const Mlp ue = load_checkpoint(run / "ue.json");
    const Mlp f = load_checkpoint(run / "source.json");
    const Mlp m = load_checkpoint(run / "emission.json");
    const ExactSourceSpec spec = ExactSourceSpec::from_name(cfg.example);
    const SpaceTimeFn exact = [&](double x, double y, double t) { return exact_mu_f(spec, x, y, t); };

    // Grid oracles for the two states.
    const GridPtr grid = make_grid(cfg);
    const FieldSeries ue_grid = solve_excitation(cfg.coefficients, grid);
    const FieldSeries um_grid = solve_emission(cfg.coefficients, grid, exact, ue_grid);

    const TestMesh mesh = TestMesh::from(cfg);
    const Eigen::VectorXd mu_exact = sample(mesh, exact), mu_net = sample(mesh, f);
    const std::vector<Record> errors{{{"mu_f_error", relative_l2(mu_net, mu_exact)},
                                      {"u_e_error", relative_l2(sample(mesh, ue), sample_field(mesh, ue_grid))},
                                      {"u_m_error", relative_l2(sample(mesh, m), sample_field(mesh, um_grid))}}};

    std::vector<fs::path> files{out / "errors.csv", out / "mu_f_timeseries.csv"};
    export_table(errors, {"mu_f_error", "u_e_error", "u_m_error"}, files[0]);
    export_table(timeseries_error(mu_net, mu_exact, mesh), {"t", "error", "num", "den"}, files[1]);

    const double T = cfg.final_time;
    const std::vector<double> times{0.0, 2 * T / 7, 4 * T / 7, T};
    const std::vector<std::pair<std::string, SpaceTimeFn>> fields{
        {"mu_f_exact", exact},
        {"mu_f", [&](double x, double y, double t) { return evaluate(f, x, y, t); }},
        {"mu_f_abs_error", [&](double x, double y, double t) { return std::abs(evaluate(f, x, y, t) - exact(x, y, t)); }},
        {"u_e", [&](double x, double y, double t) { return evaluate(ue, x, y, t); }},
        {"u_m", [&](double x, double y, double t) { return evaluate(m, x, y, t); }},
        {"u_e_oracle", [&](double x, double y, double t) { return interpolate(ue_grid, x, y, t); }},
        {"u_m_oracle", [&](double x, double y, double t) { return interpolate(um_grid, x, y, t); }}};
    for (const auto& [name, fn] : fields) {
        files.push_back(out / ("snapshot_" + name + ".csv"));
        export_table(snapshot(cfg, times, mesh.nx, fn), kFieldColumns, files.back());
    }
    write_manifest(cfg, files, out / "manifest.json");
    std::cout << "mu_f error " << errors[0].at("mu_f_error") << ", u_e error " << errors[0].at("u_e_error")
              << ", u_m error " << errors[0].at("u_m_error") << '\n';
    return 0;
}

int lambda_sweep_cmd(const ExperimentConfig& cfg, const fs::path& ue_path, const std::vector<double>& lambdas,
                     const std::vector<std::uint64_t>& seeds, const fs::path& out) {
    prepare(out);
    const auto res = lambda_sweep(cfg, lambdas, seeds, load_checkpoint(ue_path), &std::cout);
    const fs::path per = out / "lambda_sweep_seeds.csv", sum = out / "lambda_sweep.csv";
    export_table(res.per_seed_rows(), {"lambda", "seed", "error"}, per);
    export_table(res.summary, {"lambda", "mean", "std", "seeds"}, sum);
    write_manifest(cfg, {per, sum}, out / "manifest.json");
    for (const auto& r : res.summary)
        std::cout << "lambda=" << r.at("lambda") << " error " << 100 * r.at("mean") << "% +- " << 100 * r.at("std")
                  << "% (population std, " << r.at("seeds") << " seeds)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic source recovery for time-domain fluorescence diffuse optical tomography"};
    app.require_subcommand(1);

    std::string config_path;
    fs::path out = "run";
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory")->capture_default_str();
    };

    auto* gen = app.add_subcommand("generate-data", "fine-grid measurement with noise");
    add_common(gen);

    auto* tex = app.add_subcommand("train-excitation", "fit the excitation network (J1)");
    add_common(tex);

    fs::path data_path, ue_path, run_dir;
    auto* inv = app.add_subcommand("invert", "recover mu_f and u_m from boundary data (J2)");
    add_common(inv);
    inv->add_option("--data", data_path, "measurement CSV")->required()->check(CLI::ExistingFile);
    inv->add_option("--checkpoint-ue", ue_path, "excitation checkpoint")->required()->check(CLI::ExistingFile);

    int trials = 20, basis_size = 64, pairs = 10;
    auto* stab = app.add_subcommand("stability-check", "variational identity and stability inequality");
    add_common(stab);
    stab->add_option("--trials", trials)->capture_default_str();
    stab->add_option("--basis", basis_size, "number of boundary test functions")->capture_default_str();
    stab->add_option("--identity-pairs", pairs)->capture_default_str();

    auto* rep = app.add_subcommand("report", "error tables and field snapshots for a finished run");
    add_common(rep);
    rep->add_option("--run", run_dir, "directory holding ue.json, source.json, emission.json")
        ->required()
        ->check(CLI::ExistingDirectory);

    std::vector<double> lambdas{100, 0.1};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    auto* sweep = app.add_subcommand("lambda-sweep", "inversion error across data weights and seeds");
    add_common(sweep);
    sweep->add_option("--checkpoint-ue", ue_path, "excitation checkpoint")->required()->check(CLI::ExistingFile);
    sweep->add_option("--lambdas", lambdas)->capture_default_str();
    sweep->add_option("--seeds", seeds)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        const ExperimentConfig cfg = load_config(config_path);
        if (*gen) return generate_data(cfg, out);
        if (*tex) return train_excitation_cmd(cfg, out);
        if (*inv) return invert_cmd(cfg, data_path, ue_path, out);
        if (*stab) return stability_cmd(cfg, trials, basis_size, pairs, out);
        if (*rep) return report_cmd(cfg, run_dir, out);
        if (*sweep) return lambda_sweep_cmd(cfg, ue_path, lambdas, seeds, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
