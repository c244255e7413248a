// Command-line front end: eigenvalues, continuation, POD/ROM and validation.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vkrom/acceptance.hpp"
#include "vkrom/buckling.hpp"
#include "vkrom/config.hpp"
#include "vkrom/continuation.hpp"
#include "vkrom/io.hpp"
#include "vkrom/rom.hpp"
#include "vkrom/rom_io.hpp"

namespace fs = std::filesystem;
using namespace vkrom;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitAcceptance = 4;

struct Problem {
    SpacePtr space;
    PlateOperators ops;
};

Problem make_problem(const RunConfig& cfg)
{
    SpacePtr space = build_space(build_mesh(cfg.length, cfg.resolved_nx(), cfg.resolved_ny()), cfg.degree);
    PlateOperators ops = make_operators(space);
    return {space, std::move(ops)};
}

fs::path out_path(const RunConfig& cfg, const std::string& name)
{
    const fs::path p(name);
    return p.is_absolute() ? p : fs::path(cfg.output_dir) / p;
}

void note(const std::string& what, const fs::path& p) { std::cout << what << ": " << p.string() << '\n'; }

std::vector<double> grid(double start, double end, double step)
{
    std::vector<double> g;
    const auto n = static_cast<int>(std::floor((end - start) / step + 1e-9));
    for (int i = 0; i <= n; ++i) {
        g.push_back(start + step * i);
    }
    return g;
}

std::string seed_label(const BranchSeed& s)
{
    return "(" + std::to_string(s.m) + "," + std::to_string(s.n) + ")" + (s.sign > 0 ? "+" : "-");
}

void print_bifurcations(const std::vector<Branch>& branches)
{
    for (const auto& b : branches) {
        std::cout << "  " << seed_label(b.seed) << " departs at ";
        if (b.bifurcation) {
            std::cout << *b.bifurcation << '\n';
        } else {
            std::cout << "(none in range)\n";
        }
    }
}

// eigs --------------------------------------------------------------------

struct EigsArgs {
    std::vector<double> exact;
    bool order = false;
};

int cmd_eigs(const RunConfig& cfg, const EigsArgs& args)
{
    std::cout.precision(10);
    if (!args.exact.empty()) {
        const double l = exact_eigenvalue(static_cast<int>(args.exact[0]), static_cast<int>(args.exact[1]), args.exact[2]);
        std::cout << l << '\n';
        return 0;
    }
    if (args.order) {
        std::vector<std::pair<double, double>> data;
        const double exact = exact_eigenvalue(cfg.order_m, cfg.order_n, cfg.length);
        for (double h : cfg.order_mesh_sizes) {
            RunConfig c = cfg;
            c.mesh_size = h;
            const Problem p = make_problem(c);
            const auto v = buckling_eigs(p.ops, cfg.eig_psi, 1, cfg.eigen_options());
            const double hh = mesh_size(p.space->mesh());
            data.emplace_back(hh, v[0].value);
            std::cout << "h=" << hh << " lambda_h=" << v[0].value << " error=" << std::abs(v[0].value - exact)
                      << '\n';
        }
        const auto order = convergence_order(data, exact);
        if (!order) {
            std::cerr << "order undefined (errors not decreasing)\n";
            return kExitSolver;
        }
        std::cout << "order " << *order << '\n';
        return 0;
    }

    const Problem p = make_problem(cfg);
    const SchurOperator schur(p.ops);
    const auto pairs = buckling_eigs(schur, cfg.eig_psi, cfg.eig_count, cfg.eigen_options());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        std::cout << "lambda_" << i + 1 << " = " << pairs[i].value << '\n';
    }
    const auto eigs_csv = out_path(cfg, "eigs.csv");
    write_eigs_csv(eigs_csv, pairs);
    note("wrote", eigs_csv);

    const auto lambdas = grid(cfg.spectrum_start, cfg.spectrum_end, cfg.spectrum_step);
    const auto trace = spectrum_vs_lambda(schur, lambdas, cfg.eig_psi, cfg.spectrum_count, cfg.eigen_options());
    const auto spectrum_csv = out_path(cfg, "spectrum.csv");
    write_spectrum_csv(spectrum_csv, trace);
    note("wrote", spectrum_csv);
    for (const auto& c : trace.crossings) {
        std::cout << "  sigma_" << c.curve + 1 << " crosses zero between " << c.lambda_before << " and "
                  << c.lambda_after << '\n';
    }
    if (cfg.svg) {
        std::vector<PlotSeries> series;
        for (std::size_t c = 0; c < trace.sigma_curves.size(); ++c) {
            series.push_back({"sigma_" + std::to_string(c + 1), trace.lambda_grid, trace.sigma_curves[c]});
        }
        series.push_back({"zero", {lambdas.front(), lambdas.back()}, {0.0, 0.0}});
        write_svg_plot(out_path(cfg, "spectrum.svg"), {"Spectrum of the linearized operator", "lambda", "sigma", false},
                       series);
    }
    return 0;
}

// trace / diagram ---------------------------------------------------------

int write_diagram(const RunConfig& cfg, const std::vector<Branch>& branches)
{
    const auto csv = out_path(cfg, "diagram.csv");
    write_diagram_csv(csv, branches);
    note("wrote", csv);
    print_bifurcations(branches);
    if (cfg.svg) {
        auto series = diagram_series(branches);
        series.push_back({"trivial", {cfg.lambda_start, cfg.lambda_end}, {0.0, 0.0}});
        write_svg_plot(out_path(cfg, "diagram.svg"), {"Bifurcation diagram", "lambda", "u at max-modulus dof", false},
                       series);
    }
    return 0;
}

int cmd_trace(const RunConfig& cfg)
{
    const Problem p = make_problem(cfg);
    std::vector<Branch> branches;
    if (!cfg.seeds.empty()) {
        branches.push_back(trace_branch(p.ops, cfg.lambda_start, cfg.lambda_end, cfg.d_lambda, cfg.psi,
                                        cfg.seeds.front(), cfg.continuation_options()));
    }
    return write_diagram(cfg, branches);
}

int cmd_diagram(const RunConfig& cfg)
{
    const Problem p = make_problem(cfg);
    const auto d = sweep_diagram(p.ops, cfg.lambda_start, cfg.lambda_end, cfg.d_lambda, cfg.psi, cfg.seeds,
                                 cfg.continuation_options());
    return write_diagram(cfg, d.branches);
}

// pod / online ------------------------------------------------------------

int cmd_pod(const RunConfig& cfg)
{
    const Problem p = make_problem(cfg);
    const auto d = sweep_diagram(p.ops, cfg.lambda_start, cfg.lambda_end, cfg.d_lambda, cfg.psi, cfg.train_seeds,
                                 cfg.continuation_options());
    print_bifurcations(d.branches);
    const SnapshotSet snaps = collect_snapshots(d.branches, cfg.stride);
    const ReducedBasis basis = pod(snaps, p.ops.stiffness, cfg.n_max, cfg.energy_tol);
    const ReducedOperators reduced = project_operators(basis, p.ops);
    std::cout << snaps.count() << " snapshots, N = " << basis.N << " per field\n";
    const auto path = out_path(cfg, cfg.basis_file);
    fs::create_directories(path.parent_path());
    save_rom(path.string(), {cfg.length, cfg.resolved_nx(), cfg.resolved_ny(), cfg.degree}, basis, reduced);
    note("wrote", path);
    return 0;
}

int cmd_online(const RunConfig& cfg, const std::string& basis_arg)
{
    const auto path = basis_arg.empty() ? out_path(cfg, cfg.basis_file) : fs::path(basis_arg);
    const RomArchive ar = RomArchive::load(path.string());
    const RomMeshInfo mi = load_rom_mesh(ar);
    const SpacePtr space = build_space(build_mesh(mi.length, mi.nx, mi.ny), mi.degree);
    const PlateOperators ops = make_operators(space);
    const ReducedBasis basis = load_basis(ar, space);
    const ReducedOperators full_reduced = load_reduced_operators(ar);
    const BranchSeed seed = cfg.train_seeds.front();
    const SeedLifter lifter(ops);
    const ContinuationOptions copt = cfg.continuation_options();

    const auto lambdas = rom_test_lambdas(cfg);
    std::vector<State> guesses;
    for (double l : lambdas) {
        guesses.push_back(lifter.seed(seed, l, cfg.psi));
    }
    std::vector<RbErrorReport> reports;
    for (int n = 1; n <= basis.N; ++n) {
        const ReducedBasis b = truncate(basis, n);
        reports.push_back(rb_error(b, project_operators(b, ops), ops, lambdas, cfg.psi, guesses, copt.newton));
        const auto& r = reports.back();
        std::cout << "N=" << n << " E_N=" << r.error << " online " << r.mean_online_ms << " ms, full "
                  << r.mean_full_ms << " ms";
        if (!r.excluded.empty()) {
            std::cout << " (" << r.excluded.size() << " samples excluded)";
        }
        std::cout << '\n';
    }
    const auto err_csv = out_path(cfg, "rb_error.csv");
    write_rb_error_csv(err_csv, reports);
    note("wrote", err_csv);

    // Reduced diagram along the continuation grid next to the full one, both
    // warm-started along the branch of the first training seed.
    const Branch full = trace_branch(ops, cfg.lambda_start, cfg.lambda_end, cfg.d_lambda, cfg.psi, seed, copt);
    const auto diag_csv = out_path(cfg, "rom_diagram.csv");
    auto out = detail::open_output(diag_csv);
    out << "lambda,reduced_ordinate,full_ordinate\n";
    PlotSeries reduced_series{"reduced", {}, {}};
    PlotSeries full_series{"full", {}, {}};
    std::optional<ReducedState> previous;
    for (const auto& pt : full.points) {
        ReducedState guess = previous ? *previous : project(basis, ops.stiffness, lifter.seed(seed, pt.lambda, cfg.psi));
        auto [x, rep] = reduced_newton(full_reduced, pt.lambda, cfg.psi, guess, copt.newton.tol, copt.newton.max_iter);
        const Vector u = basis.basis(Field::u) * x.segment(0, basis.N);
        const double ordinate = rep.converged ? max_abs(u).value : std::nan("");
        if (rep.converged && u.lpNorm<Eigen::Infinity>() >= copt.delta) {
            previous = x;
        } else {
            previous.reset();
        }
        out << pt.lambda << ',' << ordinate << ',' << pt.ordinate << '\n';
        reduced_series.x.push_back(pt.lambda);
        reduced_series.y.push_back(ordinate);
        if (pt.converged) {
            full_series.x.push_back(pt.lambda);
            full_series.y.push_back(pt.ordinate);
        }
    }
    note("wrote", diag_csv);
    if (cfg.svg) {
        PlotSeries curve{"E_N", {}, {}};
        for (const auto& r : reports) {
            curve.x.push_back(r.N);
            curve.y.push_back(r.error);
        }
        write_svg_plot(out_path(cfg, "rb_error.svg"), {"Reduced basis error", "N", "E_N", true}, {curve});
        write_svg_plot(out_path(cfg, "rom_diagram.svg"), {"Reduced vs full branch", "lambda", "ordinate", false},
                       {full_series, reduced_series});
    }
    return 0;
}

// sweep2d -----------------------------------------------------------------

int cmd_sweep2d(const RunConfig& cfg)
{
    const Problem p = make_problem(cfg);
    const auto rows = sweep_2d(p.ops, cfg.sweep_lambda_start, cfg.sweep_lambda_end, cfg.sweep_d_lambda, cfg.psi_grid,
                               cfg.sweep_seed, cfg.continuation_options());
    const auto csv = out_path(cfg, "sweep2d.csv");
    write_sweep2d_csv(csv, rows);
    note("wrote", csv);
    PlotSeries crit{"critical load", {}, {}};
    for (const auto& r : rows) {
        std::cout << "  psi=" << r.psi << " critical load ";
        if (r.critical_load) {
            std::cout << *r.critical_load << '\n';
            crit.x.push_back(r.psi);
            crit.y.push_back(*r.critical_load);
        } else {
            std::cout << "(none in range)\n";
        }
    }
    if (cfg.svg) {
        std::vector<PlotSeries> series;
        for (const auto& r : rows) {
            PlotSeries s{"psi=" + std::to_string(r.psi).substr(0, 4), {}, {}};
            for (const auto& pt : r.branch.points) {
                if (pt.converged) {
                    s.x.push_back(pt.lambda);
                    s.y.push_back(pt.ordinate);
                }
            }
            series.push_back(std::move(s));
        }
        write_svg_plot(out_path(cfg, "sweep2d.svg"), {"Branches per load profile", "lambda", "ordinate", false}, series);
        write_svg_plot(out_path(cfg, "critical_load.svg"), {"Critical load vs psi", "psi", "lambda*", false}, {crit});
    }
    return 0;
}

// validate ----------------------------------------------------------------

int cmd_validate(const RunConfig& cfg, const std::vector<int>& only)
{
    acceptance::Suite suite;
    suite.on_result = [](const acceptance::CheckResult& r) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.id << ". " << r.title << " (" << r.seconds << " s): "
                  << r.detail << std::endl;
    };
    const auto results = suite.run(std::set<int>(only.begin(), only.end()));
    nlohmann::json report;
    report["checks"] = nlohmann::json::array();
    bool all = true;
    for (const auto& r : results) {
        all = all && r.passed;
        report["checks"].push_back(
            {{"id", r.id}, {"title", r.title}, {"passed", r.passed}, {"detail", r.detail}, {"seconds", r.seconds}});
    }
    report["passed"] = all;
    const auto path = out_path(cfg, "validate.json");
    auto out = detail::open_output(path);
    out << report.dump(2) << '\n';
    note("wrote", path);
    return all ? 0 : kExitAcceptance;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Von Karman plate buckling: eigenvalues, bifurcation diagrams and reduced basis"};
    app.require_subcommand(1);

    std::string config_file;
    std::vector<std::string> overrides;
    std::string output_dir;
    app.add_option("-c,--config", config_file, "key=value config file with [section] headers");
    app.add_option("-s,--set", overrides, "override one setting, e.g. --set mesh.ny=30")->take_all();
    app.add_option("-o,--output-dir", output_dir, "output directory (beats the config and the environment)");

    EigsArgs eigs_args;
    auto* eigs = app.add_subcommand("eigs", "buckling loads and spectrum crossings");
    eigs->add_option("--exact", eigs_args.exact, "print the closed-form load for m n L")->expected(3);
    eigs->add_flag("--order", eigs_args.order, "estimate the convergence order over eigs.order_mesh_sizes");

    auto* trace = app.add_subcommand("trace", "continue the branch of the first seed");
    auto* diagram = app.add_subcommand("diagram", "continue every seed branch");
    auto* pod_cmd = app.add_subcommand("pod", "train the reduced basis on the rom.train_seeds branches");
    std::string basis_arg;
    auto* online = app.add_subcommand("online", "reduced solves against full solves");
    online->add_option("basis", basis_arg, "basis container (default: output dir / rom.basis_file)");
    auto* sweep = app.add_subcommand("sweep2d", "critical load across the psi grid");
    std::vector<int> only;
    auto* validate = app.add_subcommand("validate", "run the acceptance checks");
    validate->add_option("--only", only, "check ids to run")->check(CLI::Range(1, acceptance::Suite::kCount));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return e.get_exit_code() == 0 ? app.exit(e) : (app.exit(e), kExitConfig);
    }

    RunConfig cfg;
    try {
        if (!config_file.empty()) {
            load_config_file(cfg, config_file);
        }
        apply_environment(cfg);
        for (const auto& o : overrides) {
            apply_override(cfg, o);
        }
        if (!output_dir.empty()) {
            cfg.output_dir = output_dir;
        }
        validate_config(cfg);
    } catch (const std::exception& e) {
        std::cerr << "vkrom: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (*eigs) {
            return cmd_eigs(cfg, eigs_args);
        }
        if (*trace) {
            return cmd_trace(cfg);
        }
        if (*diagram) {
            return cmd_diagram(cfg);
        }
        if (*pod_cmd) {
            return cmd_pod(cfg);
        }
        if (*online) {
            return cmd_online(cfg, basis_arg);
        }
        if (*sweep) {
            return cmd_sweep2d(cfg);
        }
        if (*validate) {
            return cmd_validate(cfg, only);
        }
    } catch (const ConfigError& e) {
        std::cerr << "vkrom: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "vkrom: " << e.what() << '\n';
        return kExitSolver;
    }
    return 0;
}
