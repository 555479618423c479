#pragma once
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <cggm/errors.hpp>
#include <cggm/io.hpp>
#include <cggm/metrics.hpp>
#include <cggm/model_core.hpp>
#include <cggm/model_selection.hpp>
#include <cggm/sim_bench.hpp>
#include <cggm/solver.hpp>

namespace cggm::cli {

enum ExitCode : int { ok = 0, input_error = 1, convergence_error = 2 };

namespace detail {

inline char delimiter_from(const std::string& name)
{
    if (name == "tab" || name == "\t")
        return '\t';
    if (name == "comma" || name == ",")
        return ',';
    throw InputError("unknown delimiter '" + name + "' (use tab or comma)");
}

/// Expands `--config file.json` into `--key value` pairs for keys not given
/// explicitly on the command line.
inline std::vector<std::string> expand_config(std::vector<std::string> args)
{
    std::string path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (path.empty())
        return rest;
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open config " + path);
    nlohmann::json cfg;
    try {
        in >> cfg;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("config " + path + ": " + e.what());
    }
    if (!cfg.is_object())
        throw InputError("config " + path + " must be a JSON object");
    auto given = [&](const std::string& flag) {
        for (const auto& a : rest)
            if (a == flag || a.rfind(flag + "=", 0) == 0)
                return true;
        return false;
    };
    auto scalar = [](const nlohmann::json& v) {
        if (v.is_string())
            return v.get<std::string>();
        if (v.is_number_integer())
            return std::to_string(v.get<long long>());
        if (v.is_number())
            return io::fmt(v.get<double>());
        throw InputError("unsupported config value " + v.dump());
    };
    for (const auto& [key, val] : cfg.items()) {
        const std::string flag = "--" + key;
        if (given(flag))
            continue;
        if (val.is_boolean()) {
            if (val.get<bool>())
                rest.push_back(flag);
        } else if (val.is_array()) {
            std::string joined;
            for (const auto& e : val)
                joined += (joined.empty() ? "" : ",") + scalar(e);
            rest.push_back(flag);
            rest.push_back(joined);
        } else {
            rest.push_back(flag);
            rest.push_back(scalar(val));
        }
    }
    return rest;
}

struct DataArgs {
    std::string y_path;
    std::string x_path;
    std::string delim = "tab";
    bool header = false;
    bool no_center = false;
};

inline void add_data_options(CLI::App* sub, DataArgs& d)
{
    sub->add_option("--y", d.y_path, "Expression matrix (rows = samples)")->required();
    sub->add_option("--x", d.x_path, "Marker matrix (rows = samples)")->required();
    sub->add_option("--delim", d.delim, "Field delimiter: tab or comma");
    sub->add_flag("--header", d.header, "Input files start with a header row of names");
    sub->add_flag("--no-center", d.no_center, "Do not mean-center Y and X columns");
}

struct LoadedData {
    Dataset data;
    std::vector<std::string> genes;
    std::vector<std::string> markers;
};

inline LoadedData load(const DataArgs& d)
{
    const char delim = delimiter_from(d.delim);
    auto y = io::read_matrix(d.y_path, delim, d.header);
    auto x = io::read_matrix(d.x_path, delim, d.header);
    LoadedData out{{std::move(y.data), std::move(x.data)}, std::move(y.names), std::move(x.names)};
    validate(out.data);
    return out;
}

struct SolverArgs {
    double tol_outer = 1e-6;
    double tol_param = 1e-4;
    std::size_t max_outer = 200;
    double tol_inner = 1e-6;
};

inline void add_solver_options(CLI::App* sub, SolverArgs& s)
{
    sub->add_option("--tol-outer", s.tol_outer, "Relative objective change for convergence")->check(CLI::PositiveNumber);
    sub->add_option("--tol-param", s.tol_param, "Largest relative parameter change for convergence")
        ->check(CLI::PositiveNumber);
    sub->add_option("--max-outer", s.max_outer, "Maximum outer iterations")->check(CLI::PositiveNumber);
    sub->add_option("--tol-inner", s.tol_inner, "Gamma pass tolerance")->check(CLI::PositiveNumber);
}

inline SolveOptions to_options(const SolverArgs& s, bool center)
{
    SolveOptions o;
    o.tol_outer = s.tol_outer;
    o.tol_param = s.tol_param;
    o.max_outer = s.max_outer;
    o.tol_inner = s.tol_inner;
    o.center = center;
    return o;
}

} // namespace detail

/// Entry point shared by the executable and the tests.
inline int run(const std::vector<std::string>& argv_in, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Sparse conditional Gaussian graphical models", "cggm"};
    app.require_subcommand(1);

    // simulate
    SimConfig sim;
    std::string sim_out;
    auto* simulate = app.add_subcommand("simulate", "Generate a sparse model and a dataset from it");
    simulate->add_option("--p", sim.p, "Number of genes")->required()->check(CLI::PositiveNumber);
    simulate->add_option("--q", sim.q, "Number of markers")->required()->check(CLI::PositiveNumber);
    simulate->add_option("--n", sim.n, "Sample size")->required()->check(CLI::PositiveNumber);
    simulate->add_option("--theta-prob", sim.theta_link_prob, "Link probability for Theta")->required();
    simulate->add_option("--gamma-prob", sim.gamma_link_prob, "Link probability for Gamma")->required();
    simulate->add_option("--seed", sim.seed, "Random seed");
    simulate->add_option("--out", sim_out, "Output directory")->required();

    // fit
    detail::DataArgs fit_data;
    detail::SolverArgs fit_solver;
    double fit_lambda = 0.0, fit_rho = 0.0;
    bool fit_adaptive_flag = false, fit_force = false;
    std::string fit_out;
    auto* fitcmd = app.add_subcommand("fit", "Fit a sparse cGGM at fixed penalties");
    detail::add_data_options(fitcmd, fit_data);
    detail::add_solver_options(fitcmd, fit_solver);
    fitcmd->add_option("--lambda", fit_lambda, "Penalty on Gamma")->required()->check(CLI::NonNegativeNumber);
    fitcmd->add_option("--rho", fit_rho, "Penalty on Theta")->required()->check(CLI::PositiveNumber);
    fitcmd->add_flag("--adaptive", fit_adaptive_flag, "Adaptive-lasso weights from the MLE");
    fitcmd->add_flag("--force", fit_force, "Write results even if the solver did not converge");
    fitcmd->add_option("--out", fit_out, "Output directory")->required();

    // tune
    detail::DataArgs tune_data;
    detail::SolverArgs tune_solver;
    std::vector<double> tune_lambdas, tune_rhos;
    std::size_t tune_nl = 10, tune_nr = 10, tune_threads = 1;
    double tune_ratio = 0.05;
    bool tune_adaptive = false;
    std::string tune_out;
    auto* tune = app.add_subcommand("tune", "Select (lambda, rho) by BIC over a grid");
    detail::add_data_options(tune, tune_data);
    detail::add_solver_options(tune, tune_solver);
    tune->add_option("--lambda-grid", tune_lambdas, "Comma-separated lambda values")->delimiter(',');
    tune->add_option("--rho-grid", tune_rhos, "Comma-separated rho values")->delimiter(',');
    tune->add_option("--n-lambda", tune_nl, "Default grid size for lambda")->check(CLI::PositiveNumber);
    tune->add_option("--n-rho", tune_nr, "Default grid size for rho")->check(CLI::PositiveNumber);
    tune->add_option("--ratio", tune_ratio, "Smallest default grid value / largest")->check(CLI::Range(1e-12, 1.0));
    tune->add_flag("--adaptive", tune_adaptive, "Adaptive-lasso weights from the MLE");
    tune->add_option("--threads", tune_threads, "Worker threads")->check(CLI::PositiveNumber);
    tune->add_option("--out", tune_out, "Output directory")->required();

    // mlasso
    detail::DataArgs ml_data;
    double ml_lambda = 0.0;
    std::string ml_out;
    auto* mlcmd = app.add_subcommand("mlasso", "Neighbourhood selection with markers (AND rule)");
    detail::add_data_options(mlcmd, ml_data);
    mlcmd->add_option("--lambda", ml_lambda, "Lasso penalty")->required()->check(CLI::PositiveNumber);
    mlcmd->add_option("--out", ml_out, "Output directory")->required();

    // eval
    std::string ev_truth, ev_est, ev_out = "metrics.json", ev_delim = "tab";
    auto* evalcmd = app.add_subcommand("eval", "Compare an estimated precision matrix with the truth");
    evalcmd->add_option("--truth", ev_truth, "True precision matrix")->required();
    evalcmd->add_option("--est", ev_est, "Estimated precision matrix")->required();
    evalcmd->add_option("--delim", ev_delim, "Field delimiter: tab or comma");
    evalcmd->add_option("--out", ev_out, "Output JSON path");

    // bench
    SimConfig bench_cfg;
    bench_cfg.seed = 7;
    std::size_t bench_reps = 20, bench_threads = 1;
    std::vector<std::string> bench_methods{"cggm", "glasso"};
    BenchGrids bench_grids;
    bool bench_center = false;
    std::string bench_out;
    auto* bench = app.add_subcommand("bench", "Monte Carlo comparison of estimators");
    bench->add_option("--p", bench_cfg.p, "Number of genes")->check(CLI::PositiveNumber);
    bench->add_option("--q", bench_cfg.q, "Number of markers")->check(CLI::PositiveNumber);
    bench->add_option("--n", bench_cfg.n, "Sample size")->check(CLI::PositiveNumber);
    bench->add_option("--theta-prob", bench_cfg.theta_link_prob, "Link probability for Theta");
    bench->add_option("--gamma-prob", bench_cfg.gamma_link_prob, "Link probability for Gamma");
    bench->add_option("--seed", bench_cfg.seed, "Base seed; replication r uses seed + r");
    bench->add_option("--reps", bench_reps, "Replications")->check(CLI::PositiveNumber);
    bench->add_option("--methods", bench_methods, "cggm,acggm,glasso,aglasso,mlasso")->delimiter(',');
    bench->add_option("--n-lambda", bench_grids.n_lambda, "Lambda grid size")->check(CLI::PositiveNumber);
    bench->add_option("--n-rho", bench_grids.n_rho, "Rho grid size")->check(CLI::PositiveNumber);
    bench->add_option("--ratio", bench_grids.ratio, "Smallest grid value / largest")->check(CLI::Range(1e-12, 1.0));
    bench->add_flag("--center", bench_center, "Mean-center the simulated data before fitting");
    bench->add_option("--threads", bench_threads, "Worker threads")->check(CLI::PositiveNumber);
    bench->add_option("--out", bench_out, "Output TSV path (stdout when omitted)");

    try {
        std::vector<std::string> args(argv_in.begin() + (argv_in.empty() ? 0 : 1), argv_in.end());
        args = detail::expand_config(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return input_error;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return input_error;
    }

    try {
        if (*simulate) {
            validate(sim);
            const SimModel model = make_model(sim);
            const Dataset d = gen_dataset(model, sim.n, mix_seed(sim.seed, 2));
            const std::filesystem::path dir(sim_out);
            io::ensure_dir(dir);
            io::write_matrix(dir / "Y.tsv", d.y);
            io::write_matrix(dir / "X.tsv", d.x);
            io::write_matrix(dir / "theta_true.tsv", model.theta_true);
            io::write_matrix(dir / "gamma_true.tsv", model.gamma_true);
            return ok;
        }
        if (*fitcmd) {
            auto ld = detail::load(fit_data);
            const auto stats = sufficient_stats(ld.data, !fit_data.no_center);
            const auto opts = detail::to_options(fit_solver, !fit_data.no_center);
            CggmFit f;
            if (fit_adaptive_flag) {
                f = fit_adaptive(stats, fit_lambda, fit_rho, opts);
            } else {
                PenaltySpec pen;
                pen.lambda = fit_lambda;
                pen.rho = fit_rho;
                f = fit(stats, pen, opts);
            }
            if (!f.converged && !fit_force) {
                err << "error: solver did not converge in " << f.iterations
                    << " iterations (rerun with --force to write the last iterate)\n";
                return convergence_error;
            }
            io::write_fit(f, fit_out, ld.genes, ld.markers);
            return f.converged ? ok : convergence_error;
        }
        if (*tune) {
            auto ld = detail::load(tune_data);
            const auto stats = sufficient_stats(ld.data, !tune_data.no_center);
            const auto opts = detail::to_options(tune_solver, !tune_data.no_center);
            std::optional<Matrix> gw;
            if (tune_adaptive)
                gw = adaptive_weights(mle_fit(stats).gamma);
            if (tune_lambdas.empty() || tune_rhos.empty()) {
                const auto g = default_grids(stats, tune_nl, tune_nr, tune_ratio, gw);
                if (tune_lambdas.empty())
                    tune_lambdas = g.lambda;
                if (tune_rhos.empty())
                    tune_rhos = g.rho;
            }
            GridOptions go;
            go.threads = tune_threads;
            auto res = grid_search(stats, tune_lambdas, tune_rhos, tune_adaptive, opts, go);
            io::ensure_dir(tune_out);
            io::write_bic_table(std::filesystem::path(tune_out) / "bic_grid.tsv", res.table);
            io::write_fit(res.best, tune_out, ld.genes, ld.markers);
            return ok;
        }
        if (*mlcmd) {
            auto ld = detail::load(ml_data);
            const auto res = mlasso_graph(ld.data, ml_lambda, kNonzeroTol, 1e-7, !ml_data.no_center);
            io::write_mlasso(res, ml_out, ld.genes, ld.markers);
            return ok;
        }
        if (*evalcmd) {
            const char delim = detail::delimiter_from(ev_delim);
            const auto truth = io::read_matrix(ev_truth, delim, false).data;
            const auto est = io::read_matrix(ev_est, delim, false).data;
            if (truth.rows() != truth.cols() || truth.rows() != est.rows() || truth.cols() != est.cols())
                throw InputError("eval: truth and estimate must be square matrices of the same size");
            const GraphReport r = evaluate(truth, est);
            io::write_json(ev_out, io::to_json(r));
            return ok;
        }
        if (*bench) {
            std::vector<Method> methods;
            for (const auto& m : bench_methods)
                methods.push_back(parse_method(m));
            BenchOptions bo;
            bo.threads = bench_threads;
            bo.solve.center = bench_center;
            const BenchTable t = run_benchmark(bench_cfg, bench_reps, methods, bench_grids, bo);
            if (bench_out.empty()) {
                io::write_bench_table(out, t);
            } else {
                auto f = io::open_out(bench_out);
                io::write_bench_table(f, t);
            }
            return ok;
        }
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return input_error;
    } catch (const io::IoError& e) {
        err << "error: " << e.what() << '\n';
        return input_error;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return input_error;
    } catch (const RankError& e) {
        err << "error: " << e.what() << '\n';
        return input_error;
    } catch (const ConvergenceError& e) {
        err << "error: " << e.what() << '\n';
        return convergence_error;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << '\n';
        return convergence_error;
    } catch (const InternalError& e) {
        err << "internal error: " << e.what() << '\n';
        return convergence_error;
    }
    return input_error;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return run(std::vector<std::string>(argv, argv + argc), out, err);
}

} // namespace cggm::cli
