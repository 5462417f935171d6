#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "torpde/cli.hpp"

namespace {

struct CommonArgs {
    std::string problem;
    std::string out = "out";
    std::vector<double> eps;
    int n = 0;
    std::string scheme;
    double tol = 0.0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_problem) {
    auto* p = cmd->add_option("--problem", args.problem, "problem config file (key = value format)");
    if (needs_problem) p->required();
    cmd->add_option("--out", args.out, "output directory")->capture_default_str();
    cmd->add_option("--eps", args.eps, "override the eps ladder (decreasing positives)")->delimiter(',');
    cmd->add_option("--n", args.n, "override the grid points per axis");
    cmd->add_option("--scheme", args.scheme, "upwind or centered");
    cmd->add_option("--tol", args.tol, "override all three tolerances");
}

torpde::ProblemSpec load_with_overrides(const CommonArgs& args) {
    torpde::ProblemSpec spec = torpde::load_problem(args.problem);
    if (!args.eps.empty()) spec.eps_ladder = args.eps;
    if (args.n > 0) spec.n = args.n;
    if (!args.scheme.empty()) {
        if (args.scheme == "upwind") spec.scheme = torpde::Scheme::upwind;
        else if (args.scheme == "centered") spec.scheme = torpde::Scheme::centered;
        else throw torpde::ConfigError("scheme must be 'upwind' or 'centered'", 0, "scheme");
    }
    if (args.tol > 0.0) {
        spec.tol_solver = args.tol;
        spec.tol_quad = args.tol;
        spec.tol_picard = args.tol;
    }
    torpde::validate_problem(spec);
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"first-order PDEs on flat tori: characteristics and vanishing viscosity"};
    app.require_subcommand(1);

    std::map<std::string, CommonArgs> args;
    std::vector<std::string> commands = {"check", "solve-linear", "solve-nonlinear",
                                         "characteristics", "sweep"};
    std::map<std::string, CLI::App*> subs;
    for (const auto& name : commands) {
        subs[name] = app.add_subcommand(name);
        add_common(subs[name], args[name], true);
    }
    subs["check"]->description("compute the named constants and the hyperbolicity verdicts");
    subs["solve-linear"]->description("solve the regularized linear equation at the first ladder eps");
    subs["solve-nonlinear"]->description("Picard iteration down the eps ladder");
    subs["characteristics"]->description("backward-characteristic values over a seed grid");
    subs["sweep"]->description("eps sweep against the characteristic reference");

    auto* exp_cmd = app.add_subcommand("experiment", "run a scripted experiment");
    CommonArgs exp_args;
    torpde::DispatchOptions exp_opt;
    exp_cmd->add_option("name", exp_opt.experiment,
                        "example1 | example2 | ergodic | blowup | gradient-symmetric")
        ->required();
    exp_cmd->add_option("--out", exp_args.out, "output directory")->capture_default_str();
    exp_cmd->add_option("--K", exp_opt.K, "stiffness of the linear surrogate")->capture_default_str();
    exp_cmd->add_option("--beta", exp_opt.beta, "nonlinearity size")->capture_default_str();
    exp_cmd->add_option("--alpha", exp_opt.alpha, "modulation size")->capture_default_str();
    exp_cmd->add_option("--f", exp_opt.f_override, "forcing expression override");

    int seeds = 16;
    subs["characteristics"]->add_option("--seeds", seeds, "seed points per axis")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return torpde::exit_code::usage;
    }

    try {
        if (exp_cmd->parsed()) return torpde::dispatch("experiment", nullptr, exp_args.out, exp_opt);
        for (const auto& name : commands) {
            if (subs[name]->parsed()) {
                torpde::ProblemSpec spec = load_with_overrides(args[name]);
                torpde::DispatchOptions opt;
                opt.seeds_per_axis = seeds;
                return torpde::dispatch(name, &spec, args[name].out, opt);
            }
        }
    } catch (const torpde::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return torpde::exit_code::usage;
    } catch (const torpde::ParseError& e) {
        std::cerr << "expression error: " << e.what() << "\n";
        return torpde::exit_code::usage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return torpde::exit_code::usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return torpde::exit_code::fail;
    }
    return torpde::exit_code::usage;
}
