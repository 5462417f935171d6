#pragma once

#include <filesystem>
#include <iostream>
#include <string>

#include "torpde/characteristics.hpp"
#include "torpde/constants.hpp"
#include "torpde/elliptic.hpp"
#include "torpde/experiments.hpp"
#include "torpde/io.hpp"
#include "torpde/nonlinear.hpp"
#include "torpde/problem.hpp"

namespace torpde {

namespace exit_code {
inline constexpr int pass = 0;
inline constexpr int fail = 1;   // a verdict or assertion failed
inline constexpr int usage = 2;  // configuration or usage error
}  // namespace exit_code

struct DispatchOptions {
    std::string experiment = "example1";
    int seeds_per_axis = 16;
    double K = 10.0;
    double beta = 0.1;
    double alpha = 0.5;
    std::string f_override;  // experiment forcing term; empty = default
    bool quiet = false;
};

namespace detail {

inline void write_experiment(const ExperimentResult& r, const std::filesystem::path& out) {
    FlatJson params;
    for (const auto& [k, v] : r.params) params.add_string(k, v);
    write_text_file(out / "parameters.json", params.str());
    for (const auto& [name, table] : r.tables) write_text_file(out / (name + ".csv"), table.str());
    std::string verdict = r.pass() ? "PASS\n" : "FAIL\n";
    for (const auto& a : r.assertions)
        verdict += std::string(a.pass ? "PASS " : "FAIL ") + a.name + ": " + a.detail + "\n";
    for (const auto& n : r.notes) verdict += "note: " + n + "\n";
    write_text_file(out / "verdict.txt", verdict);
}

inline ExperimentResult run_named_experiment(const DispatchOptions& opt) {
    const std::string& name = opt.experiment;
    if (name == "example1")
        return example1(opt.K, opt.beta, opt.alpha,
                        opt.f_override.empty() ? "2 + sin(x1)" : opt.f_override);
    if (name == "example2")
        return example2(opt.K, opt.beta, opt.alpha,
                        opt.f_override.empty() ? "2 + sin(x1)" : opt.f_override);
    if (name == "ergodic")
        return ergodic_average(opt.f_override.empty() ? "2 + cos(x1)" : opt.f_override, 1.0);
    if (name == "blowup")
        return blowup_zero_order({"sin(x1)"}, opt.f_override.empty() ? "1" : opt.f_override, {0.0, 0.0});
    if (name == "gradient-symmetric")
        return gradient_symmetric("cos(2*x1)", opt.f_override.empty() ? "sin(x1)" : opt.f_override);
    throw ConfigError("unknown experiment '" + name +
                      "' (expected example1, example2, ergodic, blowup, gradient-symmetric)");
}

}  // namespace detail

/// Run one subcommand pipeline and write its reports under out_dir.
/// Returns the process exit status.
inline int dispatch(const std::string& command, const ProblemSpec* spec,
                    const std::filesystem::path& out_dir, const DispatchOptions& opt = {}) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ostream& log = std::cout;

    if (command == "check") {
        if (!spec) throw ConfigError("check needs --problem");
        ConstantsReport rep = compute_constants(*spec, default_lambda_box(*spec), 128);
        write_text_file(out_dir / "constants.json", constants_to_json(rep));
        if (!opt.quiet) {
            log << (rep.c0_positive ? "PASS" : "FAIL") << " c0 > 0 (c0 = " << num_shortest(rep.c0)
                << ")\n";
            log << (rep.cond1 ? "PASS" : "FAIL")
                << " condition 1: c0 - b0 - gamma > 0 (= " << num_shortest(rep.c0 - rep.b0 - rep.gamma)
                << ")\n";
            double d = (rep.c0 - rep.b0 - rep.gamma) * (rep.c0 - rep.b0 - rep.gamma) -
                       4.0 * rep.f0 * rep.beta;
            log << (rep.cond2 ? "PASS" : "FAIL")
                << " condition 2: (c0 - b0 - gamma)^2 - 4 f0 beta > 0 (= " << num_shortest(d) << ")\n";
            log << "eps_bar = " << eps_bar(rep).str() << "\n";
            if (rep.gate()) log << "R(0) = " << num_shortest(r_of_eps(rep, 0.0)) << "\n";
        }
        return rep.gate() ? exit_code::pass : exit_code::fail;
    }

    if (command == "solve-linear") {
        if (!spec) throw ConfigError("solve-linear needs --problem");
        double eps = spec->eps_ladder.front();
        LinearSystem sys = assemble(*spec, eps, spec->scheme);
        SolveReport rep = solve(sys, spec->tol_solver, spec->max_iter);
        write_text_file(out_dir / "solution.csv", to_csv(rep.solution));
        FlatJson j;
        j.add_number("eps", rep.eps);
        j.add_number("residual_sup", rep.residual_sup);
        j.add_int("iterations", rep.iterations);
        j.add_bool("converged", rep.converged);
        j.add_bool("m_matrix", sys.m_matrix);
        write_text_file(out_dir / "report.json", j.str());
        if (!opt.quiet)
            log << (rep.converged ? "PASS" : "FAIL") << " solve-linear eps = " << num_shortest(eps)
                << " residual " << num_shortest(rep.residual_sup) << "\n";
        return rep.converged ? exit_code::pass : exit_code::fail;
    }

    if (command == "solve-nonlinear") {
        if (!spec) throw ConfigError("solve-nonlinear needs --problem");
        double h = spec->make_grid().h;
        double loose = 20.0 * (h + spec->eps_ladder.back());
        NonlinearLimitResult lim = viscosity_limit_nonlinear(*spec, spec->eps_ladder, loose);
        write_text_file(out_dir / "limit.csv", to_csv(lim.limit));
        CsvTable trace;
        trace.header = {"k", "w_norm", "ratio", "rho_star"};
        const PicardTrace& t = lim.traces.back();
        for (std::size_t k = 0; k < t.w_norms.size(); ++k)
            trace.add_row({std::to_string(k + 1), num17(t.w_norms[k]),
                           k >= 1 ? num17(t.ratios[k - 1]) : "", num17(t.rho_star)});
        write_text_file(out_dir / "picard_trace.csv", trace.str());
        CsvTable ladder;
        ladder.header = {"eps", "consecutive_dist", "iterations", "nonlinear_residual"};
        for (std::size_t i = 0; i < lim.eps.size(); ++i)
            ladder.add_row({num17(lim.eps[i]), i == 0 ? "" : num17(lim.consecutive_dist[i - 1]),
                            std::to_string(lim.traces[i].iterations),
                            num17(lim.traces[i].nonlinear_residual)});
        write_text_file(out_dir / "ladder.csv", ladder.str());
        FlatJson j;
        j.add_bool("cauchy", lim.cauchy);
        j.add_number("first_order_residual", lim.first_order_residual);
        j.add_bool("first_order_residual_ok", lim.residual_ok);
        bool all_conv = true;
        for (const auto& tr : lim.traces) all_conv = all_conv && tr.converged;
        j.add_bool("picard_converged", all_conv);
        write_text_file(out_dir / "report.json", j.str());
        bool ok = lim.cauchy && all_conv && lim.residual_ok;
        if (!opt.quiet)
            log << (ok ? "PASS" : "FAIL") << " solve-nonlinear: cauchy " << (lim.cauchy ? "yes" : "no")
                << ", first-order residual " << num_shortest(lim.first_order_residual) << "\n";
        return ok ? exit_code::pass : exit_code::fail;
    }

    if (command == "characteristics") {
        if (!spec) throw ConfigError("characteristics needs --problem");
        CsvTable t;
        t.header = spec->dim == 1 ? std::vector<std::string>{"x1", "value"}
                                  : std::vector<std::string>{"x1", "x2", "value"};
        int k = opt.seeds_per_axis;
        double step = two_pi / k;
        if (spec->dim == 1) {
            for (int i = 0; i < k; ++i) {
                double x = i * step;
                t.add_row({num17(x), num17(solve_by_characteristics(*spec, {x, 0.0}, spec->tol_quad))});
            }
        } else {
            for (int j = 0; j < k; ++j)
                for (int i = 0; i < k; ++i) {
                    double x = i * step, y = j * step;
                    t.add_row({num17(x), num17(y),
                               num17(solve_by_characteristics(*spec, {x, y}, spec->tol_quad))});
                }
        }
        write_text_file(out_dir / "characteristics.csv", t.str());

        // Orbit report on S^1 when the field never vanishes: the orbit
        // formula and its swapped-coefficient variant against the quadrature
        // value. orbit_formula is the variant the library uses.
        if (spec->dim == 1 && !spec->lambda_dependent()) {
            try {
                OrbitData orbit = find_period_s1(*spec, 1e-12);
                CsvTable rep;
                rep.header = {"t", "orbit_formula", "swapped_coefficients", "quadrature"};
                for (int i = 0; i < 8; ++i) {
                    double t_phase = orbit.period * i / 8.0;
                    double by_orbit = periodic_orbit_value(orbit, t_phase);
                    double by_swapped = periodic_orbit_value_swapped(orbit, t_phase);
                    double x = wrap_coord(orbit.pos_at(t_phase));
                    double by_quadrature =
                        solve_by_characteristics(*spec, {x, 0.0}, std::min(spec->tol_quad, 1e-8));
                    rep.add_row({num17(t_phase), num17(by_orbit), num17(by_swapped),
                                 num17(by_quadrature)});
                }
                FlatJson j;
                j.add_number("period", orbit.period);
                write_text_file(out_dir / "orbit.json", j.str());
                write_text_file(out_dir / "orbit_value_forms.csv", rep.str());
            } catch (const GateError&) {
                // field vanishes somewhere: no global periodic orbit to report
            }
        }
        return exit_code::pass;
    }

    if (command == "sweep") {
        if (!spec) throw ConfigError("sweep needs --problem");
        SweepResult sw = viscosity_sweep(*spec, spec->eps_ladder, SweepReference::characteristics);
        CsvTable t;
        t.header = {"eps", "sup_error", "iterations", "residual"};
        for (const auto& row : sw.rows)
            t.add_row({num17(row.eps), num17(row.sup_error), std::to_string(row.iterations),
                       num17(row.residual)});
        write_text_file(out_dir / "sweep.csv", t.str());
        bool ok = sw.all_converged && sw.monotone;
        if (!opt.quiet)
            log << (ok ? "PASS" : "FAIL") << " sweep: monotone " << (sw.monotone ? "yes" : "no")
                << ", last error "
                << num_shortest(sw.rows.empty() ? 0.0 : sw.rows.back().sup_error) << "\n";
        return ok ? exit_code::pass : exit_code::fail;
    }

    if (command == "experiment") {
        ExperimentResult r = detail::run_named_experiment(opt);
        detail::write_experiment(r, out_dir);
        if (!opt.quiet) {
            log << (r.pass() ? "PASS" : "FAIL") << " experiment " << r.name << "\n";
            for (const auto& a : r.assertions)
                log << "  " << (a.pass ? "PASS " : "FAIL ") << a.name << ": " << a.detail << "\n";
        }
        return r.pass() ? exit_code::pass : exit_code::fail;
    }

    throw ConfigError("unknown command '" + command + "'");
}

}  // namespace torpde
