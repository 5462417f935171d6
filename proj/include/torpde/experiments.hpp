#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "torpde/characteristics.hpp"
#include "torpde/constants.hpp"
#include "torpde/elliptic.hpp"
#include "torpde/grid.hpp"
#include "torpde/io.hpp"
#include "torpde/nonlinear.hpp"
#include "torpde/problem.hpp"

namespace torpde {

struct Assertion {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ExperimentResult {
    std::string name;
    std::vector<std::pair<std::string, std::string>> params;
    std::vector<std::pair<std::string, CsvTable>> tables;
    std::vector<Assertion> assertions;
    std::vector<std::string> notes;

    bool pass() const {
        for (const auto& a : assertions)
            if (!a.pass) return false;
        return true;
    }

    void assert_that(const std::string& name_, bool ok, const std::string& detail_) {
        assertions.push_back({name_, ok, detail_});
    }
};

/// Probabilistic identity check for expression trees: evaluate the difference
/// at random (x, lam) points and require agreement to tol relative to scale.
inline bool exprs_agree(const FieldExpr& a, const FieldExpr& b, int points, double tol,
                        Interval lambda_box, unsigned seed = 20240811) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> ux(0.0, two_pi);
    std::uniform_real_distribution<double> ul(lambda_box.lo, lambda_box.hi);
    double worst = 0.0;
    for (int k = 0; k < points; ++k) {
        double x[2] = {ux(rng), ux(rng)};
        double lam = ul(rng);
        double va = a.eval(x, lam);
        double vb = b.eval(x, lam);
        worst = std::max(worst, std::fabs(va - vb) / std::max(1.0, std::fabs(va)));
    }
    return worst <= tol;
}

// ---------------------------------------------------------------------------
// Example 1: b(u,x) = 1 + beta (1 + alpha cos x) u, with the zero-order
// coefficient chosen so the equation is exactly U' + K U = f under
// U = u + beta (1 + alpha cos x) u^2 / 2.
// ---------------------------------------------------------------------------

struct Example1Setup {
    double K, beta, alpha;
    std::string f_source;
    std::string b_source;
    std::string c_source;
    FieldExpr substitution;  // U(lam, x)
};

inline Example1Setup example1_setup(double K, double beta, double alpha, const std::string& f_src) {
    Example1Setup s;
    s.K = K;
    s.beta = beta;
    s.alpha = alpha;
    s.f_source = f_src;
    std::string g1 = "(1 + " + num_shortest(alpha) + "*cos(x1))";
    s.b_source = "1 + " + num_shortest(beta) + "*" + g1 + "*lam";
    s.c_source = num_shortest(K) + " + " + num_shortest(K * beta / 2.0) + "*" + g1 + "*lam - " +
                 num_shortest(beta * alpha / 2.0) + "*lam*sin(x1)";
    s.substitution =
        parse_field_expr("lam + " + num_shortest(beta / 2.0) + "*" + g1 + "*lam^2", 1);
    return s;
}

/// Solve the linear surrogate U' + K U = f through the periodic-orbit
/// integral formula (b = 1, so the whole circle is one orbit of period 2pi).
inline GridFunction example1_linear_surrogate(double K, const std::string& f_src, const TorusGrid& g) {
    ProblemSpec lin = make_problem(1, {"1"}, num_shortest(K), f_src);
    lin.n = g.n;
    OrbitData orbit = find_period_s1(lin, 1e-12);
    GridFunction U(g);
    for (int i = 0; i < g.n; ++i) U.at(i) = periodic_orbit_value(orbit, i * g.h);
    return U;
}

inline ExperimentResult example1(double K, double beta, double alpha, const std::string& f_src,
                                 int n = 512, std::vector<double> eps_ladder = {0.4, 0.2, 0.1, 0.05, 0.025}) {
    if (K <= 0.0) throw std::invalid_argument("example1: K must be positive");
    FieldExpr f = parse_field_expr(f_src, 1);
    for (int i = 0; i < 4096; ++i)
        if (f.eval1(i * two_pi / 4096) <= 0.0)
            throw std::invalid_argument("example1: f must be positive on the circle");

    Example1Setup setup = example1_setup(K, beta, alpha, f_src);
    ExperimentResult res;
    res.name = "example1";
    res.params = {{"K", num17(K)},
                  {"beta", num17(beta)},
                  {"alpha", num17(alpha)},
                  {"f", f_src},
                  {"n", std::to_string(n)}};

    TorusGrid g(1, n);
    GridFunction U = example1_linear_surrogate(K, f_src, g);

    // coefficient consistency: b = dU/dlam and c*lam = dU/dx + K*U, checked
    // from the exact derivative trees at random points
    {
        FieldExpr b_expr = parse_field_expr(setup.b_source, 1);
        FieldExpr c_expr = parse_field_expr(setup.c_source, 1);
        FieldExpr lam_expr = parse_field_expr("lam", 1);
        FieldExpr dU_dlam = differentiate(setup.substitution, "lam");
        FieldExpr dU_dx = differentiate(setup.substitution, "x1");
        FieldExpr kU = expr_mul(expr_const(K, 1), setup.substitution);
        bool ok1 = exprs_agree(b_expr, dU_dlam, 1000, 1e-12, {-1.0, 1.0});
        bool ok2 = exprs_agree(expr_mul(c_expr, lam_expr), expr_add(dU_dx, kU), 1000, 1e-12, {-1.0, 1.0});
        res.assert_that("coefficient_identity", ok1 && ok2,
                        "b = dU/dlam and c*lam = dU/dx + K U at 1000 random points");
    }

    // discriminant and branches
    std::vector<double> delta(static_cast<std::size_t>(n)), g1v(static_cast<std::size_t>(n));
    double delta_min = std::numeric_limits<double>::infinity();
    double delta_max = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        double x = i * g.h;
        g1v[static_cast<std::size_t>(i)] = 1.0 + alpha * std::cos(x);
        delta[static_cast<std::size_t>(i)] =
            1.0 + 2.0 * beta * g1v[static_cast<std::size_t>(i)] * U.at(i);
        delta_min = std::min(delta_min, delta[static_cast<std::size_t>(i)]);
        delta_max = std::max(delta_max, delta[static_cast<std::size_t>(i)]);
    }
    bool exists_everywhere = delta_min > 0.0;
    res.assert_that("discriminant_positive_everywhere", exists_everywhere,
                    "Delta in [" + num_shortest(delta_min) + ", " + num_shortest(delta_max) + "]");
    if (!exists_everywhere) {
        // report the intervals where the solutions leave the real domain
        std::string regions;
        bool inside = false;
        double start = 0.0;
        for (int i = 0; i <= n; ++i) {
            bool bad = delta[static_cast<std::size_t>(i % n)] <= 0.0;
            if (bad && !inside) {
                start = (i % n) * g.h;
                inside = true;
            } else if (!bad && inside) {
                regions += " [" + num_shortest(start) + ", " + num_shortest((i % n) * g.h) + ")";
                inside = false;
            }
        }
        res.notes.push_back("no real solutions on:" + regions);
    }

    CsvTable branches;
    branches.header = {"x1", "U", "delta", "u_plus", "u_minus"};
    std::vector<double> up(static_cast<std::size_t>(n)), um(static_cast<std::size_t>(n));
    double res_plus = 0.0, res_minus = 0.0;
    double up_min = std::numeric_limits<double>::infinity();
    double um_max = -std::numeric_limits<double>::infinity();
    FieldExpr b_expr = parse_field_expr(setup.b_source, 1);
    FieldExpr c_expr = parse_field_expr(setup.c_source, 1);
    FieldExpr fe = parse_field_expr(f_src, 1);
    for (int i = 0; i < n; ++i) {
        std::size_t ii = static_cast<std::size_t>(i);
        double x = i * g.h;
        double Ui = U.at(i);
        double dUi = fe.eval1(x) - K * Ui;  // U' = f - K U, exact along the surrogate
        std::vector<std::string> row{num17(x), num17(Ui), num17(delta[ii])};
        if (beta == 0.0) {
            up[ii] = Ui;
            um[ii] = Ui;
            double resid = std::fabs(1.0 * dUi + K * Ui - fe.eval1(x));
            res_plus = std::max(res_plus, resid);
            res_minus = res_plus;
            row.push_back(num17(Ui));
            row.push_back(num17(Ui));
        } else if (delta[ii] > 0.0) {
            double s = std::sqrt(delta[ii]);
            double bg = beta * g1v[ii];
            double g1p = -alpha * std::sin(x);
            double dDelta = 2.0 * beta * (g1p * Ui + g1v[ii] * dUi);
            for (int sign = +1; sign >= -1; sign -= 2) {
                double root = (-1.0 + sign * s) / bg;
                // d/dx [(-1 + sign*sqrt(Delta)) / (beta g1)] with U' = f - K U
                double droot =
                    sign * dDelta / (2.0 * s * bg) - (-1.0 + sign * s) * beta * g1p / (bg * bg);
                double resid = std::fabs(b_expr.eval1(x, root) * droot +
                                         c_expr.eval1(x, root) * root - fe.eval1(x));
                if (sign > 0) {
                    up[ii] = root;
                    up_min = std::min(up_min, root);
                    res_plus = std::max(res_plus, resid);
                } else {
                    um[ii] = root;
                    um_max = std::max(um_max, root);
                    res_minus = std::max(res_minus, resid);
                }
            }
            row.push_back(num17(up[ii]));
            row.push_back(num17(um[ii]));
        } else {
            row.push_back("");
            row.push_back("");
        }
        branches.add_row(std::move(row));
    }
    res.tables.emplace_back("branches", std::move(branches));

    if (exists_everywhere) {
        res.assert_that("branch_residual_plus", res_plus <= 1e-6,
                        "max residual " + num_shortest(res_plus));
        res.assert_that("branch_residual_minus", res_minus <= 1e-6,
                        "max residual " + num_shortest(res_minus));
        if (beta > 0.0) {
            res.assert_that("branch_signs", up_min > 0.0 && um_max < 0.0,
                            "u+ > 0 and u- < 0 (min u+ = " + num_shortest(up_min) +
                                ", max u- = " + num_shortest(um_max) + ")");
        }

        // which branch is selected by the vanishing-viscosity process; the
        // regularized solve only applies while the hyperbolicity gate holds
        ProblemSpec p = make_problem(1, {setup.b_source}, setup.c_source, f_src);
        p.n = n;
        p.tol_solver = 1e-12;
        p.tol_picard = 1e-10;
        ConstantsReport gate = compute_constants(p, default_lambda_box(p), 128);
        res.params.emplace_back("hyperbolicity_gate", gate.gate() ? "pass" : "fail");
        if (!gate.gate()) {
            res.notes.push_back("hyperbolicity gate fails at these parameters; viscosity selection skipped");
        } else {
            NonlinearLimitResult lim = viscosity_limit_nonlinear(p, eps_ladder, 1e-2);
            GridFunction up_grid(g), um_grid(g);
            up_grid.values = up;
            um_grid.values = um;
            double dist_plus = sup_dist(lim.limit, up_grid);
            double dist_minus = sup_dist(lim.limit, um_grid);
            if (beta == 0.0) {
                res.assert_that("viscosity_matches_linear_solution", dist_plus <= 1e-2,
                                "sup distance to U " + num_shortest(dist_plus));
            } else {
                res.params.emplace_back("selected_branch",
                                        dist_plus <= dist_minus ? "u_plus" : "u_minus");
                res.assert_that("viscosity_selects_plus_branch",
                                dist_plus <= 1e-2 && dist_plus < dist_minus,
                                "sup distance to u+ " + num_shortest(dist_plus) + ", to u- " +
                                    num_shortest(dist_minus));
            }

            CsvTable visc;
            visc.header = {"eps", "consecutive_dist", "picard_iterations"};
            for (std::size_t i = 0; i < lim.eps.size(); ++i)
                visc.add_row({num17(lim.eps[i]),
                              i == 0 ? "" : num17(lim.consecutive_dist[i - 1]),
                              std::to_string(lim.traces[i].iterations)});
            res.tables.emplace_back("viscosity", std::move(visc));
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Example 2: U = u - beta/2 (1 + alpha cos x) g(u), g(u) = (e^{-u^2} - 1)/u.
// The coefficient functions involve removable singularities at u = 0, so the
// gate constants are computed from closed-form evaluators instead of parsed
// expressions.
// ---------------------------------------------------------------------------

namespace detail {

inline double ex2_G(double lam) {  // (e^{-lam^2} - 1) / lam^2, G(0) = -1
    double l2 = lam * lam;
    if (l2 < 1e-12) return -1.0 + 0.5 * l2;
    return std::expm1(-l2) / l2;
}

inline double ex2_G_prime(double lam) {  // G'(lam), G'(0) = 0
    double l2 = lam * lam;
    if (l2 < 1e-8) return lam - (2.0 / 3.0) * lam * l2;
    return (-2.0 / lam) * (std::exp(-l2) + ex2_G(lam));
}

inline double ex2_g(double lam) { return lam * ex2_G(lam); }                         // g(0) = 0
inline double ex2_g_prime(double lam) { return -2.0 * std::exp(-lam * lam) - ex2_G(lam); }
inline double ex2_g_second(double lam) {
    return 4.0 * lam * std::exp(-lam * lam) - ex2_G_prime(lam);
}

}  // namespace detail

struct Example2Constants {
    double b0, beta_c, c0, f0, gamma;
    bool cond1, cond2;
    Interval lambda_box;
};

/// Hyperbolicity constants for the example-2 coefficient pair
///   b(lam,x) = 1 - beta/2 (1+alpha cos x) g'(lam)
///   c(lam,x) = K + [beta alpha sin(x)/2 - K beta/2 (1+alpha cos x)] G(lam)
/// sampled densely over grid x lambda box.
inline Example2Constants example2_constants(double K, double beta, double alpha,
                                            const FieldExpr& f, Interval box, int samples = 256) {
    Example2Constants r{};
    r.lambda_box = box;
    double b0 = -std::numeric_limits<double>::infinity();
    double beta_c = 0.0;
    double c0 = std::numeric_limits<double>::infinity();
    double dc = 0.0, dcl = 0.0, fs = 0.0, dfs = 0.0;
    FieldExpr df = differentiate(f, "x1");
    for (int li = 0; li < samples; ++li) {
        double lam = box.lo + (box.hi - box.lo) * li / (samples - 1);
        double G = detail::ex2_G(lam);
        double gp = detail::ex2_g_prime(lam);
        double gpp = detail::ex2_g_second(lam);
        double Gp = detail::ex2_G_prime(lam);
        for (int i = 0; i < samples; ++i) {
            double x = i * two_pi / samples;
            double g1 = 1.0 + alpha * std::cos(x);
            double g1p = -alpha * std::sin(x);
            // b = 1 - beta/2 g1 g'(lam)
            b0 = std::max(b0, -0.5 * beta * g1p * gp);              // db/dx
            beta_c = std::max(beta_c, std::fabs(-0.5 * beta * g1 * gpp));  // db/dlam
            double q = 0.5 * beta * alpha * std::sin(x) - 0.5 * K * beta * g1;
            double qx = 0.5 * beta * alpha * std::cos(x) - 0.5 * K * beta * g1p;
            c0 = std::min(c0, K + q * G);
            dc = std::max(dc, std::fabs(qx * G));
            dcl = std::max(dcl, std::fabs(q * Gp));
            if (li == 0) {
                fs = std::max(fs, std::fabs(f.eval1(x)));
                dfs = std::max(dfs, std::fabs(df.eval1(x)));
            }
        }
    }
    r.b0 = b0;
    r.beta_c = beta_c;
    r.c0 = c0;
    if (c0 > 0.0) {
        r.f0 = dfs + fs * dc / c0;
        r.gamma = dcl * fs / c0;
        double a = c0 - b0 - r.gamma;
        r.cond1 = a > 0.0;
        r.cond2 = a * a - 4.0 * r.f0 * beta_c > 0.0;
    }
    return r;
}

inline ExperimentResult example2(double K, double beta, double alpha, const std::string& f_src,
                                 int n = 512) {
    if (K <= 0.0) throw std::invalid_argument("example2: K must be positive");
    FieldExpr f = parse_field_expr(f_src, 1);

    ExperimentResult res;
    res.name = "example2";
    res.params = {{"K", num17(K)},
                  {"beta", num17(beta)},
                  {"alpha", num17(alpha)},
                  {"f", f_src},
                  {"n", std::to_string(n)}};

    TorusGrid g(1, n);
    GridFunction U = example1_linear_surrogate(K, f_src, g);

    // a-priori box from the surrogate plus slack; the scan enumerates roots on
    // a padded version of it
    double u_lo = 0.0, u_hi = 0.0;
    for (double v : U.values) {
        u_lo = std::min(u_lo, v);
        u_hi = std::max(u_hi, v);
    }
    double pad = 0.5 * (u_hi - u_lo) + 0.5;
    Interval box{u_lo - pad, u_hi + pad};

    Example2Constants cst = example2_constants(K, beta, alpha, f, box);
    res.params.emplace_back("c0", num17(cst.c0));
    res.assert_that("hyperbolicity_gate", cst.cond1 && cst.cond2,
                    "cond1 " + std::string(cst.cond1 ? "ok" : "fails") + ", cond2 " +
                        (cst.cond2 ? "ok" : "fails"));

    // invert U = u - beta/2 (1 + alpha cos x) g(u) per node by a bracketing
    // scan plus bisection
    auto subst = [&](double lam, double x) {
        return lam - 0.5 * beta * (1.0 + alpha * std::cos(x)) * detail::ex2_g(lam);
    };
    const int scan = 4096;
    CsvTable roots_table;
    roots_table.header = {"x1", "U", "root_count", "first_root", "max_residual"};
    double max_resid = 0.0;
    int min_roots = std::numeric_limits<int>::max();
    int max_roots = 0;
    double max_dev_from_U = 0.0;  // only meaningful when beta == 0
    bool all_have_roots = true;
    for (int i = 0; i < n; ++i) {
        double x = i * g.h;
        double target = U.at(i);
        std::vector<double> roots;
        double prev_l = box.lo;
        double prev_v = subst(prev_l, x) - target;
        double node_resid = 0.0;
        for (int s = 1; s <= scan; ++s) {
            double l = box.lo + (box.hi - box.lo) * s / scan;
            double v = subst(l, x) - target;
            if (v == 0.0 || (v > 0.0) != (prev_v > 0.0)) {
                double a = prev_l, b = l;
                double fa = prev_v;
                for (int it = 0; it < 80; ++it) {
                    double m = 0.5 * (a + b);
                    double fm = subst(m, x) - target;
                    if ((fm > 0.0) == (fa > 0.0)) {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                double root = 0.5 * (a + b);
                roots.push_back(root);
                node_resid = std::max(node_resid, std::fabs(subst(root, x) - target));
            }
            prev_l = l;
            prev_v = v;
        }
        if (roots.empty()) all_have_roots = false;
        min_roots = std::min(min_roots, static_cast<int>(roots.size()));
        max_roots = std::max(max_roots, static_cast<int>(roots.size()));
        max_resid = std::max(max_resid, node_resid);
        if (beta == 0.0 && !roots.empty())
            max_dev_from_U = std::max(max_dev_from_U, std::fabs(roots.front() - target));
        roots_table.add_row({num17(x), num17(target), std::to_string(roots.size()),
                             roots.empty() ? "" : num17(roots.front()), num17(node_resid)});
    }
    res.tables.emplace_back("roots", std::move(roots_table));
    res.assert_that("root_in_box_everywhere", all_have_roots,
                    "root count per node in [" + std::to_string(min_roots) + ", " +
                        std::to_string(max_roots) + "]");
    res.assert_that("max_residual", max_resid <= 1e-8, "max |U(root) - U| = " + num_shortest(max_resid));
    if (beta == 0.0)
        res.assert_that("linear_reduction", max_dev_from_U <= 1e-12,
                        "beta = 0 reduces to u = U, deviation " + num_shortest(max_dev_from_U));
    return res;
}

// ---------------------------------------------------------------------------
// Ergodic averaging on T^2 along b = (1, omega).
// ---------------------------------------------------------------------------

inline ExperimentResult ergodic_average(const std::string& f_src, double c_const,
                                        double omega = std::numbers::sqrt2, double t_max = 1e4,
                                        double dt = 0.01, int n = 128) {
    if (c_const <= 0.0) throw std::invalid_argument("ergodic_average: c must be positive");
    ProblemSpec p = make_problem(2, {"1", num_shortest(omega)}, num_shortest(c_const), f_src);
    p.n = n;

    ExperimentResult res;
    res.name = "ergodic_average";
    res.params = {{"f", f_src},
                  {"c", num17(c_const)},
                  {"omega", num17(omega)},
                  {"t_max", num17(t_max)},
                  {"dt", num17(dt)}};

    // space average of f / c over the torus
    TorusGrid g(2, n);
    GridFunction fg = sample(p.f, g);
    double mean = 0.0;
    for (double v : fg.values) mean += v;
    mean /= fg.values.size();
    double space_avg = mean / c_const;

    // u at the seed point by backward quadrature, then forward transport:
    // along the trajectory du/dt + c u = f, which is integrated jointly with
    // the running time integral of u
    double uP = solve_by_characteristics(p, {0.0, 0.0}, 1e-10);
    double y[4] = {0.0, 0.0, uP, 0.0};  // x1, x2, u, int_0^t u
    auto rhs = [&](const double* s, double* d) {
        double w[2] = {wrap_coord(s[0]), wrap_coord(s[1])};
        d[0] = 1.0;
        d[1] = omega;
        d[2] = p.f.eval(w, 0.0) - c_const * s[2];
        d[3] = s[2];
    };
    long steps = static_cast<long>(std::ceil(t_max / dt));
    double step = t_max / static_cast<double>(steps);
    CsvTable avg_table;
    avg_table.header = {"t", "running_average"};
    long checkpoint = std::max<long>(1, steps / 100);
    for (long k = 1; k <= steps; ++k) {
        double k1[4], k2[4], k3[4], k4[4], t[4];
        rhs(y, k1);
        for (int i = 0; i < 4; ++i) t[i] = y[i] + 0.5 * step * k1[i];
        rhs(t, k2);
        for (int i = 0; i < 4; ++i) t[i] = y[i] + 0.5 * step * k2[i];
        rhs(t, k3);
        for (int i = 0; i < 4; ++i) t[i] = y[i] + step * k3[i];
        rhs(t, k4);
        for (int i = 0; i < 4; ++i) y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (k % checkpoint == 0 || k == steps) {
            double tt = k * step;
            avg_table.add_row({num17(tt), num17(y[3] / tt)});
        }
    }
    double time_avg = y[3] / t_max;
    res.tables.emplace_back("running_average", std::move(avg_table));
    res.params.emplace_back("time_average", num17(time_avg));
    res.params.emplace_back("space_average", num17(space_avg));
    res.assert_that("time_average_matches_space_average", std::fabs(time_avg - space_avg) <= 1e-2,
                    "time avg " + num_shortest(time_avg) + " vs space avg " + num_shortest(space_avg));
    return res;
}

// ---------------------------------------------------------------------------
// Zero-order-term blow-up and its gradient-symmetric variant.
// ---------------------------------------------------------------------------

enum class RepellerCase { symmetric_positive, split_positive, not_applicable };

/// Classify the linearization B of b at a critical point: case 1 requires B
/// symmetric positive definite; case 2 splits B = S + A with S = sym(B)
/// positive definite and S A antisymmetric (equivalently S and A commute).
inline RepellerCase classify_linearization(const double* B, int m) {
    if (m == 1) return B[0] > 0.0 ? RepellerCase::symmetric_positive : RepellerCase::not_applicable;
    double s11 = B[0], s22 = B[3];
    double s12 = 0.5 * (B[1] + B[2]);
    double a12 = 0.5 * (B[1] - B[2]);
    bool s_posdef = s11 > 0.0 && s11 * s22 - s12 * s12 > 0.0;
    if (!s_posdef) return RepellerCase::not_applicable;
    if (std::fabs(a12) < 1e-14) return RepellerCase::symmetric_positive;
    // SA antisymmetric <=> S and A commute; for 2x2 with A = a12 * J this
    // reduces to S being a multiple of the identity
    bool commute = std::fabs(s12) < 1e-12 && std::fabs(s11 - s22) < 1e-12;
    return commute ? RepellerCase::split_positive : RepellerCase::not_applicable;
}

/// Solve eps L u + <b, grad u> + c u = f for each eps with c identically
/// c_val (c_val = eps realizes the vanishing-zero-order equation).
inline GridFunction solve_constant_c(const ProblemSpec& p, double eps, double c_val, double tol,
                                     long max_iter) {
    TorusGrid g = p.make_grid();
    std::vector<GridFunction> b;
    for (const auto& comp : p.b) b.push_back(sample(comp, g));
    GridFunction c(g, c_val);
    GridFunction f = sample(p.f, g);
    LinearSystem sys = assemble_fields(g, eps, Scheme::upwind, b, c, f);
    SolveReport rep = solve(sys, tol, max_iter);
    if (!rep.converged) throw std::runtime_error("relaxation did not converge at eps = " + num_shortest(eps));
    return rep.solution;
}

inline ExperimentResult blowup_zero_order(const std::vector<std::string>& b_src,
                                          const std::string& f_src, std::array<double, 2> a,
                                          std::vector<double> eps_ladder = {0.2, 0.1, 0.05, 0.025, 0.0125},
                                          int n = 512, double control_c = 2.0) {
    int dim = static_cast<int>(b_src.size());
    ProblemSpec p = make_problem(dim, b_src, "1", f_src);
    p.n = n;

    ExperimentResult res;
    res.name = "blowup_zero_order";
    res.params = {{"b1", b_src[0]}, {"f", f_src}, {"a1", num17(a[0])}, {"n", std::to_string(n)}};
    if (dim == 2) {
        res.params.insert(res.params.begin() + 1, {"b2", b_src[1]});
        res.params.emplace_back("a2", num17(a[1]));
    }

    // preconditions: b(a) = 0, repelling linearization, f(a) != 0
    double w[2] = {wrap_coord(a[0]), dim == 2 ? wrap_coord(a[1]) : 0.0};
    double bnorm2 = 0.0;
    for (const auto& comp : p.b) {
        double v = comp.eval(w, 0.0);
        bnorm2 += v * v;
    }
    if (std::sqrt(bnorm2) > 1e-10)
        throw std::invalid_argument("blowup_zero_order: a is not a critical point of b");
    double J[4] = {0, 0, 0, 0};
    const char* axes[2] = {"x1", "x2"};
    for (int i = 0; i < dim; ++i)
        for (int ax = 0; ax < dim; ++ax)
            J[2 * i + ax] = differentiate(p.b[static_cast<std::size_t>(i)], axes[ax]).eval(w, 0.0);
    RepellerCase rc = classify_linearization(J, dim);
    if (rc == RepellerCase::not_applicable)
        throw std::invalid_argument("blowup_zero_order: linearization at a is not a repeller");
    res.params.emplace_back("repeller_case",
                            rc == RepellerCase::symmetric_positive ? "symmetric_positive" : "split_positive");
    double fa = p.f.eval(w, 0.0);
    res.params.emplace_back("f_at_a", num17(fa));

    CsvTable table;
    table.header = {"eps", "u_at_a", "increment", "increment_ratio"};
    std::vector<double> values;
    for (double eps : eps_ladder) {
        GridFunction u = solve_constant_c(p, eps, eps, 1e-10, p.max_iter);
        values.push_back(interpolate(u, w));
    }
    bool increasing = true;
    bool ratios_ok = true;
    double sgn = values.back() >= 0.0 ? 1.0 : -1.0;
    double prev_inc = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        std::string inc_s, ratio_s;
        if (k > 0) {
            double inc = sgn * (values[k] - values[k - 1]);
            if (inc <= 0.0) increasing = false;
            inc_s = num17(inc);
            if (k > 1) {
                double ratio = inc / prev_inc;
                if (ratio < 0.5) ratios_ok = false;
                ratio_s = num17(ratio);
            }
            prev_inc = inc;
        }
        table.add_row({num17(eps_ladder[k]), num17(values[k]), inc_s, ratio_s});
    }
    res.tables.emplace_back("divergence", std::move(table));
    if (fa == 0.0) {
        res.assert_that("no_growth_for_vanishing_f", !increasing || std::fabs(values.back()) < 1e-8,
                        "f(a) = 0: no divergence expected");
    } else {
        res.assert_that("strictly_increasing_at_a", increasing,
                        "|u_eps(a)| grows as eps decreases, final " + num_shortest(values.back()));
        res.assert_that("log_like_increments", ratios_ok,
                        "each increment at least half the previous one");
    }

    // contrast run: restoring a uniform zero-order term c recovers f(a)/c
    if (control_c > 0.0) {
        double u_ctrl = 0.0;
        for (double eps : {eps_ladder.back()}) {
            GridFunction u = solve_constant_c(p, eps, control_c, 1e-10, p.max_iter);
            u_ctrl = interpolate(u, w);
        }
        double expected = fa / control_c;
        res.params.emplace_back("control_c", num17(control_c));
        res.params.emplace_back("control_value", num17(u_ctrl));
        res.assert_that("control_converges_to_ratio", std::fabs(u_ctrl - expected) <= 1e-2,
                        "u_eps(a) = " + num_shortest(u_ctrl) + " vs f(a)/c = " + num_shortest(expected));
    }
    return res;
}

inline ExperimentResult gradient_symmetric(const std::string& phi_src, const std::string& f_src,
                                           std::vector<double> eps_ladder = {0.2, 0.1, 0.05, 0.025, 0.0125},
                                           int n = 512) {
    FieldExpr phi = parse_field_expr(phi_src, 1);
    FieldExpr f = parse_field_expr(f_src, 1);

    // parity: phi even, f odd (about 0 on the circle)
    double phi_scale = 0.0, f_scale = 0.0, even_dev = 0.0, odd_dev = 0.0;
    const int scan = 2048;
    for (int i = 0; i < scan; ++i) {
        double x = i * two_pi / scan;
        double mx = wrap_coord(-x);
        phi_scale = std::max(phi_scale, std::fabs(phi.eval1(x)));
        f_scale = std::max(f_scale, std::fabs(f.eval1(x)));
        even_dev = std::max(even_dev, std::fabs(phi.eval1(x) - phi.eval1(mx)));
        odd_dev = std::max(odd_dev, std::fabs(f.eval1(x) + f.eval1(mx)));
    }
    if (even_dev > 1e-10 * (1.0 + phi_scale))
        throw std::invalid_argument("gradient_symmetric: phi is not even");
    if (odd_dev > 1e-10 * (1.0 + f_scale))
        throw std::invalid_argument("gradient_symmetric: f is not odd");

    FieldExpr b = differentiate(phi, "x1");
    FieldExpr bp = differentiate(b, "x1");
    bool f_zero = f_scale < 1e-14;

    // locate minima of phi and require f != 0 at one of them (unless f is
    // identically zero, in which case the run is the trivial bounded case)
    TorusGrid g(1, n);
    double a_found = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> minima;
    for (int i = 0; i < n; ++i) {
        double xm = (i - 1) * g.h, x = i * g.h, xp = (i + 1) * g.h;
        if (phi.eval1(x) < phi.eval1(xm) && phi.eval1(x) < phi.eval1(xp)) {
            // polish by bisection on b = phi'
            double lo = xm, hi = xp;
            for (int it = 0; it < 60; ++it) {
                double mid = 0.5 * (lo + hi);
                if ((b.eval1(lo) > 0.0) == (b.eval1(mid) > 0.0))
                    lo = mid;
                else
                    hi = mid;
            }
            double root = 0.5 * (lo + hi);
            minima.push_back(root);
            if (std::fabs(f.eval1(root)) > 1e-8 * (1.0 + f_scale) && bp.eval1(root) > 0.0 &&
                std::isnan(a_found))
                a_found = root;
        }
    }
    if (minima.empty()) throw std::invalid_argument("gradient_symmetric: phi has no interior minimum");
    if (std::isnan(a_found) && !f_zero)
        throw std::invalid_argument("gradient_symmetric: f vanishes at every minimum of phi");
    if (f_zero) a_found = minima.front();

    ExperimentResult res;
    res.name = "gradient_symmetric";
    res.params = {{"phi", phi_src}, {"f", f_src}, {"n", std::to_string(n)},
                  {"minimum", num17(a_found)}, {"b", b.str()}};

    ProblemSpec p = make_problem(1, {b.str()}, "1", f_src);
    p.n = n;

    // solvability integral int f e^{phi/eps} vanishes by parity
    {
        double eps0 = eps_ladder.front();
        double num = 0.0, den = 0.0;
        for (int i = 0; i < n; ++i) {
            double x = i * g.h;
            double wgt = std::exp(phi.eval1(x) / eps0);
            num += f.eval1(x) * wgt;
            den += std::fabs(f.eval1(x)) * wgt;
        }
        res.assert_that("solvability_integral_vanishes", std::fabs(num) <= 1e-8 * den,
                        "relative size " + num_shortest(den > 0 ? std::fabs(num) / den : 0.0));
    }

    CsvTable table;
    table.header = {"eps", "max_abs_u", "increment", "increment_ratio"};
    std::vector<double> values;
    for (double eps : eps_ladder) {
        GridFunction u = solve_constant_c(p, eps, eps, 1e-10, p.max_iter);
        values.push_back(sup_norm(u));
    }
    bool increasing = true, ratios_ok = true;
    double prev_inc = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        std::string inc_s, ratio_s;
        if (k > 0) {
            double inc = values[k] - values[k - 1];
            if (inc <= 0.0) increasing = false;
            inc_s = num17(inc);
            if (k > 1) {
                double ratio = inc / prev_inc;
                if (ratio < 0.5) ratios_ok = false;
                ratio_s = num17(ratio);
            }
            prev_inc = inc;
        }
        table.add_row({num17(eps_ladder[k]), num17(values[k]), inc_s, ratio_s});
    }
    res.tables.emplace_back("divergence", std::move(table));
    if (f_zero) {
        res.assert_that("bounded_for_zero_f", values.back() < 1e-8, "u stays at zero");
    } else {
        res.assert_that("max_u_diverges", increasing, "max |u_eps| grows as eps decreases");
        res.assert_that("log_like_increments", ratios_ok,
                        "each increment at least half the previous one");
    }
    return res;
}

}  // namespace torpde
