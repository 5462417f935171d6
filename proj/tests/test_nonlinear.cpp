#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "torpde/experiments.hpp"
#include "torpde/nonlinear.hpp"

using namespace torpde;

namespace {

ProblemSpec example1_problem(int n, double K = 10.0, double beta = 0.1, double alpha = 0.5) {
    Example1Setup s = example1_setup(K, beta, alpha, "2 + sin(x1)");
    ProblemSpec p = make_problem(1, {s.b_source}, s.c_source, s.f_source);
    p.n = n;
    p.tol_solver = 1e-12;
    p.tol_picard = 1e-10;
    return p;
}

}  // namespace

TEST_CASE("lambda-free coefficients converge in one iteration past the first solve") {
    ProblemSpec p = make_problem(1, {"1"}, "2", "sin(x1)");
    p.n = 64;
    p.tol_solver = 1e-12;
    auto [rep, trace] = picard_elliptic(p, 0.2, GridFunction(p.make_grid()), 1e-9, 50);
    CHECK(trace.converged);
    CHECK(trace.iterations <= 2);
}

TEST_CASE("zero forcing collapses immediately") {
    ProblemSpec p = make_problem(1, {"1"}, "2", "0");
    p.n = 64;
    auto [rep, trace] = picard_elliptic(p, 0.2, GridFunction(p.make_grid()), 1e-9, 50);
    CHECK(trace.converged);
    CHECK(trace.iterations == 1);
    CHECK(sup_norm(rep.solution) == 0.0);
}

TEST_CASE("gate failure raises") {
    ProblemSpec p = make_problem(1, {"sin(x1)"}, "0.5", "1");  // c0 = 0.5 < b0 = 1
    p.n = 64;
    CHECK_THROWS_AS(picard_elliptic(p, 0.1, GridFunction(p.make_grid()), 1e-8, 50), GateError);
    CHECK_THROWS_AS(picard_integral(p, GridFunction(p.make_grid()), 1e-6, 20), GateError);
    CHECK_THROWS_AS(viscosity_limit_nonlinear(p, {0.1, 0.05}, 1.0), GateError);
}

TEST_CASE("picard contraction on the stiff modulated instance") {
    ProblemSpec p = example1_problem(256);
    ConstantsReport rep = compute_constants(p, default_lambda_box(p), 128);
    REQUIRE(rep.gate());
    auto [srep, trace] = picard_elliptic(p, 0.1, GridFunction(p.make_grid()), 1e-10, 50, &rep);
    REQUIRE(trace.converged);
    CHECK(trace.rho_star < 1.0);
    CHECK(trace.iterations <= 30);
    for (double rho : trace.ratios) CHECK(rho <= trace.rho_star);
    CHECK(trace.nonlinear_residual <= 1e-6);

    // Lipschitz propagation: every iterate obeys R(eps) up to O(h)
    double R = r_of_eps(rep, 0.1);
    double h = p.make_grid().h;
    for (double lip : trace.lip_estimates) CHECK(lip <= R * (1.0 + 5.0 * h) + 5.0 * h);

    // sign selection: nonnegative start and positive forcing keep iterates nonnegative
    for (double mn : trace.min_values) CHECK(mn >= -1e-12);
}

TEST_CASE("integral route equals the linear formula for lambda-free data") {
    ProblemSpec p = make_problem(1, {"1"}, "2", "sin(x1)");
    p.n = 64;
    p.tol_quad = 1e-6;
    IntegralPicardResult r = picard_integral(p, GridFunction(p.make_grid()), 1e-5, 20);
    REQUIRE(r.converged);
    CHECK(r.iterations <= 2);
    TorusGrid g = p.make_grid();
    double dev = 0.0;
    for (int i = 0; i < g.n; ++i) {
        double x = i * g.h;
        dev = std::max(dev, std::fabs(r.u.at(i) - (2.0 * std::sin(x) - std::cos(x)) / 5.0));
    }
    CHECK(dev <= 2e-5 + 1e-4);
}

TEST_CASE("integral route on the 2-torus reduces to the 1-D closed form") {
    ProblemSpec p = make_problem(2, {"1", "sqrt(2)"}, "2", "sin(x1)");
    p.n = 16;
    p.tol_quad = 1e-4;
    IntegralPicardResult r = picard_integral(p, GridFunction(p.make_grid()), 1e-4, 10);
    REQUIRE(r.converged);
    TorusGrid g = p.make_grid();
    double dev = 0.0;
    for (int idx = 0; idx < g.node_count(); ++idx) {
        auto pt = g.point(idx);
        dev = std::max(dev, std::fabs(r.u.values[static_cast<std::size_t>(idx)] -
                                      (2.0 * std::sin(pt[0]) - std::cos(pt[0])) / 5.0));
    }
    CHECK(dev <= 1e-3);
}

TEST_CASE("gronwall certificate runs the frozen flows on the 2-torus") {
    ProblemSpec p = make_problem(2, {"1 + 0.1*lam", "sqrt(2)"}, "2", "sin(x1)");
    p.n = 16;
    TorusGrid g = p.make_grid();
    GridFunction u_a(g, 0.1), u_b(g, 0.3);  // constant iterates, lip 0
    GronwallReport r = gronwall_certificate(p, u_a, u_b, 0.5, 2.0, 8);
    CHECK(r.pass);
    CHECK(r.v_norm == Catch::Approx(0.2));
    CHECK(r.max_ratio <= 1.01);
    CHECK(r.samples_checked > 0);
}

TEST_CASE("integral route with zero forcing returns zero") {
    ProblemSpec p = make_problem(1, {"1"}, "2", "0");
    p.n = 32;
    IntegralPicardResult r = picard_integral(p, GridFunction(p.make_grid()), 1e-8, 10);
    CHECK(r.converged);
    CHECK(sup_norm(r.u) == 0.0);
}

TEST_CASE("both nonlinear routes agree on the modulated instance") {
    ProblemSpec p = example1_problem(128);
    p.tol_quad = 1e-5;
    IntegralPicardResult ri = picard_integral(p, GridFunction(p.make_grid()), 1e-6, 30);
    REQUIRE(ri.converged);
    auto [re, trace] = picard_elliptic(p, 1e-3, GridFunction(p.make_grid()), 1e-9, 50);
    REQUIRE(trace.converged);
    CHECK(sup_dist(ri.u, re.solution) <= 1e-2);
}

TEST_CASE("nonlinear viscosity limit reduces to the linear solution") {
    ProblemSpec p = make_problem(1, {"1"}, "2", "sin(x1)");
    p.n = 256;
    p.tol_solver = 1e-12;
    NonlinearLimitResult lim = viscosity_limit_nonlinear(p, {0.4, 0.2, 0.1, 0.05, 0.025}, 0.2);
    CHECK(lim.cauchy);
    TorusGrid g = p.make_grid();
    double dev = 0.0;
    for (int i = 0; i < g.n; ++i) {
        double x = i * g.h;
        dev = std::max(dev, std::fabs(lim.limit.at(i) - (2.0 * std::sin(x) - std::cos(x)) / 5.0));
    }
    CHECK(dev <= 1e-2);
    CHECK(lim.residual_ok);
}

TEST_CASE("nonlinear viscosity limit of zero forcing is zero") {
    ProblemSpec p = make_problem(1, {"1"}, "2", "0");
    p.n = 64;
    NonlinearLimitResult lim = viscosity_limit_nonlinear(p, {0.2, 0.1}, 1e-6);
    CHECK(sup_norm(lim.limit) == 0.0);
}

TEST_CASE("gronwall certificate trivial cases") {
    ProblemSpec p = example1_problem(64);
    GridFunction u(p.make_grid(), 0.2);
    GronwallReport r = gronwall_certificate(p, u, u, 1.0, 2.0, 8);
    CHECK(r.pass);
    CHECK(r.v_norm == 0.0);

    // lambda-independent field: flows coincide
    ProblemSpec lin = make_problem(1, {"1 + 0.5*sin(x1)"}, "2", "1");
    lin.n = 64;
    GridFunction a(lin.make_grid(), 0.1), b(lin.make_grid(), 0.3);
    GronwallReport r2 = gronwall_certificate(lin, a, b, 1.0, 2.0, 8);
    CHECK(r2.pass);
}

TEST_CASE("gronwall certificate on a perturbed solution pair") {
    ProblemSpec p = example1_problem(128);
    auto [rep, trace] = picard_elliptic(p, 0.1, GridFunction(p.make_grid()), 1e-9, 50);
    REQUIRE(trace.converged);
    GridFunction u_a = rep.solution;
    GridFunction u_b = u_a;
    TorusGrid g = p.make_grid();
    for (int i = 0; i < g.n; ++i) u_b.at(i) += 0.01 * (1.0 + 0.5 * std::sin(2.0 * i * g.h));
    double M = std::max(lip_estimate(u_a), lip_estimate(u_b)) + 0.01;
    GronwallReport r = gronwall_certificate(p, u_a, u_b, M, 3.0, 16);
    CHECK(r.pass);
    CHECK(r.max_ratio <= 1.01);

    GridFunction steep(g);
    for (int i = 0; i < g.n; ++i) steep.at(i) = std::sin(i * g.h);
    CHECK_THROWS_AS(gronwall_certificate(p, steep, steep, 0.5, 1.0, 4), std::invalid_argument);
}
