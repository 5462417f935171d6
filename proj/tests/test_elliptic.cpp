#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "torpde/elliptic.hpp"

using namespace torpde;

namespace {

// dense reconstruction for small systems
std::vector<std::vector<double>> dense(const LinearSystem& s) {
    std::vector<std::vector<double>> a(static_cast<std::size_t>(s.rows()),
                                       std::vector<double>(static_cast<std::size_t>(s.rows()), 0.0));
    for (int i = 0; i < s.rows(); ++i)
        for (int k = s.row_ptr[static_cast<std::size_t>(i)]; k < s.row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
            a[static_cast<std::size_t>(i)][static_cast<std::size_t>(s.col[static_cast<std::size_t>(k)])] =
                s.val[static_cast<std::size_t>(k)];
    return a;
}

}  // namespace

TEST_CASE("diagonal system at eps = 0 with b = 0") {
    ProblemSpec p = make_problem(1, {"0"}, "2", "3");
    p.n = 16;
    LinearSystem sys = assemble(p, 0.0, Scheme::upwind);
    for (int i = 0; i < sys.rows(); ++i) {
        CHECK(sys.row_ptr[static_cast<std::size_t>(i) + 1] - sys.row_ptr[static_cast<std::size_t>(i)] == 1);
        CHECK(sys.val[static_cast<std::size_t>(sys.row_ptr[static_cast<std::size_t>(i)])] == 2.0);
    }
    SolveReport rep = solve(sys, 1e-12, 100);
    CHECK(rep.iterations == 1);  // one sweep solves a diagonal system
    for (double v : rep.solution.values) CHECK(v == 1.5);
}

TEST_CASE("row sums reproduce c exactly (stencil identity)") {
    ProblemSpec p = make_problem(2, {"sin(x1)*cos(x2)", "cos(x1)"}, "1 + 0.5*sin(x2)",
                                 "sin(x1 + x2)");
    p.n = 16;
    for (double eps : {0.0, 0.3}) {
        for (Scheme s : {Scheme::upwind, Scheme::centered}) {
            if (eps == 0.0 && s == Scheme::centered) continue;
            LinearSystem sys = assemble(p, eps, s);
            for (int i = 0; i < sys.rows(); ++i) {
                double off = sys.row_off_diag_sum(i);
                double diag = sys.val[static_cast<std::size_t>(sys.diag_pos[static_cast<std::size_t>(i)])];
                // bitwise identity by construction of the diagonal
                CHECK(diag == sys.c_values.values[static_cast<std::size_t>(i)] - off);
            }
        }
    }
}

TEST_CASE("pure diffusion system is symmetric positive definite") {
    ProblemSpec p = make_problem(1, {"0"}, "1", "0");
    p.n = 8;
    LinearSystem sys = assemble(p, 1.0, Scheme::upwind);
    auto a = dense(sys);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) CHECK(a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] ==
                                          a[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]);
    // positive diagonal with strict dominance implies positive definiteness
    for (int i = 0; i < 8; ++i) {
        double offsum = 0.0;
        for (int j = 0; j < 8; ++j)
            if (j != i) offsum += std::fabs(a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        CHECK(a[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] > offsum);
    }
    CHECK(sys.m_matrix);
}

TEST_CASE("m-matrix flag tracks the scheme and the mesh Peclet number") {
    ProblemSpec p = make_problem(1, {"1"}, "2", "sin(x1)");
    p.n = 64;
    CHECK(assemble(p, 0.0, Scheme::upwind).m_matrix);
    CHECK(assemble(p, 1.0, Scheme::centered).m_matrix);       // eps/h^2 dominates
    CHECK_FALSE(assemble(p, 0.001, Scheme::centered).m_matrix);  // positive off-diagonals appear
    CHECK_THROWS_AS(assemble(p, 0.0, Scheme::centered), std::invalid_argument);
    CHECK_THROWS_AS(assemble(p, -0.1, Scheme::upwind), std::invalid_argument);
}

TEST_CASE("constant-coefficient solve matches the trig ansatz") {
    // -eps u'' + u' + 2u = sin x has u = ((2+eps) sin - cos)/((2+eps)^2+1)
    double eps = 0.5;
    double A = (2.0 + eps) / ((2.0 + eps) * (2.0 + eps) + 1.0);
    double B = -1.0 / ((2.0 + eps) * (2.0 + eps) + 1.0);
    // the ansatz satisfies the equation
    for (int i = 0; i < 32; ++i) {
        double x = i * two_pi / 32;
        double u = A * std::sin(x) + B * std::cos(x);
        double du = A * std::cos(x) - B * std::sin(x);
        double lap = u;  // -u'' = u for first harmonics
        CHECK(eps * lap + du + 2.0 * u == Catch::Approx(std::sin(x)).margin(1e-14));
    }
    ProblemSpec p = make_problem(1, {"1"}, "2", "sin(x1)");
    p.n = 256;
    LinearSystem sys = assemble(p, eps, Scheme::upwind);
    SolveReport rep = solve(sys, 1e-11, 1000000);
    REQUIRE(rep.converged);
    double dev = 0.0;
    for (int i = 0; i < p.n; ++i) {
        double x = i * sys.grid.h;
        dev = std::max(dev, std::fabs(rep.solution.at(i) - (A * std::sin(x) + B * std::cos(x))));
    }
    CHECK(dev <= 5e-3);
}

TEST_CASE("centered scheme is second order on a smooth problem") {
    double eps = 1.0;
    double A = 3.0 / 10.0, B = -1.0 / 10.0;
    ProblemSpec p = make_problem(1, {"1"}, "2", "sin(x1)");
    p.n = 256;
    LinearSystem sys = assemble(p, eps, Scheme::centered);
    SolveReport rep = solve(sys, 1e-11, 1000000);
    REQUIRE(rep.converged);
    double dev = 0.0;
    for (int i = 0; i < p.n; ++i) {
        double x = i * sys.grid.h;
        dev = std::max(dev, std::fabs(rep.solution.at(i) - (A * std::sin(x) + B * std::cos(x))));
    }
    CHECK(dev <= 1e-3);
}

TEST_CASE("two-dimensional solve reduces to the 1-D closed form for x2-free data") {
    // with data independent of x2 the second axis drops out of the equation
    double eps = 0.1;
    double A = (2.0 + eps) / ((2.0 + eps) * (2.0 + eps) + 1.0);
    double B = -1.0 / ((2.0 + eps) * (2.0 + eps) + 1.0);
    ProblemSpec p = make_problem(2, {"1", "sqrt(2)"}, "2", "sin(x1)");
    p.n = 64;
    LinearSystem sys = assemble(p, eps, Scheme::upwind);
    SolveReport rep = solve(sys, 1e-11, 2000000);
    REQUIRE(rep.converged);
    double dev = 0.0;
    for (int idx = 0; idx < sys.grid.node_count(); ++idx) {
        auto pt = sys.grid.point(idx);
        dev = std::max(dev, std::fabs(rep.solution.values[static_cast<std::size_t>(idx)] -
                                      (A * std::sin(pt[0]) + B * std::cos(pt[0]))));
    }
    CHECK(dev <= 1e-2);
    // and the solution is constant along x2
    for (int i = 0; i < p.n; i += 7)
        for (int j = 1; j < p.n; j += 13)
            CHECK(rep.solution.at(i, j) == Catch::Approx(rep.solution.at(i, 0)).margin(1e-9));
}

TEST_CASE("reported residual matches a recomputation") {
    ProblemSpec p = make_problem(1, {"1 + 0.3*cos(x1)"}, "2 + sin(x1)", "cos(2*x1)");
    p.n = 128;
    LinearSystem sys = assemble(p, 0.2, Scheme::upwind);
    SolveReport rep = solve(sys, 1e-10, 100000);
    REQUIRE(rep.converged);
    double recomputed = 0.0;
    for (int i = 0; i < sys.rows(); ++i) {
        double s = 0.0;
        for (int k = sys.row_ptr[static_cast<std::size_t>(i)]; k < sys.row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
            s += sys.val[static_cast<std::size_t>(k)] *
                 rep.solution.values[static_cast<std::size_t>(sys.col[static_cast<std::size_t>(k)])];
        recomputed = std::max(recomputed, std::fabs(sys.rhs.values[static_cast<std::size_t>(i)] - s));
    }
    CHECK(std::fabs(recomputed - rep.residual_sup) <= 1e-12);
}

TEST_CASE("discrete maximum principle on random upwind problems") {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::uniform_real_distribution<double> epsd(0.0, 0.5);
    for (int trial = 0; trial < 20; ++trial) {
        int dim = trial % 3 == 0 ? 2 : 1;
        auto trig = [&](int d) {
            std::string v = d == 2 ? "x2" : "x1";
            return num_shortest(coef(rng)) + " + " + num_shortest(coef(rng)) + "*cos(x1) + " +
                   num_shortest(coef(rng)) + "*sin(" + v + ")";
        };
        std::vector<std::string> b = {trig(1)};
        if (dim == 2) b.push_back(trig(2));
        std::string c = "0.5 + (" + trig(dim) + ")^2";
        std::string f = trig(dim);
        ProblemSpec p = make_problem(dim, b, c, f);
        p.n = dim == 1 ? 64 : 24;
        double eps = trial % 4 == 0 ? 0.0 : epsd(rng);
        LinearSystem sys = assemble(p, eps, Scheme::upwind);
        SolveReport rep = solve(sys, 1e-11, 2000000);
        REQUIRE(rep.converged);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (int i = 0; i < sys.rows(); ++i) {
            double ratio = sys.rhs.values[static_cast<std::size_t>(i)] /
                           sys.c_values.values[static_cast<std::size_t>(i)];
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
        for (double v : rep.solution.values) {
            CHECK(v >= lo - 1e-8);
            CHECK(v <= hi + 1e-8);
        }
    }
}

TEST_CASE("discrete Lipschitz bound along the ladder") {
    ProblemSpec p = make_problem(1, {"1"}, "2", "sin(x1)");
    p.n = 512;
    ConstantsReport rep = compute_constants(p, default_lambda_box(p), 128);
    double h = p.make_grid().h;
    double prev_sd = 0.0;
    for (double eps : {0.4, 0.2, 0.1, 0.05}) {
        LinearSystem sys = assemble(p, eps, Scheme::upwind);
        SolveReport sol = solve(sys, 1e-11, 2000000);
        REQUIRE(sol.converged);
        CHECK(lip_estimate(sol.solution) <= lip_bound_linear(rep, eps) + 10.0 * h);
        // soft regularity: second difference quotients stay bounded down the ladder
        double sd = max_second_difference(sol.solution);
        if (prev_sd > 0.0) CHECK(sd <= 3.0 * prev_sd);
        prev_sd = std::max(prev_sd, sd);
    }
}

TEST_CASE("viscosity sweep against the characteristic reference") {
    ProblemSpec p = make_problem(1, {"1"}, "2", "sin(x1)");
    p.n = 512;
    p.tol_solver = 1e-11;
    p.tol_quad = 1e-7;
    SweepResult sw = viscosity_sweep(p, {0.4, 0.2, 0.1, 0.05}, SweepReference::characteristics);
    REQUIRE(sw.all_converged);
    CHECK(sw.monotone);
    // closed-form distances between u_eps and u, evaluated in-test
    std::vector<double> expected;
    for (double eps : {0.4, 0.2, 0.1, 0.05}) {
        double A = (2.0 + eps) / ((2.0 + eps) * (2.0 + eps) + 1.0) - 2.0 / 5.0;
        double B = -1.0 / ((2.0 + eps) * (2.0 + eps) + 1.0) + 1.0 / 5.0;
        expected.push_back(std::sqrt(A * A + B * B));
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(sw.rows[i].sup_error >= 0.5 * expected[i]);
        CHECK(sw.rows[i].sup_error <= 1.5 * expected[i]);
        if (i > 0) CHECK(sw.rows[i].sup_error < sw.rows[i - 1].sup_error);
    }
    CHECK(sw.rows.back().sup_error <= 0.05);
}

TEST_CASE("sweep with zero forcing stays at zero") {
    ProblemSpec p = make_problem(1, {"1"}, "2", "0");
    p.n = 64;
    SweepResult sw = viscosity_sweep(p, {0.4, 0.1}, SweepReference::characteristics);
    for (const auto& row : sw.rows) CHECK(row.sup_error <= 10.0 * p.tol_solver);
}

TEST_CASE("doubling n changes the sweep distance by O(h)") {
    double d[2];
    int idx = 0;
    for (int n : {256, 512}) {
        ProblemSpec p = make_problem(1, {"1"}, "2", "sin(x1)");
        p.n = n;
        p.tol_solver = 1e-11;
        p.tol_quad = 1e-7;
        SweepResult sw = viscosity_sweep(p, {0.1}, SweepReference::characteristics);
        d[idx++] = sw.rows[0].sup_error;
    }
    CHECK(std::fabs(d[0] - d[1]) <= 0.01);
}

TEST_CASE("non-convergence is reported, not thrown") {
    // diffusion-dominated system cut off long before the tolerance is reached
    ProblemSpec p = make_problem(1, {"1"}, "0.5", "sin(x1)");
    p.n = 256;
    LinearSystem sys = assemble(p, 1.0, Scheme::upwind);
    SolveReport rep = solve(sys, 1e-14, 5);
    CHECK_FALSE(rep.converged);
    CHECK(rep.iterations == 5);
    CHECK(rep.residual_sup > 1e-14);
}
