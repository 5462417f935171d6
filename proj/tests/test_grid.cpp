#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "torpde/grid.hpp"

using namespace torpde;

namespace {

GridFunction random_field(const TorusGrid& g, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    GridFunction f(g);
    for (double& v : f.values) v = u(rng);
    return f;
}

}  // namespace

TEST_CASE("grid invariants") {
    CHECK_THROWS_AS(TorusGrid(1, 4), std::invalid_argument);
    CHECK_THROWS_AS(TorusGrid(3, 16), std::invalid_argument);
    TorusGrid g(2, 16);
    CHECK(g.node_count() == 256);
    CHECK(g.h == Catch::Approx(two_pi / 16.0));
    CHECK(g.index(-1, 0) == 15);
    CHECK(g.index(16, 2) == 2 * 16);
}

TEST_CASE("sample evaluates at the nodes") {
    TorusGrid g(1, 8);
    GridFunction s = sample(parse_field_expr("sin(x1)", 1), g);
    for (int i = 0; i < 8; ++i) CHECK(s.at(i) == Catch::Approx(std::sin(i * g.h)).margin(1e-15));

    GridFunction two = sample(parse_field_expr("2", 1), g);
    for (double v : two.values) CHECK(v == 2.0);

    GridFunction f = random_field(g, 7);
    GridFunction copy = sample(parse_field_expr("lam", 1), g, &f);
    CHECK(copy.values == f.values);

    CHECK_THROWS_AS(sample(parse_field_expr("lam", 1), g), std::invalid_argument);
}

TEST_CASE("neg_laplacian annihilates constants exactly") {
    TorusGrid g(1, 64);
    GridFunction c(g, 3.7);
    GridFunction out = neg_laplacian(c);
    double total = 0.0;
    for (double v : out.values) {
        CHECK(v == 0.0);
        total += v;
    }
    CHECK(total == 0.0);
}

TEST_CASE("neg_laplacian matches the discrete symbol on trig modes") {
    TorusGrid g(1, 512);
    double h = g.h;
    GridFunction u = sample(parse_field_expr("sin(x1)", 1), g);
    GridFunction lu = neg_laplacian(u);
    double symbol = (2.0 - 2.0 * std::cos(h)) / (h * h);
    CHECK(std::fabs(symbol - 1.0) <= h * h);  // -> eigenvalue 1 as h -> 0
    for (int i = 0; i < g.n; i += 17)
        CHECK(lu.at(i) == Catch::Approx(symbol * u.at(i)).margin(1e-9));

    GridFunction u2 = sample(parse_field_expr("cos(2*x1)", 1), g);
    GridFunction lu2 = neg_laplacian(u2);
    double dev = 0.0;
    for (int i = 0; i < g.n; ++i) dev = std::max(dev, std::fabs(lu2.at(i) - 4.0 * u2.at(i)));
    CHECK(dev <= 2.0 * h * h * 4.0);
}

TEST_CASE("neg_laplacian values sum to zero up to roundoff") {
    TorusGrid g(1, 256);
    GridFunction u = random_field(g, 11);
    GridFunction lu = neg_laplacian(u);
    double total = 0.0, scale = 0.0;
    for (double v : lu.values) {
        total += v;
        scale = std::max(scale, std::fabs(v));
    }
    CHECK(std::fabs(total) <= 256 * 4e-16 * scale);

    TorusGrid g2(2, 32);
    GridFunction w = random_field(g2, 12);
    GridFunction lw = neg_laplacian(w);
    total = 0.0;
    scale = 0.0;
    for (double v : lw.values) {
        total += v;
        scale = std::max(scale, std::fabs(v));
    }
    CHECK(std::fabs(total) <= 1024 * 4e-16 * scale);
}

TEST_CASE("advect of a constant is exactly zero") {
    TorusGrid g(1, 64);
    std::vector<GridFunction> b = {sample(parse_field_expr("1", 1), g)};
    GridFunction c(g, 2.5);
    for (Scheme s : {Scheme::upwind, Scheme::centered})
        for (double v : advect(b, c, s).values) CHECK(v == 0.0);
}

TEST_CASE("centered advection matches the discrete symbol") {
    TorusGrid g(1, 512);
    std::vector<GridFunction> b = {sample(parse_field_expr("1", 1), g)};
    GridFunction u = sample(parse_field_expr("sin(x1)", 1), g);
    GridFunction a = advect(b, u, Scheme::centered);
    // central difference of sin is exactly (sin h / h) cos at the nodes
    double dev = 0.0;
    for (int i = 0; i < g.n; ++i) dev = std::max(dev, std::fabs(a.at(i) - std::cos(i * g.h)));
    CHECK(dev <= g.h * g.h);
}

TEST_CASE("upwind chooses the stencil against the flow") {
    TorusGrid g(1, 16);
    GridFunction u(g);
    u.at(5) = 1.0;  // node indicator spike
    std::vector<GridFunction> bneg = {sample(parse_field_expr("0 - 1", 1), g)};
    GridFunction a = advect(bneg, u, Scheme::upwind);
    // forward difference: feels the spike at node 4, cancels at node 5
    CHECK(a.at(4) == Catch::Approx(-1.0 / g.h));
    CHECK(a.at(5) == Catch::Approx(1.0 / g.h));
    CHECK(a.at(6) == 0.0);

    std::vector<GridFunction> bpos = {sample(parse_field_expr("1", 1), g)};
    GridFunction a2 = advect(bpos, u, Scheme::upwind);
    CHECK(a2.at(5) == Catch::Approx(1.0 / g.h));
    CHECK(a2.at(6) == Catch::Approx(-1.0 / g.h));
    CHECK(a2.at(4) == 0.0);
}

TEST_CASE("norms and lip estimates") {
    TorusGrid g(1, 512);
    GridFunction s = sample(parse_field_expr("sin(x1)", 1), g);
    CHECK(sup_norm(s) == Catch::Approx(1.0).margin(1e-4));
    CHECK(lip_estimate(s) == Catch::Approx(1.0).margin(g.h));

    GridFunction c(g, -4.0);
    CHECK(lip_estimate(c) == 0.0);
    CHECK(sup_norm(c) == 4.0);

    GridFunction s3 = sample(parse_field_expr("cos(3*x1)", 1), g);
    CHECK(lip_estimate(s3) == Catch::Approx(3.0).margin(0.01));
}

TEST_CASE("operators commute with grid translation") {
    TorusGrid g(1, 64);
    GridFunction u = random_field(g, 3);
    GridFunction b0 = random_field(g, 4);
    std::vector<GridFunction> b = {b0};
    std::vector<GridFunction> bt = {translate(b0, 1)};

    GridFunction left = translate(neg_laplacian(u), 1);
    GridFunction right = neg_laplacian(translate(u, 1));
    CHECK(left.values == right.values);

    for (Scheme s : {Scheme::upwind, Scheme::centered}) {
        GridFunction a1 = translate(advect(b, u, s), 1);
        GridFunction a2 = advect(bt, translate(u, 1), s);
        CHECK(a1.values == a2.values);
    }

    TorusGrid g2(2, 16);
    GridFunction w = random_field(g2, 5);
    CHECK(translate(neg_laplacian(w), 1, 1).values == neg_laplacian(translate(w, 1, 1)).values);
}

TEST_CASE("multilinear interpolation is exact at nodes and sup-norm bounded") {
    TorusGrid g(1, 32);
    GridFunction u = random_field(g, 21);
    for (int i = 0; i < g.n; ++i) {
        double x = i * g.h;
        CHECK(interpolate(u, &x) == Catch::Approx(u.at(i)).margin(1e-15));
    }
    double mid = 3.5 * g.h;
    CHECK(interpolate(u, &mid) == Catch::Approx(0.5 * (u.at(3) + u.at(4))).margin(1e-14));

    std::mt19937 rng(8);
    std::uniform_real_distribution<double> ux(-10.0, 10.0);
    double sup = sup_norm(u);
    for (int k = 0; k < 200; ++k) {
        double x = ux(rng);
        CHECK(std::fabs(interpolate(u, &x)) <= sup + 1e-14);
    }

    TorusGrid g2(2, 16);
    GridFunction w = random_field(g2, 22);
    for (int idx = 0; idx < g2.node_count(); idx += 7) {
        auto p = g2.point(idx);
        CHECK(interpolate(w, p.data()) ==
              Catch::Approx(w.values[static_cast<std::size_t>(idx)]).margin(1e-15));
    }
}

TEST_CASE("second difference quotient of trig modes") {
    TorusGrid g(1, 256);
    GridFunction u = sample(parse_field_expr("cos(2*x1)", 1), g);
    CHECK(max_second_difference(u) == Catch::Approx(4.0).epsilon(0.01));
}

TEST_CASE("csv serialization") {
    TorusGrid g(1, 8);
    GridFunction u = sample(parse_field_expr("sin(x1)", 1), g);
    std::string csv = to_csv(u);
    CHECK(csv.substr(0, 9) == "x1,value\n");
    CHECK(csv.find("0,0\n") != std::string::npos);
    TorusGrid g2(2, 8);
    std::string csv2 = to_csv(GridFunction(g2, 1.0));
    CHECK(csv2.substr(0, 12) == "x1,x2,value\n");
}
